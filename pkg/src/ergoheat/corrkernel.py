"""Correlation roots h and the spatial covariance f = h * h~.

A :class:`KernelSpec` describes a radial, possibly signed function h on
R^d.  From it this module computes L^p norms over balls and their
complements, the covariance f = h * h~ together with its absolute-kernel
companion |h| * |h~|, the decreasing tail envelope of the latter, the
two membership integrals that decide well-posedness and ergodicity, the
potential-weighted integral that controls moment growth, and the
resolvent threshold derived from it.

Norms and integrals that diverge return ``math.inf`` rather than raising:
divergence is informative (it signals a membership failure), and IEEE
infinities propagate correctly through downstream arithmetic.  Membership
reports carry the reason alongside the flags.

All operations are pure; tables derived from a spec are cached on the
(immutable, hashable) spec itself.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import integrate

from . import kernels

__all__ = [
    "KernelSpec",
    "CorrelationTable",
    "MembershipReport",
    "DalangDivergence",
    "eval_h",
    "h_profile",
    "norm_ball",
    "norm_complement",
    "f_convolution",
    "correlation_table",
    "fbar",
    "fbar_grid",
    "pd_tail_bound",
    "check_membership",
    "dalang_integral",
    "lambda_h",
    "bdg_constant",
    "K_of_h",
    "truncate",
    "default_p",
]

_QUAD = dict(epsabs=1e-13, epsrel=1e-10, limit=200)
_FAMILIES = ("power_law", "compact_bump", "gaussian", "tabulated_radial")


@dataclass(frozen=True)
class KernelSpec:
    """Radial correlation root h, possibly signed and possibly truncated.

    Families:

    - ``power_law``: scale * s^{-(d+alpha)/2} inside the unit ball and
      scale * s^{-(d+beta)/2} outside it.
    - ``compact_bump``: constant ``amplitude`` on the ball of ``radius``.
    - ``gaussian``: exp(-s^2 / (2 width^2)).
    - ``tabulated_radial``: interpolated radial samples; constant below the
      first grid radius, zero beyond the last.

    ``sign_flips`` lists radii at which the sign of h flips (h starts
    positive at the origin).  ``truncation`` restricts h to a centered
    ball; see :func:`truncate`.
    """

    family: str
    d: int
    alpha: float | None = None
    beta: float | None = None
    scale: float = 1.0
    radius: float | None = None
    amplitude: float = 1.0
    width: float | None = None
    grid: tuple | None = None
    values: tuple | None = None
    order: int = 1
    sign_flips: tuple = ()
    truncation: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if int(self.d) < 1:
            raise ValueError("dimension must be >= 1")
        if self.family == "power_law":
            # only positivity is enforced here: the integrability window
            # alpha < d (h locally L^p for some p > 1) and the sharper
            # well-posedness window alpha < d ^ 2 are reported by
            # check_membership / cli validation, not by the constructor.
            if self.alpha is None or self.beta is None:
                raise ValueError("power_law needs alpha and beta")
            if not self.alpha > 0:
                raise ValueError("power_law needs alpha > 0")
            if not self.beta > 0:
                raise ValueError("power_law needs beta > 0")
        elif self.family == "compact_bump":
            if self.radius is None or not self.radius > 0:
                raise ValueError("compact_bump needs a positive radius")
        elif self.family == "gaussian":
            if self.width is None or not self.width > 0:
                raise ValueError("gaussian needs a positive width")
        else:
            if self.grid is None or self.values is None:
                raise ValueError("tabulated_radial needs grid and values")
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or g.size != v.size or g.size < 2:
                raise ValueError("grid and values must be 1-d and equally long")
            if np.any(np.diff(g) <= 0) or g[0] <= 0:
                raise ValueError("grid must be positive and strictly increasing")
            if not np.all(np.isfinite(v)):
                raise ValueError("tabulated values must be finite")
            if self.order not in (0, 1):
                raise ValueError("interpolation order must be 0 or 1")
        if any(f <= 0 for f in self.sign_flips) or list(self.sign_flips) != sorted(self.sign_flips):
            raise ValueError("sign_flips must be positive and increasing")
        if self.truncation is not None and not self.truncation > 0:
            raise ValueError("truncation radius must be positive")

    # -- constructors -----------------------------------------------------
    @classmethod
    def power_law(cls, d, alpha, beta, scale=1.0, sign_flips=(), truncation=None):
        return cls("power_law", d, alpha=float(alpha), beta=float(beta), scale=float(scale),
                   sign_flips=tuple(sign_flips), truncation=truncation)

    @classmethod
    def compact_bump(cls, d, radius, amplitude=1.0, sign_flips=(), truncation=None):
        return cls("compact_bump", d, radius=float(radius), amplitude=float(amplitude),
                   sign_flips=tuple(sign_flips), truncation=truncation)

    @classmethod
    def gaussian(cls, d, width, sign_flips=(), truncation=None):
        return cls("gaussian", d, width=float(width),
                   sign_flips=tuple(sign_flips), truncation=truncation)

    @classmethod
    def tabulated_radial(cls, d, grid, values, order=1, sign_flips=(), truncation=None):
        return cls("tabulated_radial", d, grid=tuple(float(g) for g in grid),
                   values=tuple(float(v) for v in values), order=order,
                   sign_flips=tuple(sign_flips), truncation=truncation)

    # -- geometry ----------------------------------------------------------
    @property
    def singular_at_origin(self):
        return self.family == "power_law"

    def structural_radius(self):
        """Largest intrinsic length scale (support, width, or 1)."""
        if self.family == "power_law":
            base = 1.0
        elif self.family == "compact_bump":
            base = self.radius
        elif self.family == "gaussian":
            base = self.width
        else:
            base = self.grid[-1]
        if self.sign_flips:
            base = max(base, self.sign_flips[-1])
        if self.truncation is not None:
            # truncation only shrinks the kernel; keeping the base scale
            # aligns derived tables with those of the untruncated spec
            base = min(base, max(self.truncation, 1e-9))
        return base

    def support_radius(self):
        """Radius beyond which h vanishes identically, or None."""
        sup = None
        if self.family == "compact_bump":
            sup = self.radius
        elif self.family == "tabulated_radial":
            sup = self.grid[-1]
        if self.truncation is not None:
            sup = self.truncation if sup is None else min(sup, self.truncation)
        return sup

    def break_radii(self):
        """Radii where the profile is non-smooth (for quadrature splitting)."""
        out = set(self.sign_flips)
        if self.family == "power_law":
            out.add(1.0)
        elif self.family == "compact_bump":
            out.add(self.radius)
        elif self.family == "tabulated_radial":
            out.update(self.grid)
        if self.truncation is not None:
            out.add(self.truncation)
        return sorted(b for b in out if b > 0)


def h_profile(spec, s, signed=True):
    """Radial profile of h, vectorized over s >= 0; +inf at a singular origin."""
    s = np.asarray(s, dtype=float)
    if spec.family == "power_law":
        with np.errstate(divide="ignore"):
            safe = np.where(s > 0, s, np.nan)
            inner = safe ** (-(spec.d + spec.alpha) / 2.0)
            outer = safe ** (-(spec.d + spec.beta) / 2.0)
        base = spec.scale * np.where(s < 1.0, inner, outer)
        base = np.where(s == 0, np.inf, base)
    elif spec.family == "compact_bump":
        base = np.where(s <= spec.radius, spec.amplitude, 0.0)
    elif spec.family == "gaussian":
        base = np.exp(-(s * s) / (2.0 * spec.width ** 2))
    else:
        g = np.asarray(spec.grid)
        v = np.asarray(spec.values)
        if spec.order == 0:
            idx = np.clip(np.searchsorted(g, s, side="left"), 0, len(g) - 1)
            base = v[idx]
        else:
            base = np.interp(s, g, v, left=v[0], right=0.0)
        base = np.where(s > g[-1], 0.0, base)
    if spec.sign_flips:
        flips = np.searchsorted(np.asarray(spec.sign_flips), s, side="right")
        base = base * np.where(flips % 2 == 1, -1.0, 1.0)
    if spec.truncation is not None:
        base = np.where(s <= spec.truncation, base, 0.0)
    out = base if signed else np.abs(base)
    return out if out.ndim else float(out)


def _abs_profile(spec, s):
    return h_profile(spec, s, signed=False)


def eval_h(spec, x):
    """h at a point of R^d; +inf sentinel at the origin of a singular family."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = float(np.linalg.norm(x))
    if s == 0.0 and spec.singular_at_origin:
        return math.inf
    return float(h_profile(spec, s))


# ---------------------------------------------------------------------------
# radial integration with integrable endpoint singularities
# ---------------------------------------------------------------------------

def _radial_integral(g, d, lo, hi, breaks=(), origin_exponent=0.0):
    """int_lo^hi s^{d-1} g(s) ds, allowing a power singularity of g at 0.

    ``origin_exponent`` is the power behavior of g near 0 (g ~ s^theta);
    the integral is declared divergent (inf) when d - 1 + theta <= -1.
    """
    if lo < 0 or hi <= lo:
        raise ValueError("need 0 <= lo < hi")
    theta = origin_exponent
    if lo == 0.0 and d + theta <= 0:
        return math.inf
    pts = sorted(b for b in breaks if lo < b < hi)
    total = 0.0
    warnings_ctx = warnings.catch_warnings()
    warnings_ctx.__enter__()
    warnings.simplefilter("ignore", integrate.IntegrationWarning)
    if lo == 0.0:
        first = pts[0] if pts else min(hi, 1.0)
        if abs(theta) < 1e-12:
            val, _ = integrate.quad(lambda s: s ** (d - 1) * g(s), 0.0, first, **_QUAD)
        else:
            # algebraic endpoint weight s^{d-1+theta}; the remaining factor
            # g(s) s^{-theta} is regular at 0 (evaluated just off the endpoint)
            def regular(s, _tiny=first * 1e-28):
                s = max(s, _tiny)
                return g(s) * s ** (-theta)

            val, _ = integrate.quad(
                regular, 0.0, first,
                weight="alg", wvar=(d - 1.0 + theta, 0.0),
                epsabs=_QUAD["epsabs"], epsrel=_QUAD["epsrel"], limit=_QUAD["limit"],
            )
        total += val
        lo = first
        pts = [b for b in pts if b > lo]
    edges = [lo] + pts + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        if a >= b:
            continue
        val, _ = integrate.quad(lambda s: s ** (d - 1) * g(s), a, b, **_QUAD)
        total += val
    warnings_ctx.__exit__(None, None, None)
    return total


def _origin_h_exponent(spec):
    return -(spec.d + spec.alpha) / 2.0 if spec.family == "power_law" else 0.0


def norm_ball(spec, p, r):
    """L^p norm of h over the centered ball of radius r.

    Returns inf when the defining integral diverges (h not locally L^p).
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if not p >= 1:
        raise ValueError("exponent must be >= 1")
    d = spec.d
    theta = p * _origin_h_exponent(spec)
    if d + theta <= 0:
        return math.inf
    val = _radial_integral(
        lambda s: float(_abs_profile(spec, s)) ** p, d, 0.0, r,
        breaks=spec.break_radii(), origin_exponent=theta,
    )
    return (kernels.sphere_area(d) * val) ** (1.0 / p) if np.isfinite(val) else math.inf


def norm_complement(spec, q, r):
    """L^q norm of h over the complement of the centered r-ball (inf if divergent)."""
    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    if not q >= 1:
        raise ValueError("exponent must be >= 1")
    d = spec.d
    sup = spec.support_radius()
    if sup is not None and r >= sup:
        return 0.0
    if spec.family == "power_law" and spec.truncation is None:
        # tail integrand ~ s^{d-1-q(d+beta)/2}: converges iff q > 2d/(d+beta)
        if d - 1.0 - q * (d + spec.beta) / 2.0 >= -1.0:
            return math.inf
    theta = q * _origin_h_exponent(spec)
    if r == 0.0 and d + theta <= 0:
        return math.inf
    hi = sup if sup is not None else np.inf
    val = _radial_integral(
        lambda s: float(_abs_profile(spec, s)) ** q, d, r, hi,
        breaks=spec.break_radii(), origin_exponent=theta,
    )
    return (kernels.sphere_area(d) * val) ** (1.0 / q) if np.isfinite(val) else math.inf


def default_p(spec):
    """An exponent p > 1 for which the membership norms have a chance to be finite."""
    d = spec.d
    if spec.family != "power_law":
        return 2.0
    p_max = 2.0 * d / (d + spec.alpha)  # local integrability constraint
    if spec.beta < d:
        p_max = min(p_max, 2.0 * d / (d - spec.beta))  # makes q > 2d/(d+beta)
    p_max = min(p_max, 2.0)
    return 1.0 + 0.5 * (p_max - 1.0)


# ---------------------------------------------------------------------------
# the covariance f = h * h~ and its absolute companion
# ---------------------------------------------------------------------------

def _conv_breakpoints(spec, x):
    pts = {0.0, x}
    for base in (0.0, x):
        for b in spec.break_radii():
            pts.add(base - b)
            pts.add(base + b)
    return sorted(pts)


def _conv_quad_1d(spec, x, epsabs=1e-12, epsrel=1e-9):
    """(f(x), f_abs(x), err) by adaptive quadrature in d=1.

    Pieces adjacent to the integrable singular points y in {0, x} of a
    power-law root are integrated with an algebraic endpoint weight.
    """
    x = abs(float(x))
    if spec.family == "power_law" and spec.alpha >= spec.d:
        return math.inf, math.inf, math.inf  # h is not locally integrable
    kappa = (spec.d + spec.alpha) / 2.0 if spec.singular_at_origin else 0.0
    if x == 0.0 and kappa > 0:
        n2_in = norm_ball(spec, 2.0, 1.0)
        n2_out = norm_complement(spec, 2.0, 1.0)
        full = n2_in * n2_in + n2_out * n2_out  # diverges for every power law
        return full, full, 0.0
    sup = spec.support_radius()

    def raw(y):
        return float(h_profile(spec, abs(y))) * float(h_profile(spec, abs(y - x)))

    singular = {0.0, x} if kappa > 0 else set()
    pts = _conv_breakpoints(spec, x)
    if sup is not None:
        lo_lim, hi_lim = -sup, x + sup
        pts = [p for p in pts if lo_lim < p < hi_lim]
        edges = [lo_lim] + pts + [hi_lim]
    else:
        edges = pts
    total = np.zeros(2)
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < 1e-14:
                continue
            wl = kappa if a in singular else 0.0
            wr = kappa if b in singular else 0.0
            if wl == 0.0 and wr == 0.0:
                res, res_err = integrate.quad_vec(
                    lambda y: np.array([raw(y), abs(raw(y))]), a, b,
                    epsabs=epsabs, epsrel=epsrel)
                total += res
                err += res_err
                continue

            lo_clip = max(a + (b - a) * 1e-15, np.nextafter(a, b))
            hi_clip = min(b - (b - a) * 1e-15, np.nextafter(b, a))

            def regular(y):
                y = min(max(y, lo_clip), hi_clip)
                return raw(y) * (y - a) ** wl * (b - y) ** wr

            opts = dict(weight="alg", wvar=(-wl, -wr), epsabs=epsabs,
                        epsrel=epsrel, limit=200)
            v_signed, e1 = integrate.quad(regular, a, b, **opts)
            v_abs, e2 = integrate.quad(lambda y: abs(regular(y)), a, b, **opts)
            total += np.array([v_signed, v_abs])
            err += e1 + e2
        if sup is None:
            for a, b in ((-np.inf, edges[0]), (edges[-1], np.inf)):
                res, res_err = integrate.quad_vec(
                    lambda y: np.array([raw(y), abs(raw(y))]), a, b,
                    epsabs=epsabs, epsrel=epsrel)
                total += res
                err += res_err
    return float(total[0]), float(total[1]), float(err)


def _singular_cell_average(spec, dx):
    """Cell average of h over the origin cell, via an equal-volume ball."""
    d = spec.d
    r_eq = dx * (math.gamma(d / 2.0 + 1.0)) ** (1.0 / d) / math.sqrt(math.pi)
    val = _radial_integral(
        lambda s: float(_abs_profile(spec, s)), d, 0.0, r_eq,
        breaks=spec.break_radii(), origin_exponent=_origin_h_exponent(spec),
    )
    return kernels.sphere_area(d) * val / dx ** d


def _lattice_axis_correlation(spec, n, extent):
    """(radii, f, f_abs) sampled along a lattice axis via FFT autocorrelation."""
    d = spec.d
    dx = extent / n
    axis = np.arange(n) * dx
    axis = np.minimum(axis, extent - axis)  # torus min-image distance
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    dist = np.sqrt(sum(g * g for g in grids))
    signed = np.asarray(h_profile(spec, dist), dtype=float)
    if spec.singular_at_origin:
        signed[(0,) * d] = _singular_cell_average(spec, dx)
    mag = np.abs(signed)
    fft_axes = tuple(range(d))
    f = sfft.irfftn(np.abs(sfft.rfftn(signed, axes=fft_axes)) ** 2, s=signed.shape,
                    axes=fft_axes) * dx ** d
    fa = sfft.irfftn(np.abs(sfft.rfftn(mag, axes=fft_axes)) ** 2, s=mag.shape,
                     axes=fft_axes) * dx ** d
    take = (slice(0, n // 2),) + (0,) * (d - 1)
    return axis[: n // 2], f[take], fa[take]


def _conv_break_radii(spec, r_max):
    """Radii where f has kinks: pairwise sums of the h break radii."""
    hb = [0.0] + spec.break_radii()
    out = sorted({a + b for a in hb for b in hb if 0.0 < a + b <= r_max})
    return out


@lru_cache(maxsize=32)
def _f_table(spec):
    """Cached radial table (radii, f, f_abs, err)."""
    d = spec.d
    if d == 1:
        r_max = 8.0 * spec.structural_radius() + 2.0
        radii = np.concatenate([
            np.geomspace(1e-6, 0.1, 25, endpoint=False),
            np.linspace(0.1, r_max, 140),
            np.asarray(_conv_break_radii(spec, r_max)),
        ])
        radii = np.unique(radii)
        f = np.empty_like(radii)
        fa = np.empty_like(radii)
        err = np.empty_like(radii)
        for i, r in enumerate(radii):
            f[i], fa[i], err[i] = _conv_quad_1d(spec, r, epsabs=1e-10, epsrel=1e-7)
        return radii, f, fa, err
    n = 2048 if d == 2 else 192
    extent = 4.0 * spec.structural_radius() + 4.0
    r_c, f_c, fa_c = _lattice_axis_correlation(spec, n // 2, extent)
    r_f, f_f, fa_f = _lattice_axis_correlation(spec, n, extent)
    # Richardson extrapolation assuming second-order cell-center sampling;
    # the correction is interpolated onto the odd fine radii.
    corr_f = np.interp(r_f, r_f[::2], (f_f[::2] - f_c) / 3.0)
    corr_fa = np.interp(r_f, r_f[::2], (fa_f[::2] - fa_c) / 3.0)
    err = np.interp(r_f, r_f[::2], np.abs(f_f[::2] - f_c))
    keep = r_f > 0
    return r_f[keep], (f_f + corr_f)[keep], (fa_f + corr_fa)[keep], err[keep]


@dataclass(frozen=True)
class CorrelationTable:
    """Radial samples of f = h * h~ and |h| * |h~| with error estimates."""

    radii: np.ndarray
    f_values: np.ndarray
    f_abs_values: np.ndarray
    errors: np.ndarray

    def to_csv(self, path):
        data = np.column_stack([self.radii, self.f_values, self.f_abs_values, self.errors])
        with open(path, "w", newline="") as fh:
            fh.write("radius,f,f_abs,error\n")
            for row in data:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def correlation_table(spec, radii=None):
    """Tabulate (f, f_abs) on a radius grid (cached adaptive grid if omitted)."""
    r, f, fa, err = _f_table(spec)
    if radii is None:
        return CorrelationTable(r.copy(), f.copy(), fa.copy(), err.copy())
    radii = np.asarray(radii, dtype=float)
    if spec.d == 1:
        f_out = np.empty_like(radii)
        fa_out = np.empty_like(radii)
        err_out = np.empty_like(radii)
        for i, x in enumerate(radii):
            f_out[i], fa_out[i], err_out[i] = _conv_quad_1d(spec, x)
        return CorrelationTable(radii, f_out, fa_out, err_out)
    return CorrelationTable(radii, np.interp(radii, r, f), np.interp(radii, r, fa),
                            np.interp(radii, r, err))


def f_convolution(spec, x):
    """The pair (f(x), |h|*|h~|(x)) at a point or radius x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = float(np.linalg.norm(x))
    if spec.d == 1:
        f, fa, _ = _conv_quad_1d(spec, s)
        return f, fa
    r, f, fa, _ = _f_table(spec)
    return float(np.interp(s, r, f)), float(np.interp(s, r, fa))


@lru_cache(maxsize=32)
def _fabs_origin_fit(spec):
    """(coefficient, exponent) of f_abs ~ c * r^{-a} near the origin.

    Exact exponent alpha for power-law roots; fitted log-log slope on the
    smallest tabulated decade otherwise (bounded kernels fit to a ~ 0).
    """
    r, _, fa, _ = _f_table(spec)
    if spec.family == "power_law":
        a = spec.alpha
        c = fa[0] * r[0] ** a
        return float(c), float(a)
    lo = r[0]
    sel = (r >= lo) & (r <= lo * 10) & (fa > 0)
    if sel.sum() < 2:
        return float(max(fa[0], 0.0)), 0.0
    slope, logc = np.polyfit(np.log(r[sel]), np.log(fa[sel]), 1)
    a = max(0.0, -float(slope))
    if a < 0.05:
        return float(fa[0]), 0.0
    return float(math.exp(logc)), a


@lru_cache(maxsize=32)
def _fbar_data(spec):
    """(grid, f_abs, envelope, tail_bound, r_cap): envelope data for fbar."""
    r, _, fa, _ = _f_table(spec)
    r_cap = min(8.0 * spec.structural_radius(), float(r[-1]))
    sel = r <= r_cap
    r, fa = r[sel], np.maximum(fa[sel], 0.0)
    tail = pd_tail_bound(spec, default_p(spec), r_cap / 2.0)
    env = np.maximum.accumulate(fa[::-1])[::-1]
    env = np.maximum(env, tail)
    return r, fa, env, float(tail), float(r_cap)


def fbar_grid(spec):
    r, _, env, _, _ = _fbar_data(spec)
    return r.copy(), env.copy()


def fbar(spec, r):
    """Tail envelope sup over ||x|| > r of |h|*|h~|; nonincreasing in r."""
    if not r > 0:
        raise ValueError("radius must be positive")
    sup = spec.support_radius()
    if sup is not None and r >= 2.0 * sup:
        return 0.0
    grid, fa, env, tail, r_cap = _fbar_data(spec)
    if r >= r_cap:
        return pd_tail_bound(spec, default_p(spec), r / 2.0)
    if r < grid[0]:
        c, a = _fabs_origin_fit(spec)
        near = c * r ** (-a) if a > 0 else c
        return max(float(near), float(env[0]))
    idx = np.searchsorted(grid, r, side="left")
    # f_abs is continuous off the origin, so the open-set sup includes the
    # boundary value itself
    at_r = float(np.interp(r, grid, fa))
    return max(at_r, float(env[min(idx, len(env) - 1)]))


def pd_tail_bound(spec, p, r):
    """Upper bound 2 ||h||_{L^p(B_r)} ||h||_{L^q(B_r^c)} + ||h||^2_{L^2(B_r^c)}.

    Dominates the covariance envelope beyond radius 2r.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    if not p > 1:
        raise ValueError("exponent must exceed 1")
    q = p / (p - 1.0)
    nb = norm_ball(spec, p, r)
    nc = norm_complement(spec, q, r)
    n2 = norm_complement(spec, 2.0, r)
    return 2.0 * nb * nc + n2 * n2


# ---------------------------------------------------------------------------
# membership integrals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MembershipReport:
    f_p: bool
    g_p: bool
    f_integral: float
    g_integral: float
    p: float
    reason: str = ""


def check_membership(spec, p):
    """Evaluate the two radius-weighted membership integrals on (0, 1].

    The first uses the s^{d-1} weight, the second the omega_d weight; the
    flags state finiteness of each.  The omega-weighted class is contained
    in the other, and the two coincide in d=1.
    """
    if not p > 1:
        raise ValueError("exponent must exceed 1")
    d = spec.d
    q = p / (p - 1.0)
    if not np.isfinite(norm_ball(spec, p, 1.0)):
        return MembershipReport(False, False, math.inf, math.inf, p,
                                reason=f"h is not locally L^{p:g}")
    if not np.isfinite(norm_complement(spec, q, 1.0)) or not np.isfinite(
            norm_complement(spec, 2.0, 1.0)):
        return MembershipReport(False, False, math.inf, math.inf, p,
                                reason="tail norm diverges")

    s_grid = np.geomspace(1e-4, 1.0, 40)
    psi = np.array([
        norm_ball(spec, p, s) * norm_complement(spec, q, s)
        + norm_complement(spec, 2.0, s) ** 2
        for s in s_grid
    ])
    if not np.all(np.isfinite(psi)):
        return MembershipReport(False, False, math.inf, math.inf, p,
                                reason="norm product diverges at finite radius")

    # detected power behavior near 0: psi ~ c * s^{-a}
    sel = (s_grid <= 1e-3) & (psi > 0)
    if sel.sum() >= 2:
        slope, logc = np.polyfit(np.log(s_grid[sel]), np.log(psi[sel]), 1)
        a_hat = -float(slope)
        c_hat = math.exp(logc)
    else:
        a_hat, c_hat = 0.0, float(psi[0])

    def weighted(use_omega):
        w = kernels.omega_d(s_grid, d) if use_omega else s_grid ** (d - 1.0)
        body = float(np.trapezoid(psi * w, s_grid))
        # analytic continuation of the fitted power below the grid
        s0 = s_grid[0]
        head_pow = (-a_hat) + ((0.0 if d == 1 else 1.0) if use_omega else d - 1.0)
        if head_pow <= -1.0 + 1e-9:
            return math.inf
        w0 = float(kernels.omega_d(s0, d)) if use_omega else s0 ** (d - 1.0)
        head = c_hat * s0 ** (-a_hat) * w0 * s0 / (head_pow + 1.0)
        return body + head

    f_int = weighted(use_omega=False)
    g_int = weighted(use_omega=True)
    g_ok = np.isfinite(g_int)
    f_ok = bool(np.isfinite(f_int) or g_ok)  # omega class is contained in the other
    reason = "" if g_ok else "omega-weighted integral diverges near 0"
    return MembershipReport(f_ok, bool(g_ok), f_int, g_int, p, reason)


# ---------------------------------------------------------------------------
# potential-weighted integral and the resolvent threshold
# ---------------------------------------------------------------------------

class DalangDivergence(ArithmeticError):
    """The potential-weighted covariance integral diverges."""


def _fabs_interpolant(spec):
    r, _, fa, _ = _f_table(spec)
    c, a = _fabs_origin_fit(spec)

    def fa_of(s):
        if s < r[0]:
            if a <= 0:
                return c
            return c * max(s, 1e-280) ** (-a)
        return float(np.interp(s, r, fa))

    return fa_of, r, c, a


def _potential_origin_exponent(d, a):
    # v ~ s^{1-d} omega_d(s) near 0 (log factor in d=2 ignored for the
    # power test), times f_abs ~ s^{-a}
    return (1.0 - d) + (0.0 if d == 1 else 1.0) - a


@lru_cache(maxsize=32)
def _dalang_grid(spec):
    """Dense radial grid of f_abs for the fast potential-weighted integral."""
    r, _, fa, _ = _f_table(spec)
    c, a = _fabs_origin_fit(spec)
    s0 = float(r[0])
    r_hi = float(r[-1])
    s_body = np.unique(np.concatenate([
        np.geomspace(s0, r_hi, 1600),
        r,
    ]))
    fa_body = np.interp(s_body, r, fa)
    tail_env = fbar(spec, max(r_hi, 1e-9))
    return s_body, fa_body, s0, c, a, r_hi, tail_env


def _dalang_fast(spec, lam):
    from scipy import special

    d = spec.d
    s_body, fa_body, s0, c, a, r_hi, tail_env = _dalang_grid(spec)
    vbar = kernels.potential_profile_fast(lam, s_body, d)
    body = float(np.trapezoid(s_body ** (d - 1) * vbar * fa_body, s_body))
    # head (0, s0]: f_abs ~ c s^{-a} against the potential's origin behavior
    rho = math.sqrt(2.0 * lam)
    if d == 1:
        # v(s) = e^{-rho s} / rho: incomplete-gamma closed form
        head = (c / rho) * rho ** (a - 1.0) * special.gamma(1.0 - a) \
            * special.gammainc(1.0 - a, rho * s0) if a > 0 else \
            (c / rho) * (1.0 - math.exp(-rho * s0)) / rho
    else:
        # match the potential to its small-radius comparison function at s0
        v0 = float(kernels.potential_profile_fast(lam, s0, d))
        cv = v0 / float(kernels.potential_asymptote(min(s0, 0.999), d))
        if d == 2:
            ex = 1.0 - a
            # int_0^{s0} s * s^{-a} log(1/s) ds (omega weight with log)
            head = cv * c * s0 ** (ex + 1.0) * (math.log(max(1.0 / s0, math.e)) / (ex + 1.0)
                                                + 1.0 / (ex + 1.0) ** 2)
        else:
            ex = (2.0 - d) - a + (d - 1.0)
            head = cv * c * s0 ** (ex + 1.0) / (ex + 1.0)
    # tail beyond the table: envelope times the decaying potential mass
    tail = 0.0
    if tail_env > 0:
        s_t = np.geomspace(r_hi, r_hi + 60.0 / rho, 400)
        v_t = kernels.potential_profile_fast(lam, s_t, d)
        tail = tail_env * float(np.trapezoid(s_t ** (d - 1) * v_t, s_t))
    return kernels.sphere_area(d) * (head + body + tail)


def dalang_integral(spec, lam, fast=True):
    """int v_lam(x) (|h|*|h~|)(x) dx over R^d; finite on the omega class.

    ``fast`` integrates a cached radial grid of f_abs; the slow path
    (d=1 only) re-runs the convolution quadrature inside an adaptive
    outer integral.  Raises :class:`DalangDivergence` on divergence.
    """
    if not lam > 0:
        raise ValueError("potential parameter must be positive")
    d = spec.d
    _, a_exp = _fabs_origin_fit(spec)
    theta = _potential_origin_exponent(d, a_exp)
    if d + theta <= 1e-9:
        raise DalangDivergence(
            f"near-origin integrand exponent {d - 1 + theta:.3g} <= -1")

    if fast or d > 1:
        return _dalang_fast(spec, lam)

    def integrand(s):
        return kernels.potential_profile(lam, s, d) * _conv_quad_1d(spec, s)[1]

    r_tab = _f_table(spec)[0]
    r_hi = float(r_tab[-1])
    val = _radial_integral(integrand, d, 0.0, r_hi,
                           breaks=_conv_break_radii(spec, r_hi), origin_exponent=theta)
    tail_env = fbar(spec, max(r_hi, 1e-9))
    if tail_env > 0:
        tail = _radial_integral(lambda s: kernels.potential_profile(lam, s, d),
                                d, r_hi, np.inf)
        val += tail_env * tail
    return kernels.sphere_area(d) * val


def lambda_h(spec, delta, lam_lo=1e-6, lam_hi=1e6, rtol=1e-6):
    """Smallest lambda at which the potential-weighted integral drops below delta.

    Bisection on log(lambda); the integral is continuous and strictly
    decreasing in lambda.  Returns inf when even the (geometrically
    expanded) upper bracket fails to reach delta.
    """
    if not delta > 0:
        raise ValueError("threshold must be positive")

    def val(lam):
        return dalang_integral(spec, lam, fast=True)

    hi = lam_hi
    while val(hi) >= delta:
        hi *= 100.0
        if hi > 1e12:
            return math.inf
    lo = lam_lo
    while val(lo) < delta:
        lo /= 100.0
        if lo < 1e-12:
            return lo  # threshold met for every positive lambda
    while hi / lo > 1.0 + rtol:
        mid = math.sqrt(lo * hi)
        if val(mid) < delta:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def bdg_constant(k):
    """Martingale moment constant: exactly 1 at k=2, the 2*sqrt(k) bound above."""
    if k < 2:
        raise ValueError("moment order must be >= 2")
    return 1.0 if k == 2 else 2.0 * math.sqrt(k)


def K_of_h(spec):
    """1 + the unit-ball integral of |h|*|h~| + its envelope at radius 1."""
    d = spec.d
    fa_of, _, _, a = _fabs_interpolant(spec)
    if d == 1:
        integrand = lambda s: _conv_quad_1d(spec, s)[1]
    else:
        integrand = fa_of
    ball = kernels.sphere_area(d) * _radial_integral(
        integrand, d, 0.0, 1.0, breaks=_conv_break_radii(spec, 1.0),
        origin_exponent=-a)
    return 1.0 + ball + fbar(spec, 1.0)


def truncate(spec, r):
    """Restrict h to the centered ball of radius r (membership is preserved)."""
    if not r > 0:
        raise ValueError("truncation radius must be positive")
    new_r = r if spec.truncation is None else min(r, spec.truncation)
    return dataclasses.replace(spec, truncation=new_r)
