"""Heat-kernel and potential-kernel calculus.

Pure deterministic building blocks shared by the rest of the package:
the Gaussian transition density of half-Laplacian diffusion on R^d, its
Laplace transform in time (the lambda-potential density), the
dimension-dependent weight ``omega_d`` that governs the small-radius
singularity of the potential, Gaussian tail probabilities, and radial
profiles of all of the above.

All functions are pure and thread-safe; none of them hold state.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "SIM_DIMS",
    "sphere_area",
    "heat_kernel",
    "heat_profile",
    "log_plus",
    "omega_d",
    "potential_density",
    "potential_profile",
    "potential_profile_fast",
    "potential_asymptote",
    "gaussian_tail",
    "mills_asymptote",
    "radial_profiles",
]

# Formulas hold for any d >= 1; simulation modules restrict to these.
SIM_DIMS = (1, 2, 3)

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-11, limit=200)


def _check_dim(d):
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


def sphere_area(d):
    """Surface area of the unit sphere in R^d (2 for d=1, 2*pi for d=2, ...)."""
    d = _check_dim(d)
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def heat_profile(t, s, d):
    """Radial heat-kernel profile (2*pi*t)^{-d/2} exp(-s^2/(2t)).

    Vectorized over the radius ``s``; ``t`` must be a positive scalar.
    """
    d = _check_dim(d)
    if not t > 0:
        raise ValueError(f"time must be positive, got {t!r}")
    s = np.asarray(s, dtype=float)
    return (2.0 * math.pi * t) ** (-d / 2.0) * np.exp(-(s * s) / (2.0 * t))


def heat_kernel(t, x, d=None):
    """Gaussian heat kernel at time t and point x in R^d.

    ``x`` may be a scalar (d=1) or a length-d vector; ``d`` overrides the
    inferred dimension when x is all zeros and ambiguous.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise ValueError("x must be a scalar or a 1-d point vector")
    if d is None:
        d = x.size
    return float(heat_profile(t, np.linalg.norm(x), d))


def log_plus(z):
    """log(z v e): the truncated logarithm, >= 1 everywhere."""
    return np.log(np.maximum(np.asarray(z, dtype=float), math.e))


def omega_d(r, d):
    """Dimension-dependent weight: 1 (d=1), r*log_+(1/r) (d=2), r (d>=3)."""
    d = _check_dim(d)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("radius must be positive")
    if d == 1:
        out = np.ones_like(r)
    elif d == 2:
        out = r * log_plus(1.0 / r)
    else:
        out = r.copy()
    return out if out.ndim else float(out)


def _potential_quad(lam, s, d):
    # Laplace transform of the radial heat profile after the substitution
    # u = 1/t, which turns both endpoints into exponential decay:
    #   v(s) = (2*pi)^{-d/2} * int_0^inf u^{d/2-2} exp(-lam/u - s^2 u/2) du
    pref = (2.0 * math.pi) ** (-d / 2.0)
    a, b = float(lam), 0.5 * s * s

    def integrand(u):
        return u ** (d / 2.0 - 2.0) * math.exp(-a / u - b * u)

    lo, err_lo = integrate.quad(integrand, 0.0, 1.0, **_QUAD_OPTS)
    hi, err_hi = integrate.quad(integrand, 1.0, np.inf, **_QUAD_OPTS)
    return pref * (lo + hi)


def potential_profile(lam, s, d):
    """Radial lambda-potential density: int_0^inf e^{-lam t} p_t(s) dt.

    Closed forms in d=1 and d=3; adaptive quadrature otherwise.  Returns
    +inf at s=0 for d >= 2 (integrable singularity at the origin).
    """
    d = _check_dim(d)
    if not lam > 0:
        raise ValueError(f"potential parameter must be positive, got {lam!r}")
    scalar = np.isscalar(s) or np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0):
        raise ValueError("radius must be nonnegative")
    root = math.sqrt(2.0 * lam)
    if d == 1:
        out = np.exp(-root * s) / root
    elif d == 3:
        with np.errstate(divide="ignore"):
            out = np.where(s > 0, np.exp(-root * s) / (2.0 * math.pi * np.maximum(s, 1e-300)), np.inf)
    else:
        out = np.empty_like(s)
        for i, si in enumerate(s):
            out[i] = np.inf if si == 0 else _potential_quad(lam, si, d)
    return float(out[0]) if scalar else out


def potential_density(lam, x, d=None):
    """Lambda-potential density at a point; +inf at the origin for d >= 2."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if d is None:
        d = x.size
    return potential_profile(lam, np.linalg.norm(x), d)


@lru_cache(maxsize=8)
def _vbar1_table(d):
    # log-log table of the unit-rate potential profile, for dimensions
    # without a closed form; covers the radii that matter (beyond 60 the
    # profile is below 1e-36)
    s = np.geomspace(1e-9, 60.0, 900)
    v = np.array([_potential_quad(1.0, si, d) for si in s])
    return np.log(s), np.log(v)


def potential_profile_fast(lam, s, d):
    """Vectorized potential profile via the scaling v_lam(s) = lam^{d/2-1} v_1(s sqrt(lam)).

    Closed forms in d=1 and d=3; a cached log-log interpolant of the
    unit-rate profile otherwise.  Radii at 0 map to +inf for d >= 2.
    """
    d = _check_dim(d)
    if not lam > 0:
        raise ValueError(f"potential parameter must be positive, got {lam!r}")
    s = np.asarray(s, dtype=float)
    if d in (1, 3):
        return potential_profile(lam, s, d)
    logs, logv = _vbar1_table(d)
    z = s * math.sqrt(lam)
    with np.errstate(divide="ignore"):
        lz = np.log(np.where(z > 0, z, np.nan))
    out = lam ** (d / 2.0 - 1.0) * np.exp(np.interp(lz, logs, logv))
    out = np.where(z == 0, np.inf, out)
    out = np.where(z > 60.0, 0.0, out)
    return out if out.ndim else float(out)


def potential_asymptote(r, d):
    """Small-radius comparison function r^{-d+1} * omega_d(r) for the potential.

    Only meaningful on 0 < r < 1, where the potential density is bounded
    above and below by constant multiples of this.
    """
    d = _check_dim(d)
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0) | (r >= 1)):
        raise ValueError("radius must lie in (0, 1)")
    out = r ** (1.0 - d) * omega_d(r, d)
    return out if out.ndim else float(out)


def gaussian_tail(nu, d):
    """P(||Z|| > nu) for a standard Gaussian vector Z in R^d (chi tail)."""
    d = _check_dim(d)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ValueError("radius must be nonnegative")
    out = special.gammaincc(d / 2.0, nu * nu / 2.0)
    return out if out.ndim else float(out)


def mills_asymptote(nu, d):
    """Large-radius Gaussian tail approximation 2 nu^{d-2} e^{-nu^2/2} / (2^{d/2} Gamma(d/2))."""
    d = _check_dim(d)
    nu = np.asarray(nu, dtype=float)
    out = 2.0 * nu ** (d - 2.0) * np.exp(-nu * nu / 2.0) / (2.0 ** (d / 2.0) * math.gamma(d / 2.0))
    return out if out.ndim else float(out)


def radial_profiles(s, param, d):
    """Evaluate the heat and potential radial profiles at radius s.

    Returns the pair (p_t(s), v_lam(s)) with t = lam = param.
    """
    return heat_profile(param, s, d), potential_profile(param, s, d)
