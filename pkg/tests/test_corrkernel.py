import math

import numpy as np
import pytest
from scipy import integrate, special

from ergoheat import corrkernel as ck
from ergoheat import kernels


@pytest.fixture(scope="module")
def bump():
    return ck.KernelSpec.compact_bump(1, radius=1.0)


@pytest.fixture(scope="module")
def power05():
    return ck.KernelSpec.power_law(1, alpha=0.5, beta=1.0)


@pytest.fixture(scope="module")
def gauss():
    return ck.KernelSpec.gaussian(1, width=1.0)


def gaussian_tail_l2(r, q=2.0, width=1.0):
    """Closed form ||h||_{L^q(B_r^c)} for h = exp(-x^2/(2 w^2)) in d=1."""
    inner = 2.0 * width * math.sqrt(math.pi / (2.0 * q)) * special.erfc(
        r * math.sqrt(q / 2.0) / width)
    return inner ** (1.0 / q)


class TestEvalH:
    def test_power_law_inner_exponent(self):
        spec = ck.KernelSpec.power_law(1, alpha=1.0, beta=2.0)
        assert ck.eval_h(spec, 0.25) == pytest.approx(4.0, rel=1e-12)

    def test_power_law_outer_exponent(self):
        spec = ck.KernelSpec.power_law(1, alpha=1.0, beta=2.0)
        assert ck.eval_h(spec, 4.0) == pytest.approx(0.125, rel=1e-12)

    def test_bump_outside_support(self, bump):
        assert ck.eval_h(bump, 2.0) == 0.0

    def test_singular_origin_sentinel(self, power05):
        assert ck.eval_h(power05, 0.0) == math.inf

    def test_sign_flip_annulus(self):
        spec = ck.KernelSpec.gaussian(1, width=1.0, sign_flips=(0.5, 1.5))
        assert ck.eval_h(spec, 0.3) > 0
        assert ck.eval_h(spec, 1.0) < 0
        assert ck.eval_h(spec, 2.0) > 0

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            ck.KernelSpec.power_law(1, alpha=-0.5, beta=1.0)
        with pytest.raises(ValueError):
            ck.KernelSpec.power_law(1, alpha=0.5, beta=0.0)
        with pytest.raises(ValueError):
            ck.KernelSpec.compact_bump(1, radius=-1.0)
        with pytest.raises(ValueError):
            ck.KernelSpec.tabulated_radial(1, grid=(1.0, 0.5), values=(1.0, 2.0))
        with pytest.raises(ValueError):
            ck.KernelSpec.tabulated_radial(1, grid=(0.5, 1.0), values=(1.0, math.nan))


class TestNorms:
    def test_power_law_ball_closed_form(self, power05):
        # closed-form antiderivative oracle vs the quadrature implementation
        d, al = 1, 0.5
        for p, r in [(1.2, 0.5), (1.1, 0.9), (1.3, 0.25)]:
            expo = d - p * (d + al) / 2.0
            oracle = (kernels.sphere_area(d) * r ** expo / expo) ** (1.0 / p)
            assert ck.norm_ball(power05, p, r) == pytest.approx(oracle, rel=1e-7)

    def test_power_law_ball_divergence_threshold(self, power05):
        # locally L^p iff p < 2d/(d+alpha) = 4/3
        assert ck.norm_ball(power05, 4.0 / 3.0, 0.5) == math.inf
        assert ck.norm_ball(power05, 1.5, 0.5) == math.inf
        assert np.isfinite(ck.norm_ball(power05, 1.3, 0.5))

    def test_bump_l2_ball(self, bump):
        assert ck.norm_ball(bump, 2, 2.0) == pytest.approx(math.sqrt(2.0), rel=1e-10)

    def test_complement_tail_threshold(self, power05):
        # converges iff q > 2d/(d+beta) = 1
        assert ck.norm_complement(power05, 1.0, 1.0) == math.inf
        assert np.isfinite(ck.norm_complement(power05, 1.05, 1.0))

    def test_bump_complement_vanishes(self, bump):
        assert ck.norm_complement(bump, 3.0, 1.0) == 0.0
        assert ck.norm_complement(bump, 2.0, 1.5) == 0.0

    def test_gaussian_full_l2_closed_form(self, gauss):
        oracle = gaussian_tail_l2(0.0)
        assert ck.norm_complement(gauss, 2.0, 0.0) == pytest.approx(oracle, rel=1e-9)
        assert ck.norm_ball(gauss, 2.0, 30.0) == pytest.approx(oracle, rel=1e-9)

    def test_gaussian_tail_closed_form(self, gauss):
        for r in (0.5, 1.0, 2.0):
            assert ck.norm_complement(gauss, 2.0, r) == pytest.approx(
                gaussian_tail_l2(r), rel=1e-8)

    def test_domain_errors(self, gauss):
        with pytest.raises(ValueError):
            ck.norm_ball(gauss, 2.0, 0.0)
        with pytest.raises(ValueError):
            ck.norm_complement(gauss, 0.5, 1.0)


class TestConvolution:
    def test_bump_triangle(self, bump):
        # exact convolution of the unit indicator: a triangle of height 2
        for x, want in [(0.0, 2.0), (0.5, 1.5), (1.0, 1.0), (1.9, 0.1), (2.0, 0.0), (3.0, 0.0)]:
            f, fa = ck.f_convolution(bump, x)
            assert f == pytest.approx(want, abs=1e-10)
            assert fa == pytest.approx(want, abs=1e-10)

    def test_even_symmetry(self, gauss):
        spec = ck.KernelSpec.gaussian(1, width=0.7, sign_flips=(0.9,))
        for x in (0.3, 1.1, 2.4):
            fp, _ = ck.f_convolution(spec, x)
            fm, _ = ck.f_convolution(spec, -x)
            assert fp == pytest.approx(fm, abs=1e-9)

    def test_abs_dominates_and_matches_when_nonnegative(self, bump, power05):
        for spec in (bump, power05):
            for x in (0.3, 0.8, 1.7):
                f, fa = ck.f_convolution(spec, x)
                assert fa >= abs(f) - 1e-12
                # nonnegative radial nonincreasing h: equality
                assert fa == pytest.approx(f, rel=1e-9)

    def test_signed_kernel_strict_inequality(self):
        spec = ck.KernelSpec.gaussian(1, width=1.0, sign_flips=(0.8,))
        f, fa = ck.f_convolution(spec, 1.2)
        assert fa > abs(f)

    def test_gaussian_closed_form(self, gauss):
        # self-convolution of exp(-x^2/2) is sqrt(pi) exp(-x^2/4)
        for x in (0.0, 0.7, 1.5, 3.0):
            f, _ = ck.f_convolution(gauss, x)
            assert f == pytest.approx(math.sqrt(math.pi) * math.exp(-x * x / 4.0), rel=1e-8)

    def test_power_law_against_mpmath_grade_quadrature(self, power05):
        # frozen from an mpmath (30-digit tanh-sinh) evaluation
        f, fa = ck.f_convolution(power05, 0.8)
        assert f == pytest.approx(17.9361216471350, rel=1e-6)
        assert fa == pytest.approx(f, rel=1e-9)

    def test_f_diverges_at_origin_for_power_law(self, power05):
        f0, fa0 = ck.f_convolution(power05, 0.0)
        assert f0 == math.inf and fa0 == math.inf

    def test_correlation_table_export(self, bump, tmp_path):
        table = ck.correlation_table(bump, radii=[0.5, 1.0, 1.5])
        assert np.all(table.f_abs_values >= np.abs(table.f_values) - 1e-12)
        out = tmp_path / "table.csv"
        table.to_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "radius,f,f_abs,error"
        assert len(lines) == 4


class TestFbar:
    def test_bump_support_arithmetic(self, bump):
        assert ck.fbar(bump, 2.0) == 0.0
        assert ck.fbar(bump, 2.5) == 0.0

    def test_bump_envelope_value(self, bump):
        assert ck.fbar(bump, 1.0) == pytest.approx(1.0, rel=1e-6)
        assert ck.fbar(bump, 0.5) == pytest.approx(1.5, rel=1e-6)

    def test_nonincreasing_on_dyadic_grid(self, bump, power05):
        for spec in (bump, power05):
            vals = [ck.fbar(spec, 0.1 * 2 ** k) for k in range(7)]
            assert np.all(np.diff(vals) <= 1e-12)

    def test_dominated_by_tail_bound(self, power05):
        p = ck.default_p(power05)
        for r in (0.2, 0.5, 1.0, 2.0):
            assert ck.fbar(power05, 2.0 * r) <= ck.pd_tail_bound(power05, p, r) * (1 + 1e-6)


class TestPdTailBound:
    def test_bump_vanishes(self, bump):
        assert ck.pd_tail_bound(bump, 2.0, 1.0) == 0.0

    def test_gaussian_moments(self, gauss):
        # all three factors have erfc closed forms
        r, p = 1.0, 2.0
        nb = math.sqrt(2.0 * math.sqrt(math.pi / 4.0) * (1.0 - special.erfc(1.0)))
        nc = gaussian_tail_l2(r)
        oracle = 2.0 * nb * nc + nc * nc
        assert ck.pd_tail_bound(gauss, p, r) == pytest.approx(oracle, rel=1e-8)

    def test_dominates_direct_sup(self, power05):
        p = ck.default_p(power05)
        for r in (0.5, 1.0, 2.0):
            bound = ck.pd_tail_bound(power05, p, r)
            direct = max(ck.f_convolution(power05, x)[1]
                         for x in np.linspace(2 * r, 2 * r + 6, 15))
            assert bound >= direct


class TestMembership:
    def test_l2_kernel_in_omega_class(self, gauss, bump):
        for spec in (gauss, bump):
            rep = ck.check_membership(spec, 2.0)
            assert rep.g_p and rep.f_p

    def test_power_law_good_exponent(self, power05):
        rep = ck.check_membership(power05, ck.default_p(power05))
        assert rep.g_p and rep.f_p
        assert np.isfinite(rep.g_integral)

    def test_flags_coincide_in_d1(self, bump, power05):
        for spec in (bump, power05):
            rep = ck.check_membership(spec, ck.default_p(spec))
            assert rep.f_p == rep.g_p

    def test_not_locally_lp(self, power05):
        rep = ck.check_membership(power05, 1.5)  # >= 2d/(d+alpha) = 4/3
        assert not rep.f_p and not rep.g_p
        assert "locally" in rep.reason

    def test_g_implies_f(self):
        # d=3 with a moderately singular root: omega class membership must
        # imply the plain-weight class
        spec = ck.KernelSpec.power_law(3, alpha=1.0, beta=2.0)
        rep = ck.check_membership(spec, ck.default_p(spec))
        assert (not rep.g_p) or rep.f_p


class TestDalang:
    def test_bump_closed_form(self, bump):
        # elementary antiderivative: 2 - (1 - e^{-2 sqrt2})/sqrt2
        oracle = 2.0 - (1.0 - math.exp(-2.0 * math.sqrt(2.0))) / math.sqrt(2.0)
        assert ck.dalang_integral(bump, 1.0, fast=False) == pytest.approx(oracle, rel=1e-8)
        assert ck.dalang_integral(bump, 1.0) == pytest.approx(oracle, rel=1e-4)

    def test_decreasing_in_lambda(self, power05):
        vals = [ck.dalang_integral(power05, lam) for lam in (1.0, 2.0, 4.0)]
        assert vals[0] > vals[1] > vals[2]

    def test_divergence_detected_for_large_alpha(self):
        spec = ck.KernelSpec.power_law(3, alpha=2.5, beta=1.0)
        with pytest.raises(ck.DalangDivergence):
            ck.dalang_integral(spec, 1.0)

    def test_finite_for_omega_members(self, bump, gauss, power05):
        for spec in (bump, gauss, power05):
            assert np.isfinite(ck.dalang_integral(spec, 1.0))

    def test_truncation_convergence(self, gauss):
        base = ck.dalang_integral(gauss, 1.0)
        diffs = [abs(ck.dalang_integral(ck.truncate(gauss, r), 1.0) - base)
                 for r in (1.0, 2.0, 4.0)]
        assert diffs[2] < diffs[0]
        assert diffs[2] < 1e-3 * base


class TestLambdaH:
    def test_monotone_in_delta(self, bump):
        assert ck.lambda_h(bump, 0.5) >= ck.lambda_h(bump, 1.0)

    def test_infimum_bracketing(self, bump):
        delta = 0.8
        lam = ck.lambda_h(bump, delta)
        assert ck.dalang_integral(bump, lam * (1 + 1e-4)) < delta
        assert ck.dalang_integral(bump, lam * (1 - 1e-4)) >= delta

    def test_doubling_delta_lowers_threshold(self, bump):
        base = ck.dalang_integral(bump, 1.0)
        assert ck.lambda_h(bump, 2.0 * base) < 1.0

    def test_domain_error(self, bump):
        with pytest.raises(ValueError):
            ck.lambda_h(bump, 0.0)


class TestBdgConstant:
    def test_exact_and_bound_values(self):
        assert ck.bdg_constant(2) == 1.0
        assert ck.bdg_constant(4) == pytest.approx(4.0, rel=1e-15)
        assert ck.bdg_constant(9) == pytest.approx(6.0, rel=1e-15)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            ck.bdg_constant(1.5)


class TestKofH:
    def test_bump_value(self, bump):
        # 1 + integral of the triangle over [-1,1] + envelope at 1 = 1 + 3 + 1
        assert ck.K_of_h(bump) == pytest.approx(5.0, rel=1e-6)

    def test_at_least_one(self, gauss, power05):
        for spec in (gauss, power05):
            assert ck.K_of_h(spec) >= 1.0

    def test_truncation_monotone(self, gauss):
        full = ck.K_of_h(gauss)
        assert ck.K_of_h(ck.truncate(gauss, 1.0)) <= full + 1e-9


class TestTruncate:
    def test_eval_zero_beyond(self, gauss):
        tr = ck.truncate(gauss, 1.5)
        assert ck.eval_h(tr, 2.0) == 0.0
        assert ck.eval_h(tr, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_complement_zero_at_cut(self, gauss):
        tr = ck.truncate(gauss, 1.5)
        assert ck.norm_complement(tr, 2.0, 1.5) == 0.0

    def test_removed_mass_is_tail_norm(self, gauss):
        # ||h - h_r||_L2 = ||h||_{L2(B_r^c)} by disjoint supports
        r = 1.25
        tail = ck.norm_complement(gauss, 2.0, r)
        grid = np.linspace(-8, 8, 400001)
        full = ck.h_profile(gauss, np.abs(grid))
        trunc = ck.h_profile(ck.truncate(gauss, r), np.abs(grid))
        diff_norm = math.sqrt(np.trapezoid((full - trunc) ** 2, grid))
        assert diff_norm == pytest.approx(tail, rel=1e-4)

    def test_membership_preserved(self, power05):
        tr = ck.truncate(power05, 2.0)
        rep = ck.check_membership(tr, ck.default_p(power05))
        assert rep.g_p
