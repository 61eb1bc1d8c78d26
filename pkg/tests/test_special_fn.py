import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import normal_cdf_quadrature, reg_gamma_series
from wrglab.errors import DomainError, NonConvergence
from wrglab.special_fn import (
    gamma_pdf,
    integrate,
    lambert_w,
    normal_cdf,
    normal_interval,
    normal_sf,
    reg_gamma_cdf,
    reg_gamma_sf,
)


class TestLambertW:
    def test_branch_point_both_branches(self):
        assert lambert_w(-1 / math.e, 0) == -1.0
        assert lambert_w(-1 / math.e, -1) == -1.0

    def test_zero(self):
        assert lambert_w(0.0) == 0.0

    def test_lower_branch_residual(self):
        y = lambert_w(-0.1, -1)
        assert y < -1
        assert abs(y * math.exp(y) + 0.1) < 1e-13

    @pytest.mark.parametrize("branch", ["principal", "negative", 0, -1])
    def test_branch_tags(self, branch):
        y = lambert_w(-0.2, branch)
        assert abs(y * math.exp(y) + 0.2) < 1e-15

    def test_round_trip_grids(self):
        for y in np.linspace(-30, -1, 200):
            assert abs(lambert_w(y * math.exp(y), -1) - y) < 1e-12
        for y in np.linspace(-1, 20, 200):
            assert abs(lambert_w(y * math.exp(y), 0) - y) < 1e-12

    def test_against_mpmath(self):
        for x in [-0.36787944, -0.3, -0.1, -1e-5, 1e-8, 0.5, 3.0, 1e3, 1e100]:
            assert lambert_w(x) == pytest.approx(float(mpmath.lambertw(x, 0).real), rel=1e-13)
            if x < 0:
                assert lambert_w(x, -1) == pytest.approx(float(mpmath.lambertw(x, -1).real), rel=1e-13)

    def test_series_region_near_branch_point(self):
        for dx in [1e-16, 1e-12, 1e-9, 5e-7]:
            x = -1 / math.e + dx
            for k in (0, -1):
                ref = float(mpmath.lambertw(mpmath.mpf(-1) / mpmath.e + dx, k).real)
                assert abs(lambert_w(x, k) - ref) < 1e-7 * max(1.0, math.sqrt(dx) * 1e7)

    @pytest.mark.parametrize("x,branch", [(-0.5, 0), (-0.5, -1), (0.1, -1), (0.0, -1), (math.nan, 0)])
    def test_domain_errors(self, x, branch):
        with pytest.raises(DomainError):
            lambert_w(x, branch)

    def test_unknown_branch(self):
        with pytest.raises(DomainError):
            lambert_w(0.1, 2)

    @given(st.floats(min_value=-1 / math.e + 1e-12, max_value=1e6))
    def test_principal_ordering_and_residual(self, x):
        y = lambert_w(x, 0)
        assert y >= -1
        assert abs(y * math.exp(y) - x) <= 1e-12 * max(1.0, abs(x))

    @given(st.floats(min_value=-1 / math.e + 1e-12, max_value=-1e-300))
    def test_negative_ordering(self, x):
        assert lambert_w(x, -1) <= -1


class TestRegGamma:
    def test_exponential_case(self):
        for x in [0.0, 0.1, 1.0, 5.0, 30.0]:
            assert reg_gamma_cdf(1, x) == pytest.approx(-math.expm1(-x), abs=1e-15)

    def test_zero(self):
        assert reg_gamma_cdf(3.5, 0.0) == 0.0

    def test_five_five_series_oracle(self):
        assert abs(reg_gamma_cdf(5, 5) - reg_gamma_series(5, 5, terms=200)) < 1e-13

    def test_grid_against_series_oracle(self):
        shapes = np.geomspace(0.3, 300, 20)
        errs = []
        for a in shapes:
            for x in np.linspace(0.01, 2.5, 10) * a + 0.01:
                errs.append(abs(reg_gamma_cdf(a, x) - reg_gamma_series(a, x, terms=4000)))
        assert len(errs) == 200
        assert max(errs) < 1e-12

    def test_sf_complements(self):
        for a, x in [(0.5, 0.2), (10, 12), (200, 180), (50, 90)]:
            assert reg_gamma_cdf(a, x) + reg_gamma_sf(a, x) == pytest.approx(1.0, abs=1e-14)
            assert reg_gamma_sf(a, x) == pytest.approx(float(mpmath.gammainc(a, x, mpmath.inf, regularized=True)),
                                                       rel=1e-11, abs=1e-300)

    def test_upper_quantile(self):
        for a in [3, 5, 50, 500, 5000]:
            assert reg_gamma_cdf(a, a + 10 * math.sqrt(a)) > 1 - 1e-6

    def test_upper_quantile_small_shape_is_heavier(self):
        # the ten-sd bound does not hold below shape 3: the exponential tail is too heavy
        for a in [0.5, 1, 2]:
            x = a + 10 * math.sqrt(a)
            ref = float(mpmath.gammainc(a, x, mpmath.inf, regularized=True))
            assert ref > 1e-6
            assert reg_gamma_sf(a, x) == pytest.approx(ref, rel=1e-12)

    @given(st.floats(0.1, 400), st.floats(0, 800), st.floats(0, 50))
    def test_monotone(self, a, x, dx):
        assert reg_gamma_cdf(a, x) <= reg_gamma_cdf(a, x + dx) + 1e-15

    def test_invalid_shape(self):
        with pytest.raises(DomainError):
            reg_gamma_cdf(0.0, 1.0)

    def test_pdf(self):
        assert gamma_pdf(3, 2.0) == pytest.approx(2.0**2 * math.exp(-2.0) / 2.0, rel=1e-14)


class TestNormal:
    def test_values(self):
        assert normal_cdf(0.0) == 0.5
        assert normal_cdf(math.inf) == 1.0
        assert normal_cdf(-math.inf) == 0.0
        assert abs(normal_cdf(1.0) - normal_cdf_quadrature(1.0)) < 1e-15

    @given(st.floats(-40, 40))
    def test_symmetry(self, x):
        assert abs(normal_cdf(x) + normal_cdf(-x) - 1.0) < 1e-14

    def test_symmetry_grid(self):
        x = np.linspace(-10, 10, 2001)
        assert np.max(np.abs(normal_cdf(x) + normal_cdf(-x) - 1.0)) < 1e-14

    def test_sf_and_interval(self):
        assert normal_sf(1.3) == pytest.approx(1 - normal_cdf(1.3), abs=1e-16)
        assert normal_interval(-math.inf, math.inf) == 1.0
        assert normal_interval(-1, 1) == pytest.approx(0.6826894921370859, abs=1e-15)
        assert normal_interval(0, math.inf, shift=-1.0) == pytest.approx(normal_sf(1.0), abs=1e-16)


class TestIntegrate:
    def test_constant_and_zero(self):
        assert integrate(lambda x: 1.0, 0, 1) == pytest.approx(1.0, rel=1e-14)
        assert integrate(lambda x: 0.0, 0, 1) == 0.0

    def test_beta_function(self):
        assert integrate(lambda x: x * (1 - x) ** 2, 0, 1) == pytest.approx(1 / 12, rel=1e-12)

    def test_endpoint_singularity(self):
        val = integrate(lambda x: x**-0.5, 0, 1, singular="lo")
        assert val == pytest.approx(2.0, rel=1e-10)

    def test_breakpoints_and_reversed(self):
        f = lambda x: abs(x - 0.3)  # noqa: E731
        assert integrate(f, 0, 1, breakpoints=[0.3]) == pytest.approx(0.5 * (0.09 + 0.49), rel=1e-13)
        assert integrate(f, 1, 0, breakpoints=[0.3]) == pytest.approx(-0.29, rel=1e-13)

    def test_nonconvergence(self):
        with pytest.raises(NonConvergence):
            integrate(lambda x: math.sin(1 / x) / x, 1e-9, 1, rel_tol=1e-14, max_intervals=20)

    def test_infinite_limits_rejected(self):
        with pytest.raises(DomainError):
            integrate(lambda x: 1.0, 0, math.inf)
