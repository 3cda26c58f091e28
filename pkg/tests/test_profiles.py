import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plgrowth.errors import BadEllipticity, NonfiniteIntegrand, ParamError, UnknownFamily
from plgrowth.profiles import (
    Ellipticity,
    Geometry,
    GrowthProfile,
    Osgood,
    PointEval,
    osgood_check,
    preset,
    pucci_minus,
    pucci_plus,
    structure_bound,
)


class TestGrowthProfile:
    @pytest.mark.parametrize("phi", [
        GrowthProfile.zero(),
        GrowthProfile.power(1.0),
        GrowthProfile.power(2.5, C=lambda t: 1.0 / (1.0 + t)),
        GrowthProfile.logpos(C=2.0),
        GrowthProfile.logneg(),
    ])
    def test_catalogue_invariants(self, phi):
        checks = phi.validate()
        assert all(checks.values()), checks

    def test_increasing_coefficient_is_flagged(self):
        phi = GrowthProfile.power(2.0, C=lambda t: 1.0 + t)
        assert not phi.validate()["nonincreasing_in_t"]

    def test_signs(self):
        assert GrowthProfile.logneg().sign == "nonpositive"
        assert GrowthProfile.logpos().sign == "nonnegative"
        assert GrowthProfile.logneg()(0.0, math.e) == pytest.approx(-math.e)

    def test_power_rejects_k_below_one(self):
        with pytest.raises(ParamError):
            GrowthProfile.power(0.5)

    def test_custom_has_no_closed_form(self):
        assert not GrowthProfile.custom(lambda t, s: s).has_closed_form


class TestPucci:
    def test_zero_matrix(self):
        assert pucci_minus([0.0, 0.0], 1.0, 2.0) == 0.0

    def test_mixed_signs(self):
        assert pucci_minus([1.0, -1.0], 1.0, 2.0) == -1.0

    def test_single_eigenvalue(self):
        assert pucci_minus([3.0], 0.5, 4.0) == -12.0

    def test_plus_is_dual(self):
        e = np.array([2.0, -3.0, 0.5])
        assert pucci_plus(e, 0.5, 2.0) == pytest.approx(-pucci_minus(-e, 0.5, 2.0))

    @pytest.mark.parametrize("lam,Lam", [(0.0, 1.0), (2.0, 1.0), (-1.0, 1.0)])
    def test_bad_ellipticity(self, lam, Lam):
        with pytest.raises(BadEllipticity):
            pucci_minus([1.0], lam, Lam)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=6),
           st.floats(0.1, 1.0), st.floats(1.0, 5.0),
           st.integers(0, 5), st.floats(0.0, 10.0))
    def test_degenerate_ellipticity(self, eig, lam, Lam, i, bump):
        e = np.array(eig)
        up = e.copy()
        up[i % e.size] += bump
        assert pucci_minus(up, lam, Lam) <= pucci_minus(e, lam, Lam) + 1e-12


class TestStructureBound:
    def test_zero_profile(self):
        pt = PointEval(np.array([0.0, 1.0]), 0.0, np.array([3.0, 4.0]), 2.0, 3.0)
        assert structure_bound(GrowthProfile.zero(), Ellipticity(), pt) == -1.0

    def test_quadratic_gradient_term(self):
        pt = PointEval(np.array([0.0, 1.0]), 0.0, np.array([0.0, 2.0]), 0.0, 0.0)
        assert structure_bound(GrowthProfile.power(2.0), Ellipticity(), pt) == pytest.approx(4.0)

    def test_log_profile_with_variable_ellipticity(self):
        ell = Ellipticity(lambda t: 1.0, lambda t: 2.0)
        pt = PointEval(np.array([0.0, 1.0]), 0.0, np.array([0.0, math.e]), 1.0, 1.0)
        # e|log e| + 2*1 - 1*1, each term evaluated separately
        expected = math.e * abs(math.log(math.e)) + 2.0 * 1.0 - 1.0 * 1.0
        assert structure_bound(GrowthProfile.logpos(), ell, pt) == pytest.approx(expected)

    def test_rejects_negative_traces(self):
        with pytest.raises(ParamError):
            PointEval(np.zeros(2), 0.0, np.zeros(2), -1.0, 0.0)

    @given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 5.0))
    def test_monotone_in_traces(self, tp, tm, d):
        phi, ell = GrowthProfile.power(2.0), Ellipticity(0.5, 2.0)
        x, g = np.array([0.3, 0.7]), np.array([1.0, 1.0])
        base = structure_bound(phi, ell, PointEval(x, 0.0, g, tp, tm))
        assert structure_bound(phi, ell, PointEval(x, 0.0, g, tp + d, tm)) >= base - 1e-12
        assert structure_bound(phi, ell, PointEval(x, 0.0, g, tp, tm + d)) <= base + 1e-12

    def test_from_hessian_split(self):
        pt = PointEval.from_hessian(np.ones(2), 0.0, np.ones(2), np.diag([2.0, -3.0]))
        assert (pt.hess_plus_trace, pt.hess_minus_trace) == (2.0, 3.0)


class TestOsgood:
    def test_linear_holds(self):
        assert osgood_check(GrowthProfile.custom(lambda t, s: s), 0.0, 1.0) is Osgood.HOLDS

    def test_sqrt_fails(self):
        assert osgood_check(GrowthProfile.custom(lambda t, s: math.sqrt(s)), 0.0, 1.0) is Osgood.FAILS

    def test_s_log_s_holds(self):
        assert osgood_check(GrowthProfile.logpos(), 0.0, 0.5) is Osgood.HOLDS

    @pytest.mark.parametrize("k", [1.0, 1.5, 2.0, 3.0])
    def test_power_holds(self, k):
        assert osgood_check(GrowthProfile.power(k), 1.0, 1.0) is Osgood.HOLDS

    @pytest.mark.parametrize("a", [0.3, 0.5, 0.9])
    def test_sublinear_power_fails(self, a):
        assert osgood_check(GrowthProfile.custom(lambda t, s: s ** a), 0.0, 1.0) is Osgood.FAILS

    def test_nonpositive_profile_uses_magnitude(self):
        assert osgood_check(GrowthProfile.logneg(), 0.0, 0.5) is Osgood.HOLDS

    def test_vanishing_integrand(self):
        phi = GrowthProfile.custom(lambda t, s: max(s - 0.25, 0.0) * s)
        with pytest.raises(NonfiniteIntegrand):
            osgood_check(phi, 0.0, 1.0)


class TestEllipticityGeometry:
    def test_validate(self):
        ell = Ellipticity(lambda t: 1.0 / (1.0 + t), lambda t: 1.0 + t)
        assert all(ell.validate().values())

    def test_ratio_and_A(self):
        ell = Ellipticity(0.5, 2.0)
        assert ell.ratio()(3.0) == 4.0
        assert ell.A(1.0)(3.0) == 2.0

    def test_geometry_K(self):
        g = Geometry(3, lambda R: 2.0 * R)
        assert g.K(1.5) == pytest.approx(1.0)
        assert Geometry(3, lambda R: R, kappa=2.5).K(5.0) == pytest.approx(0.5)

    @given(st.floats(0.1, 1e3), st.floats(0.0, 1e3))
    def test_K_nonincreasing(self, R, dR):
        g = Geometry(2, lambda R: R + R ** 2)
        assert g.K(R + dR) <= g.K(R) * (1 + 1e-12)

    @pytest.mark.parametrize("n", [0, -1, 1.5])
    def test_bad_dimension(self, n):
        with pytest.raises(ParamError):
            Geometry(n, 1.0)


def test_presets():
    phi, ell = preset("pucci-sublinear")
    assert (phi.family, phi.k) == ("power", 2.0)
    assert preset("px-laplace")[0].family == "logpos"
    with pytest.raises(UnknownFamily):
        preset("nope")
