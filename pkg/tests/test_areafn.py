import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilharm import areafn
from nilharm.group import GroupDims, mu_mass, sphere_area, sphere_pairing, sphere_quads, typeh_heisenberg
from nilharm.specfun import laguerre_norm
from nilharm.spherical import SphericalParam, TypeHBessel, TypeHLaguerre

CONST = SphericalParam(0.0, (0.0,), ())


class TestRules:
    @pytest.mark.parametrize("v,z", [(2, 1), (3, 3), (4, 6), (4, 1)])
    def test_theta_rule_mass(self, v, z):
        # int_0^{pi/2} cos^a sin^b = B((a+1)/2, (b+1)/2) / 2
        th, w = areafn.theta_rule(v, z, 24)
        a, b = (v - 2) / 2, z - 1
        assert np.sum(w) == pytest.approx(0.5 * math.gamma((a + 1) / 2) * math.gamma((b + 1) / 2)
                                          / math.gamma((a + b + 2) / 2), rel=1e-10)

    def test_dirichlet_moments(self):
        al = [1.0, 2.0, 1.5]
        W, w = areafn.dirichlet_rule(al, 10)
        assert np.sum(w) == pytest.approx(1.0)
        np.testing.assert_allclose(W.sum(1), 1.0)
        np.testing.assert_allclose(w @ W, np.array(al) / sum(al), rtol=1e-12)
        # E[W_0 W_1] = a0 a1 / (A (A+1))
        A = sum(al)
        assert w @ (W[:, 0] * W[:, 1]) == pytest.approx(al[0] * al[1] / (A * (A + 1)), rel=1e-12)


class TestPairing:
    @pytest.mark.parametrize("v", [2, 3, 4])
    def test_constant(self, v):
        const = SphericalParam(0.0, (0.0,) * (v // 2), ())
        vals = areafn.mu_phi_pairing(const, np.array([0.0, 0.7, 3.0]), v)
        np.testing.assert_allclose(vals, mu_mass(v), rtol=1e-12)

    @pytest.mark.parametrize("v,param", [(2, SphericalParam(0.0, (1.3,), (2,))),
                                         (3, SphericalParam(0.9, (0.6,), (1,))),
                                         (4, SphericalParam(0.0, (1.1, 0.4), (1, 0)))])
    def test_s0_and_bound(self, v, param):
        s = np.array([0.0, 0.3, 1.0, 2.5, 6.0])
        vals = areafn.mu_phi_pairing(param, s, v)
        assert vals[0] == pytest.approx(mu_mass(v), rel=1e-12)
        assert np.all(np.abs(vals) <= mu_mass(v) * (1 + 1e-8))

    @pytest.mark.parametrize("lam,l", [(1.0, 0), (1.7, 3)])
    def test_v2_vs_sphere_quadrature(self, lam, l):
        dims = GroupDims(2)

        def phi(p):
            return np.cos(lam * p.a[..., 0]) * laguerre_norm(l, 0.0, lam * np.sum(p.x**2, -1) / 2)

        q = sphere_quads(2, 40, 32, 1)
        for s in (0.5, 1.5):
            ref = sphere_pairing(phi, s, dims, q)
            assert abs(areafn.mu_phi_pairing(SphericalParam(0.0, (lam,), (l,)), s, 2) - ref) < 1e-4

    def test_v3_vs_sphere_quadrature_bessel(self):
        r = 1.4

        def phi(p):
            x = r * np.linalg.norm(p.x, axis=-1)
            return np.sinc(x / np.pi)

        ref = sphere_pairing(phi, 1.2, GroupDims(3), sphere_quads(3, 24, 16, 8))
        assert abs(areafn.mu_phi_pairing(SphericalParam(r, (0.0,), ()), 1.2, 3) - ref) < 1e-4

    @given(st.floats(0.0, 4.0), st.floats(0.05, 3.0), st.integers(0, 4))
    @settings(max_examples=30, deadline=None)
    def test_property_bounded(self, s, lam, l):
        val = areafn.mu_phi_pairing(SphericalParam(0.0, (lam,), (l,)), s, 2)
        assert abs(val) <= mu_mass(2) * (1 + 1e-8)


class TestDerivative:
    def test_constant(self):
        d, err = areafn.mu_phi_deriv(CONST, np.array([0.5, 1.0]), 1, 3)
        np.testing.assert_allclose(d, 0.0, atol=1e-12)

    def test_bessel_chain_rule(self):
        # v = 3, Lambda* = 0: <mu_s, phi> = int sinc(r* s rho) over the sphere with
        # rho = |X| = sqrt(cos theta); differentiate the closed form in s
        r = 1.3
        s = np.array([0.4, 1.0, 2.2])
        th, w = areafn.theta_rule(3, 3, 200)
        rho = np.sqrt(np.cos(th))[None, :]
        t = r * s[:, None] * rho
        dj = (t * np.cos(t) - np.sin(t)) / t**2 * r * rho
        ref = (dj @ w) * sphere_area(3) ** 2
        d, err = areafn.mu_phi_deriv(SphericalParam(r, (0.0,), ()), s, 1, 3)
        np.testing.assert_allclose(d, ref, atol=1e-5)
        assert np.all(err < 1e-4)  # the estimate |R - D_{h/2}| is conservative

    def test_second_derivative_of_s_squared(self):
        d, _ = areafn.fd_derivative(lambda s: s**3, np.array([1.0, 2.0]), 2, 0.01)
        np.testing.assert_allclose(d, [6.0, 12.0], rtol=1e-10)
        d, _ = areafn.fd_derivative(lambda s: s**4, np.array([1.0]), 3, 0.01)
        assert d[0] == pytest.approx(24.0, rel=1e-8)

    def test_sign_changes(self):
        s = np.linspace(0.5, 12, 80)
        d, _ = areafn.mu_phi_deriv(SphericalParam(2.0, (0.0,), ()), s, 1, 3)
        assert np.sum(np.diff(np.sign(d.real)) != 0) >= 2

    def test_stencil_guard(self):
        with pytest.raises(ValueError):
            areafn.fd_derivative(np.sin, np.array([0.01]), 1, 0.02)
        with pytest.raises(ValueError):
            areafn.fd_derivative(np.sin, np.array([1.0]), 4, 0.01)


class TestAreaHat:
    def test_constant_zero(self):
        assert areafn.area_hat(CONST, 1, 4).value == 0.0

    def test_n42_finite(self):
        s = areafn.default_s_grid(200)
        for p in (SphericalParam(0.0, (1.0, 0.5), (0, 1)), SphericalParam(0.0, (2.0, 0.3), (1, 1))):
            a = areafn.area_hat(p, 1, 4, s)
            assert np.isfinite(a.value) and a.value > 0

    def test_phi_r_scale_invariance(self):
        h2 = typeh_heisenberg(2)
        s = areafn.default_s_grid(800, 1e-4, 200)
        vals = [areafn.typeh_area_hat(h2, TypeHBessel(r), 1, s).value for r in (0.5, 1.0, 2.0)]
        np.testing.assert_allclose(vals, vals[1], rtol=1e-3)

    def test_typeh_laguerre_finite(self):
        h2 = typeh_heisenberg(2)
        s = areafn.default_s_grid(200)
        for z in (0.5, 2.0):
            for l in (0, 2):
                a = areafn.typeh_area_hat(h2, TypeHLaguerre((z,), l), 1, s)
                assert np.isfinite(a.value) and a.value > 0

    def test_out_of_range_diverges(self):
        # j = v' on H^1 is outside 1..v'-1: the integral keeps growing with the s cut-off
        h1 = typeh_heisenberg(1)
        vals = []
        with pytest.warns(UserWarning):
            for hi in (50.0, 200.0, 800.0):
                vals.append(areafn.typeh_area_hat(h1, TypeHBessel(1.0), 1,
                                                  areafn.default_s_grid(600, 1e-3, hi)).value)
        assert vals[0] < vals[1] < vals[2]
        assert vals[2] > 1.2 * vals[0]

    def test_typeh_bessel_vs_pairing_fd(self):
        h2 = typeh_heisenberg(2)
        fam = TypeHBessel(1.5)
        s = np.array([0.5, 1.0, 3.0])
        an = areafn._typeh_bessel_deriv(h2, fam, s, 1)
        fd, _ = areafn.fd_derivative(lambda ss: areafn.typeh_pairing(h2, fam, ss), s, 1, 1e-3)
        np.testing.assert_allclose(an, fd, atol=1e-7)


class TestScan:
    def test_empty(self):
        rep = areafn.scan_uniform_bound([], 1, v=4)
        assert rep.values == [] and math.isnan(rep.max) and rep.argmax is None

    def test_requires_v(self):
        with pytest.raises(ValueError):
            areafn.scan_uniform_bound([CONST], 1)

    def test_report(self):
        h2 = typeh_heisenberg(2)
        grid = [TypeHBessel(1.0), TypeHLaguerre((1.0,), 0)]
        rep = areafn.scan_uniform_bound(grid, 1, areafn.default_s_grid(150), model=h2)
        assert len(rep.values) == 2 and all(v >= 0 for v in rep.values)
        assert rep.max == max(rep.values)
        lines = rep.to_csv().strip().splitlines()
        assert lines[0] == "param,S_hat_1,tail" and len(lines) == 3
