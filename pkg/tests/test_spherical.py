import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from nilharm import spherical as sph
from nilharm.group import GroupPoint, identity, k_action, typeh_heisenberg
from nilharm.matpolar import haar_quadrature
from nilharm.specfun import laguerre_norm
from nilharm.spherical import SphericalParam


@pytest.fixture(scope="module")
def kq2():
    return haar_quadrature(2, "O", order=16)


@pytest.fixture(scope="module")
def kq3():
    return haar_quadrature(3, "O", order=8)


def rand_points(rng, v, n=None, scale=0.7):
    shape = () if n is None else (n,)
    return GroupPoint(scale * rng.normal(size=shape + (v,)), scale * rng.normal(size=shape + (v * (v - 1) // 2,)))


class TestParam:
    def test_derived(self):
        p = SphericalParam(0.0, (2.0, 2.0, 1.0, 0.0), (3, 1))
        assert (p.v0, p.v1, p.m, p.distinct) == (3, 2, (2, 1), (2.0, 1.0))
        assert p.block_ranges() == [[0, 1, 2, 3], [4, 5]]

    def test_invariants(self):
        with pytest.raises(ValueError):
            SphericalParam(0.0, (1.0, 2.0), (0, 0))
        with pytest.raises(ValueError):
            SphericalParam(0.0, (1.0,), ())
        with pytest.raises(ValueError):
            SphericalParam(1.0, (1.0,), (0,)).validate(2)
        with pytest.raises(ValueError):
            SphericalParam(0.0, (1.0,), (0,), epsilon=2)
        SphericalParam(1.0, (1.0,), (0,)).validate(3)

    def test_json(self):
        p = SphericalParam(0.5, (1.5, 0.5), (2, 0), -1)
        assert json.loads(p.to_json()) == {"r": 0.5, "lambda": [1.5, 0.5], "l": [2, 0], "eps": -1}
        assert SphericalParam.from_json(p.to_json()) == p


class TestTheta:
    def test_identity(self):
        p = SphericalParam(0.7, (1.3, 0.4), (2, 1))
        assert sph.theta_eval(p, identity(5)) == pytest.approx(1.0)

    def test_v2_formula(self):
        rng = np.random.default_rng(0)
        pts = rand_points(rng, 2, 30)
        p = SphericalParam(0.0, (1.7,), (3,))
        ref = np.exp(1j * 1.7 * pts.a[:, 0]) * laguerre_norm(3, 0.0, 1.7 * np.sum(pts.x**2, 1) / 2)
        np.testing.assert_allclose(sph.theta_eval(p, pts), ref, atol=1e-14)

    def test_bounded(self):
        rng = np.random.default_rng(1)
        pts = rand_points(rng, 5, 500, 3.0)
        p = SphericalParam(1.1, (2.0, 0.3), (4, 0))
        assert np.max(np.abs(sph.theta_eval(p, pts))) <= 1 + 1e-12


class TestPhi:
    def test_identity(self, kq2, kq3):
        assert sph.phi_eval(SphericalParam(0.0, (1.0,), (2,)), identity(2), kq2) == pytest.approx(1.0, abs=1e-14)
        assert sph.phi_eval(SphericalParam(0.5, (1.0,), (1,)), identity(3), kq3) == pytest.approx(1.0, abs=1e-14)

    def test_v2_closed_form(self, kq2):
        rng = np.random.default_rng(2)
        pts = rand_points(rng, 2, 50, 1.5)
        for lam, l in [(0.5, 0), (1.7, 3), (4.0, 8)]:
            ref = np.cos(lam * pts.a[:, 0]) * laguerre_norm(l, 0.0, lam * np.sum(pts.x**2, 1) / 2)
            np.testing.assert_allclose(sph.phi_eval(SphericalParam(0.0, (lam,), (l,)), pts, kq2), ref, atol=1e-8)

    def test_bounded_and_radial(self, kq3):
        rng = np.random.default_rng(3)
        p = SphericalParam(0.8, (1.2,), (2,))
        pts = rand_points(rng, 3, 100, 1.0)
        vals = sph.phi_eval(p, pts, kq3)
        assert np.max(np.abs(vals)) <= 1 + 1e-6
        k = ortho_group.rvs(3, random_state=4)
        np.testing.assert_allclose(sph.phi_eval(p, k_action(k, pts), kq3), vals, atol=1e-3)  # quadrature-limited

    def test_group_tag(self, kq3):
        with pytest.raises(ValueError):
            sph.phi_eval(SphericalParam(0.0, (1.0,), (0,), 1), identity(3), kq3)
        with pytest.raises(ValueError):
            sph.phi_eval(SphericalParam(0.0, (1.0,), (0,)), identity(3))

    def test_bessel(self):
        rng = np.random.default_rng(5)
        pts = rand_points(rng, 3, 40)
        r = np.linalg.norm(pts.x, axis=1)
        assert np.all(sph.phi_bessel(0.0, pts) == 1)
        np.testing.assert_allclose(sph.phi_bessel(1.3, pts), np.sin(1.3 * r) / (1.3 * r), atol=1e-12)
        # orbit average of the character e^{i r <e_v, k x>}
        kq = haar_quadrature(3, "O", order=24)
        x = pts.x[0]
        avg = kq.integrate(np.exp(1j * 1.3 * np.einsum("nij,j->ni", kq.nodes, x)[:, 2]))
        assert avg == pytest.approx(sph.phi_bessel(1.3, pts[0]), abs=1e-5)
        # phi_eval routes Lambda* = 0 to the closed form
        assert sph.phi_eval(SphericalParam(1.3, (0.0,), ()), pts[0]) == pytest.approx(sph.phi_bessel(1.3, pts[0]))


class TestEigen:
    def test_values(self):
        assert sph.sublaplacian_eigenvalue(SphericalParam(1.5, (0.0,), ())) == pytest.approx(2.25)
        assert sph.center_laplacian_eigenvalue(SphericalParam(1.5, (0.0,), ())) == 0
        assert sph.sublaplacian_eigenvalue(SphericalParam(0.0, (2.0,), (3,))) == 14
        assert sph.center_laplacian_eigenvalue(SphericalParam(0.0, (2.0, 1.0), (0, 0))) == 5
        assert sph.dc0_eigenvalue(SphericalParam(0.0, (2.0, 1.0), (0, 0)), 4) == 4
        assert sph.dc0_eigenvalue(SphericalParam(0.3, (2.0, 1.0), (0, 0)), 5) == 0

    def test_fd_residuals_v2(self, kq2):
        p = SphericalParam(0.0, (1.3,), (2,))
        pt = GroupPoint([0.4, -0.6], [0.3])
        assert sph.sublaplacian_fd_residual(p, pt, kq2) < 1e-5
        assert sph.center_laplacian_fd_residual(p, pt, kq2) < 1e-5

    def test_fd_residuals_bessel_and_constant(self):
        pt = GroupPoint([0.4, -0.6, 0.2], [0.3, 0.1, -0.2])
        assert sph.sublaplacian_fd_residual(SphericalParam(1.2, (0.0,), ()), pt) < 1e-4
        assert sph.sublaplacian_fd_residual(SphericalParam(0.0, (0.0,), ()), pt) == 0.0

    def test_fd_residual_v3(self, kq3):
        p = SphericalParam(0.6, (1.1,), (1,))
        pt = GroupPoint([0.4, -0.6, 0.2], [0.3, 0.1, -0.2])
        E = sph.sublaplacian_eigenvalue(p)
        assert sph.sublaplacian_fd_residual(p, pt, kq3) < 1e-4 * (1 + E)


class TestFunctionalEquation:
    def test_trivial(self, kq2):
        p = SphericalParam(0.0, (1.0,), (1,))
        assert sph.functional_equation_residual(p, GroupPoint([0.3, 0.1], [0.2]), identity(2), kq2) < 1e-15

    def test_v2(self, kq2):
        rng = np.random.default_rng(6)
        p = SphericalParam(0.0, (1.4,), (2,))
        for _ in range(3):
            p1, p2 = rand_points(rng, 2), rand_points(rng, 2)
            assert sph.functional_equation_residual(p, p1, p2, kq2) < 1e-6

    def test_v3_so(self):
        kq = haar_quadrature(3, "SO", order=6)
        p = SphericalParam(0.5, (1.0,), (0,), 1)
        p1 = GroupPoint([0.3, -0.2, 0.4], [0.2, -0.1, 0.3])
        p2 = GroupPoint([-0.1, 0.5, 0.2], [0.1, 0.3, -0.2])
        assert sph.functional_equation_residual(p, p1, p2, kq) < 1e-3


class TestHeisenberg:
    def test_values(self):
        hp = sph.HeisenbergParam((1, 2), lam=1.5, l=(1, 2))
        assert sph.heisenberg_spherical(hp, np.zeros(3), 0.0) == pytest.approx(1.0)
        hb = sph.HeisenbergParam((2,), mu=(0.0,))
        z = np.array([1 + 2j, -0.5j])
        assert sph.heisenberg_spherical(hb, z, 3.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("hp", [sph.HeisenbergParam((1, 2), lam=1.5, l=(1, 2)),
                                    sph.HeisenbergParam((2,), lam=-0.7, l=(3,)),
                                    sph.HeisenbergParam((1, 1), mu=(0.8, 1.9))])
    def test_eigen(self, hp):
        z = np.array([0.3 - 0.2j, 0.5 + 0.1j, -0.4j])[: hp.v0]
        assert sph.heisenberg_sublaplacian_residual(hp, z, 0.4) < 1e-4 * (1 + sph.heisenberg_eigenvalue(hp))

    def test_family_exclusive(self):
        with pytest.raises(ValueError):
            sph.HeisenbergParam((1,), lam=1.0, l=(0,), mu=(1.0,))
        with pytest.raises(ValueError):
            sph.HeisenbergParam((0,), mu=(1.0,))


class TestTypeH:
    def test_origin_and_bound(self):
        h2 = typeh_heisenberg(2)
        rng = np.random.default_rng(7)
        X, Z = rng.normal(size=(200, 4)) * 2, rng.normal(size=(200, 1)) * 2
        for fam in (sph.TypeHLaguerre((1.5,), 3), sph.TypeHBessel(2.0)):
            assert sph.typeh_spherical(h2, fam, np.zeros(4), np.zeros(1)) == pytest.approx(1.0)
            assert np.max(np.abs(sph.typeh_spherical(h2, fam, X, Z))) <= 1 + 1e-12

    def test_heisenberg_reduction(self):
        # Phi_{zeta,l}(x, t) = omega_{-zeta,l}(x1 + i x2, t) (opposite phase conventions)
        h1 = typeh_heisenberg(1)
        rng = np.random.default_rng(8)
        X, t = rng.normal(size=(30, 2)), rng.normal(size=30)
        phi = sph.typeh_spherical(h1, sph.TypeHLaguerre((1.3,), 2), X, t[:, None])
        om = sph.heisenberg_spherical(sph.HeisenbergParam((1,), lam=-1.3, l=(2,)), (X[:, 0] + 1j * X[:, 1])[:, None], t)
        np.testing.assert_allclose(phi, om, atol=1e-14)

    def test_zero_zeta(self):
        with pytest.raises(ValueError):
            sph.typeh_spherical(typeh_heisenberg(1), sph.TypeHLaguerre((0.0,), 0), np.zeros(2), np.zeros(1))


def test_hermite_oscillator_underpins_eigenvalues():
    from nilharm.specfun import hermite_weber
    y = np.linspace(-3, 3, 31)
    h = 1e-3
    for k in (0, 2, 5):
        d2 = (hermite_weber(k, y + h) - 2 * hermite_weber(k, y) + hermite_weber(k, y - h)) / h**2
        assert np.max(np.abs(-d2 + y**2 * hermite_weber(k, y) - (2 * k + 1) * hermite_weber(k, y))) < 1e-4


@given(st.floats(0.05, 5), st.integers(0, 10), st.floats(-3, 3), st.floats(-3, 3), st.floats(-4, 4))
@settings(max_examples=60, deadline=None)
def test_property_v2_bounded(lam, l, x1, x2, a):
    kq = haar_quadrature(2, "O", order=8)
    val = sph.phi_eval(SphericalParam(0.0, (lam,), (l,)), GroupPoint([x1, x2], [a]), kq)
    assert abs(val) <= 1 + 1e-10
