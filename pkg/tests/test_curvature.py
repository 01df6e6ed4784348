import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from igeo.curvature import (
    bianchi_residual,
    constant_curvature_fit,
    ricci_alpha_antisym_relation,
    ricci_alpha_closed_form,
    ricci_alpha_closed_form_swapped,
    riemann,
)
from igeo.expr import parse
from igeo.families import (
    euclidean,
    exponential_family_from_potential,
    normal_family,
    random_spec,
    sphere_chart,
)
from igeo.manifold import christoffel_alpha, geometry_at, sample_points


def fd_riemann(spec, p, alpha, h=1e-5):
    """Curvature from Christoffel symbols differentiated by central differences."""
    n = spec.dim
    G = christoffel_alpha(geometry_at(spec, p), alpha)
    dG = np.stack([
        (christoffel_alpha(geometry_at(spec, p + h * e), alpha)
         - christoffel_alpha(geometry_at(spec, p - h * e), alpha)) / (2 * h)
        for e in np.eye(n)
    ])
    R = np.zeros((n,) * 4)
    for d, c, a, b in np.ndindex(*R.shape):
        R[d, c, a, b] = (
            dG[a, d, b, c] - dG[b, d, a, c]
            + G[d, a, :] @ G[:, b, c] - G[d, b, :] @ G[:, a, c]
        )
    return R


class TestRiemann:
    def test_sphere_unit_curvature(self):
        spec = sphere_chart()
        geo = geometry_at(spec, sample_points(spec, 30, 0))
        curv = riemann(geo, 0.0)
        np.testing.assert_allclose(curv.Ric, geo.g, atol=1e-13)
        # R(X,Y)Z = g(Y,Z)X - g(X,Z)Y
        g = geo.g
        want = np.einsum("...bc,...ad->...abcd", g, g) - np.einsum("...ac,...bd->...abcd", g, g)
        np.testing.assert_allclose(curv.Rlow, want, atol=1e-13)

    def test_euclidean_flat(self):
        geo = geometry_at(euclidean(3), np.zeros(3))
        assert not np.any(riemann(geo, 1.0).R)

    def test_dually_flat_potential(self):
        spec = exponential_family_from_potential(parse("exp(t1) + exp(t2)", 2), [(-1, 1), (-1, 1)])
        geo = geometry_at(spec, sample_points(spec, 40, 0))
        assert np.abs(christoffel_alpha(geo, 1.0)).max() < 1e-14
        for a in (1.0, -1.0):
            assert np.abs(riemann(geo, a).Rlow).max() < 1e-13

    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 0.6, 1.0])
    def test_matches_finite_differences(self, alpha):
        spec = random_spec(3, 4)
        p = np.array([0.2, -0.1, 0.3])
        R = riemann(geometry_at(spec, p), alpha).R
        np.testing.assert_allclose(R, fd_riemann(spec, p, alpha), atol=1e-7)

    @given(st.integers(0, 1000), st.sampled_from([-2.0, -0.5, 0.0, 1.0, 1.5]))
    def test_first_bianchi(self, seed, alpha):
        spec = random_spec(3, seed)
        geo = geometry_at(spec, sample_points(spec, 10, 0))
        assert bianchi_residual(riemann(geo, alpha)) < 1e-12

    @given(st.integers(0, 1000), st.sampled_from([0.5, 1.0, 2.0]))
    def test_dual_curvature_skew(self, seed, alpha):
        spec = random_spec(2, seed)
        geo = geometry_at(spec, sample_points(spec, 10, 0))
        Lp, Lm = riemann(geo, alpha).Rlow, riemann(geo, -alpha).Rlow
        assert np.abs(Lp + np.swapaxes(Lm, -1, -2)).max() < 1e-12


class TestRicciClosedForm:
    @given(st.integers(0, 1000), st.sampled_from([-2.0, -0.5, 0.0, 0.5, 2.0]))
    def test_matches_direct(self, seed, alpha):
        spec = random_spec(3, seed)
        geo = geometry_at(spec, sample_points(spec, 10, 1))
        rp, rm = riemann(geo, 1.0).Ric, riemann(geo, -1.0).Ric
        direct = riemann(geo, alpha).Ric
        assert np.abs(ricci_alpha_closed_form(geo, rp, rm, alpha) - direct).max() < 1e-12

    def test_both_trace_readings_coincide(self):
        spec = random_spec(4, 3)
        geo = geometry_at(spec, sample_points(spec, 10, 0))
        rp, rm = riemann(geo, 1.0).Ric, riemann(geo, -1.0).Ric
        a = ricci_alpha_closed_form(geo, rp, rm, 0.3)
        b = ricci_alpha_closed_form_swapped(geo, rp, rm, 0.3)
        assert np.abs(a - b).max() < 1e-14

    def test_antisym_relation(self):
        spec = random_spec(3, 9)
        geo = geometry_at(spec, sample_points(spec, 10, 0))
        ric = {a: riemann(geo, a).Ric for a in (1.0, -1.0, 0.4, -0.4)}
        r = ricci_alpha_antisym_relation(ric[0.4], ric[-0.4], ric[1.0], ric[-1.0], 0.4)
        assert r < 1e-12


class TestConstantCurvatureFit:
    def test_sphere(self):
        spec = sphere_chart()
        k, r = constant_curvature_fit(spec, sample_points(spec, 50, 0))
        assert k == pytest.approx(1.0, abs=1e-12)
        assert r < 1e-8

    def test_normal_family(self):
        # Levi-Civita curvature of the (μ, σ) Fisher metric is -1/2; α = 1 is flat
        spec = normal_family()
        pts = sample_points(spec, 50, 0)
        k, r = constant_curvature_fit(spec, pts, alpha=0.0)
        assert k == pytest.approx(-0.5, abs=1e-10)
        assert r < 1e-8
        k, r = constant_curvature_fit(spec, pts, alpha=1.0)
        assert abs(k) < 1e-10 and r < 1e-8

    def test_flat(self):
        assert constant_curvature_fit(euclidean(2), sample_points(euclidean(2), 5, 0)) == (0.0, 0.0)

    def test_generic_spec_has_large_residual(self):
        spec = random_spec(3, 7)
        _, r = constant_curvature_fit(spec, sample_points(spec, 50, 0))
        assert r > 1e-3
