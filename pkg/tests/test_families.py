import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igeo.diagnostics import recover_recurrent_one_form
from igeo.expr import eval_jet2, parse
from igeo.families import (
    BuilderError,
    RiemannianSpec,
    alpha_conformal,
    conformal_christoffel,
    euclidean,
    exponential_family_from_potential,
    fisher_quadrature,
    normal_family,
    random_spec,
    recurrent_from,
)
from igeo.manifold import christoffel_alpha, dumps_manifold, geometry_at, sample_points

BOX2 = [(-1.0, 1.0), (-1.0, 1.0)]


def normal_closed_form(sigma):
    g = np.diag([1.0, 2.0]) / sigma**2
    Q = np.zeros((2, 2, 2))
    Q[0, 0, 1] = Q[0, 1, 0] = Q[1, 0, 0] = 2.0 / sigma**3
    Q[1, 1, 1] = 8.0 / sigma**3
    return g, Q


class TestFisherOracle:
    def test_quadrature_is_exact_for_gaussian_moments(self):
        g, Q = fisher_quadrature(0.0, 1.0)
        np.testing.assert_allclose(g, np.diag([1.0, 2.0]), atol=1e-13)
        assert Q[1, 1, 1] == pytest.approx(8.0, abs=1e-12)

    @given(st.floats(-1, 1), st.floats(0.5, 2))
    def test_closed_form_matches_quadrature(self, mu, sigma):
        g, Q = fisher_quadrature(mu, sigma)
        g0, Q0 = normal_closed_form(sigma)
        np.testing.assert_allclose(g, g0, atol=1e-9)
        np.testing.assert_allclose(Q, Q0, atol=1e-9)

    def test_builder_matches_closed_form(self):
        spec = normal_family()
        pts = sample_points(spec, 20, 0)
        geo = geometry_at(spec, pts)
        for k, (_, s) in enumerate(pts):
            g0, Q0 = normal_closed_form(s)
            np.testing.assert_allclose(geo.g[k], g0, rtol=1e-14)
            np.testing.assert_allclose(geo.Qv[k], Q0, rtol=1e-14)
        assert np.all(np.abs(geo.g[:, 0, 0] * pts[:, 1] ** 2 - 1.0) < 1e-14)


class TestExponentialFamily:
    def test_quadratic_potential_is_euclidean(self):
        spec = exponential_family_from_potential(parse("t1^2/2 + t2^2/2", 2), BOX2)
        geo = geometry_at(spec, sample_points(spec, 10, 0))
        np.testing.assert_allclose(geo.g, np.broadcast_to(np.eye(2), geo.g.shape))
        assert not np.any(geo.Qv)

    def test_exp_potential(self):
        spec = exponential_family_from_potential(parse("exp(t1) + exp(t2)", 2), BOX2)
        p = np.array([0.3, -0.4])
        geo = geometry_at(spec, p)
        np.testing.assert_allclose(geo.g, np.diag(np.exp(p)), rtol=1e-15)
        assert geo.Qv[0, 0, 0] == pytest.approx(np.exp(0.3))
        assert geo.Qv[0, 0, 1] == 0.0

    def test_bernoulli(self):
        spec = exponential_family_from_potential(parse("log(1 + exp(t1))", 1), [(-3.0, 3.0)])
        x = np.linspace(-3, 3, 7)[:, None]
        geo = geometry_at(spec, x)
        sig = 1 / (1 + np.exp(-x[:, 0]))
        np.testing.assert_allclose(geo.g[:, 0, 0], sig * (1 - sig), rtol=1e-13)
        assert np.abs(christoffel_alpha(geo, 1.0)).max() < 1e-15

    def test_nonconvex_rejected(self):
        with pytest.raises(BuilderError, match="convexity"):
            exponential_family_from_potential(parse("t1^2 - t2^2", 2), BOX2)


class TestRecurrent:
    def test_zero_form(self):
        spec = recurrent_from([["1", "0"], ["0", "1"]], ["0", "0"], BOX2)
        assert all(q.is_zero for q in spec.Q)

    def test_identity_metric(self):
        c = 0.7
        spec = recurrent_from([["1", "0"], ["0", "1"]], [str(c), "0"], BOX2)
        Q = geometry_at(spec, np.zeros(2)).Qv
        assert Q[0, 0, 0] == pytest.approx(3 * c)
        assert Q[0, 1, 1] == pytest.approx(c)
        assert Q[0, 0, 1] == 0.0

    def test_recovery_round_trip(self):
        phi = parse("t1*t2", 2)
        omega = ["t2", "t1"]
        spec = recurrent_from([["2 + t1^2", "0.3*t2"], ["0.3*t2", "1"]], omega, BOX2)
        pts = sample_points(spec, 30, 0)
        w, r = recover_recurrent_one_form(spec, pts)
        np.testing.assert_allclose(w, eval_jet2(phi, pts).grad, atol=1e-10)
        assert np.max(r) < 1e-10


class TestAlphaConformal:
    H = RiemannianSpec.from_entries(2, BOX2, {(1, 1): "1", (2, 2): "1 + t1^2"}, name="h")

    def test_zero_phi_gives_h(self):
        for alpha in (-1.0, 0.5, 2.0):
            spec = alpha_conformal(self.H, "0", alpha)
            geo = geometry_at(spec, sample_points(spec, 10, 0))
            assert np.abs(geo.Qv).max() == 0.0
            np.testing.assert_allclose(geo.g[:, 1, 1], 1 + geo.p[:, 0] ** 2)

    @pytest.mark.parametrize("alpha", [-1.0, 0.0, 0.5, 1.0])
    @pytest.mark.parametrize("phi", ["t1", "t1 + t2", "t1*t2"])
    def test_recurrent_with_alpha_dphi(self, alpha, phi):
        spec = alpha_conformal(self.H, phi, alpha)
        pts = sample_points(spec, 40, 1)
        w, r = recover_recurrent_one_form(spec, pts)
        assert np.max(r) < 1e-9
        np.testing.assert_allclose(w, alpha * eval_jet2(parse(phi, 2), pts).grad, atol=1e-12)

    def test_three_dimensional(self):
        h = RiemannianSpec.identity(3, [(-1, 1)] * 3)
        spec = alpha_conformal(h, "t1 - 0.5*t3^2", 0.3)
        w, r = recover_recurrent_one_form(spec, sample_points(spec, 20, 0))
        assert np.max(r) < 1e-9

    @pytest.mark.parametrize("alpha", [-1.0, 0.5, 1.0])
    def test_primal_connection_matches_construction(self, alpha):
        spec = alpha_conformal(self.H, "t1*t2", alpha)
        pts = sample_points(spec, 20, 0)
        G = christoffel_alpha(geometry_at(spec, pts), 1.0)
        np.testing.assert_allclose(G, conformal_christoffel(self.H, "t1*t2", alpha, pts), atol=1e-12)

    @pytest.mark.parametrize("alpha", [-1.0, 0.5, 1.0])
    def test_dual_is_minus_alpha_conformal(self, alpha):
        a = alpha_conformal(self.H, "t1 + t2", alpha)
        b = alpha_conformal(self.H, "t1 + t2", -alpha)
        pts = sample_points(a, 30, 0)
        dual = christoffel_alpha(geometry_at(a, pts), -1.0)
        primal = christoffel_alpha(geometry_at(b, pts), 1.0)
        assert np.abs(dual - primal).max() <= 1e-10


class TestRandomSpec:
    def test_deterministic(self):
        assert dumps_manifold(random_spec(2, 42)) == dumps_manifold(random_spec(2, 42))
        assert dumps_manifold(random_spec(2, 42)) != dumps_manifold(random_spec(2, 43))

    def test_zero_amplitude_is_euclidean(self):
        spec = random_spec(3, 5, amplitude=0.0)
        body = dumps_manifold(spec).splitlines()[3:]
        assert body == dumps_manifold(euclidean(3)).splitlines()[3:]

    def test_dim_range(self):
        with pytest.raises(ValueError):
            random_spec(6, 0)
        with pytest.raises(ValueError):
            random_spec(1, 0)

    @settings(max_examples=20)
    @given(st.integers(0, 10_000), st.integers(2, 5))
    def test_metric_spd(self, seed, dim):
        spec = random_spec(dim, seed)
        eig = np.linalg.eigvalsh(geometry_at(spec, sample_points(spec, 16, 0)).g)
        assert eig.min() >= 1.0 - 1e-12
