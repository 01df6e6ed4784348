import numpy as np
import pytest

from igeo.expr import parse
from igeo.families import (
    euclidean,
    exponential_family_from_potential,
    fisher_quadrature,
    normal_family,
    random_spec,
    sphere_chart,
)
from igeo.manifold import ManifoldSpec, geometry_at, sample_points
from igeo.prior import (
    NotEquiaffineError,
    closedness,
    line_integral,
    parallel_volume,
    path_independence_probe,
    tau,
)

EXPFAM = exponential_family_from_potential(parse("exp(t1) + exp(t2)", 2), [(-1, 1), (-1, 1)])


def half_logdet(spec, pts):
    return 0.5 * np.linalg.slogdet(geometry_at(spec, pts).g)[1]


def scaled(spec, c):
    """Same structure with g and Q multiplied by ``c``."""
    from igeo.expr import BinOp, Num, ScalarField

    def mul(f):
        return ScalarField(BinOp("*", Num(c), f.root), f.dim)

    return ManifoldSpec(spec.dim, spec.domain, tuple(map(mul, spec.g)), tuple(map(mul, spec.Q)), spec.name)


class TestTau:
    def test_euclidean(self):
        geo = geometry_at(euclidean(3), np.zeros(3))
        assert not np.any(tau(geo, 1.0))

    def test_levi_civita_is_log_det_gradient(self):
        spec = random_spec(3, 2)
        pts = sample_points(spec, 20, 0)
        geo = geometry_at(spec, pts)
        # ∂_a ½ log det g = ½ tr(g^-1 ∂_a g)
        want = 0.5 * np.einsum("...jk,...akj->...a", geo.ginv, geo.dg)
        np.testing.assert_allclose(tau(geo, 0.0), want, atol=1e-10)

    def test_flat_coordinates(self):
        geo = geometry_at(EXPFAM, sample_points(EXPFAM, 10, 0))
        assert np.abs(tau(geo, 1.0)).max() < 1e-15

    def test_levi_civita_always_closed(self):
        spec = random_spec(4, 6)
        assert closedness(geometry_at(spec, sample_points(spec, 30, 0)), 0.0).max() < 1e-12


class TestLineIntegral:
    def test_exact_for_log_det(self):
        spec = random_spec(2, 3)
        a, b = np.array([[-0.4, 0.3]]), np.array([[0.45, -0.2]])
        val = line_integral(spec, 0.0, a, b)
        want = half_logdet(spec, b) - half_logdet(spec, a)
        assert val[0] == pytest.approx(want[0], abs=1e-12)

    def test_zero_length(self):
        assert line_integral(random_spec(2, 3), 1.0, [[0.1, 0.1]], [[0.1, 0.1]])[0] == 0.0

    def test_probe(self):
        assert path_independence_probe(euclidean(2), 0.5, [-0.5, -0.5], [0.5, 0.5]) == 0.0
        assert path_independence_probe(EXPFAM, 2.0, [-0.8, -0.8], [0.9, 0.7]) <= 1e-9
        spec = random_spec(2, 7)
        assert path_independence_probe(spec, 1.0, [-0.4, -0.4], [0.4, 0.4]) > 1e-4


class TestParallelVolume:
    def test_euclidean_zero(self):
        for a in (-1.0, 0.0, 2.5):
            out = parallel_volume(euclidean(2), a, grid=5)
            assert not np.any(out.log_f)

    def test_base_point_normalized(self):
        spec = random_spec(2, 1)
        out = parallel_volume(spec, 0.0, base_point=spec.lower, grid=6)
        assert out.log_f[0, 0] == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_jeffreys(self, seed):
        spec = random_spec(2, seed)
        out = parallel_volume(spec, 0.0, grid=8)
        d = out.log_f.ravel() - half_logdet(spec, out.points)
        assert np.ptp(d) <= 1e-8

    def test_jeffreys_three_dimensional(self):
        spec = random_spec(3, 4)
        out = parallel_volume(spec, 0.0, grid=[4, 5, 3])
        assert out.log_f.shape == (4, 5, 3)
        assert np.ptp(out.log_f.ravel() - half_logdet(spec, out.points)) <= 1e-8

    def test_normal_family_jeffreys(self):
        spec = normal_family()
        out = parallel_volume(spec, 0.0, grid=10)
        sigma = out.points[:, 1]
        # det g from the quadrature oracle, independently of the closed form
        det = np.array([np.linalg.det(fisher_quadrature(m, s)[0]) for m, s in out.points])
        assert np.ptp(np.exp(out.log_f.ravel()) / np.sqrt(det)) / np.exp(out.log_f.ravel()[0]) < 1e-8
        ratio = np.exp(out.log_f.ravel()) * sigma**2
        assert np.ptp(ratio) / ratio.mean() <= 1e-8

    def test_derivative_matches_tau_to_second_order(self):
        spec = sphere_chart()

        def fd_error(k):
            out = parallel_volume(spec, 1.0, grid=[k, 5])
            x = out.axes[0]
            col = out.log_f[:, 2]
            i = (k - 1) // 4  # a quarter of the way along t1, on both lattices
            fd = (col[i + 1] - col[i - 1]) / (x[i + 1] - x[i - 1])
            t = tau(geometry_at(spec, [x[i], out.axes[1][2]]), 1.0)[0]
            return abs(fd - t)

        coarse, fine = fd_error(21), fd_error(41)
        assert fine < 1e-2
        assert 3.5 < coarse / fine < 4.5

    def test_scale_invariance(self):
        spec = random_spec(2, 5)
        a = parallel_volume(spec, 0.0, grid=6).log_f
        b = parallel_volume(scaled(spec, 3.0), 0.0, grid=6).log_f
        assert np.abs((a - a[0, 0]) - (b - b[0, 0])).max() <= 1e-9

    def test_dually_flat_any_alpha(self):
        for a in (-2.0, 0.5, 3.0):
            out = parallel_volume(EXPFAM, a, grid=5)
            assert out.closedness_residual < 1e-12

    def test_not_equiaffine(self):
        with pytest.raises(NotEquiaffineError, match="not equiaffine at alpha=1"):
            parallel_volume(random_spec(2, 7), 1.0, grid=5)

    def test_normalize(self):
        out = parallel_volume(euclidean(2), 0.0, grid=5, normalize=True)
        assert np.exp(out.log_f).ravel() == pytest.approx(np.full(25, 0.25))

    def test_csv(self):
        out = parallel_volume(euclidean(2), 0.0, grid=[2, 3])
        lines = out.to_csv().splitlines()
        assert lines[0] == "t1,t2,log_f"
        assert len(lines) == 7
        assert lines[1] == "-1,-1,0" and lines[2] == "-1,0,0"

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            parallel_volume(euclidean(2), 0.0, grid=1)
        with pytest.raises(ValueError):
            parallel_volume(euclidean(2), 0.0, base_point=[2.0, 0.0])
        with pytest.raises(ValueError):
            parallel_volume(euclidean(2), 0.0, grid=[3, 3, 3])
