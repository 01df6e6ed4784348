"""Named residual checks over sampled points.

Every check returns a :class:`CheckResult`.  Checks come in three roles:

``identity``
    holds on every statistical manifold; a failure is a bug.
``property``
    a structural property that a given manifold may or may not have
    (conjugate symmetry, equiaffinity at some α, ...); "fail" is informative.
``theorem``
    an implication.  The hypothesis is evaluated on the sample first; when it
    does not hold the verdict is ``skip``, otherwise the conclusion must pass.

Hypotheses are global in nature but are judged on the sample: "holds at all
sampled points" stands in for "holds on the chart".

Index layouts follow :mod:`igeo.manifold` and :mod:`igeo.curvature`.
"""
from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import (
    CurvatureAtPoint,
    constant_curvature_fit,
    ricci_alpha_closed_form,
    riemann,
)
from .expr import DomainError
from .manifold import (
    GeometryAtPoint,
    ManifoldSpec,
    SPDError,
    christoffel_alpha,
    geometry_at,
    nabla_g,
    sample_points,
)
from .prior import closedness
from .tensor import sym_residual_array

__all__ = [
    "Sampling",
    "SampledManifold",
    "CheckResult",
    "DiagnosticReport",
    "sample_manifold",
    "recover_recurrent_one_form",
    "check_statistical",
    "check_torsion_free",
    "check_duality",
    "check_first_bianchi",
    "check_curvature_exchange",
    "check_dual_curvature_skew",
    "check_dual_curvature_pair_symmetry",
    "check_dual_ricci_sum_symmetry",
    "check_ricci_closed_form",
    "check_ricci_antisym_relation",
    "check_ricci_difference_trace",
    "check_conjugate_symmetry",
    "check_conjugate_ricci_symmetry",
    "check_equiaffine",
    "check_equiaffine_consistency",
    "check_constant_curvature",
    "check_constant_curvature_conjugate",
    "check_theorem_3_1",
    "check_theorem_3_2",
    "check_prop_3_3",
    "check_recurrent",
    "check_theorem_4_1",
    "run_suite",
]

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class Sampling:
    points: int = 200
    seed: int = 0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if self.points < 1:
            raise ValueError("points must be >= 1")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")


class SampledManifold:
    """Geometry at the sample points, with per-α curvature cached.

    ``error`` is set instead of ``geo`` when the metric fails to be SPD or a
    field cannot be evaluated somewhere on the sample.
    """

    def __init__(self, spec: ManifoldSpec, sampling: Sampling = Sampling(), points=None):
        self.spec = spec
        self.sampling = sampling
        self.points = sample_points(spec, sampling.points, sampling.seed) if points is None else np.asarray(points, dtype=float)
        self.error: str | None = None
        self.geo: GeometryAtPoint | None = None
        try:
            self.geo = geometry_at(spec, self.points)
        except (SPDError, DomainError) as exc:
            self.error = str(exc)
        self._curv: dict[float, CurvatureAtPoint] = {}
        self._lock = threading.Lock()

    @property
    def tol(self) -> float:
        return self.sampling.tol

    @property
    def dim(self) -> int:
        return self.spec.dim

    def curvature(self, alpha: float) -> CurvatureAtPoint:
        alpha = float(alpha)
        with self._lock:
            c = self._curv.get(alpha)
            if c is None:
                c = self._curv[alpha] = riemann(self.geo, alpha)
        return c


def sample_manifold(spec, sampling: Sampling | None = None) -> SampledManifold:
    if isinstance(spec, SampledManifold):
        return spec
    return SampledManifold(spec, sampling or Sampling())


@dataclass
class CheckResult:
    name: str
    alpha: tuple
    seed: int
    points: int
    max_residual: float
    tol: float
    verdict: str  # pass | fail | skip
    worst_point: list | None
    role: str = "identity"
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "alpha": list(self.alpha),
            "points": self.points,
            "max_residual": None if np.isnan(self.max_residual) else self.max_residual,
            "tol": self.tol,
            "verdict": self.verdict,
            "worst_point": self.worst_point,
            "role": self.role,
        }
        if self.detail:
            out["detail"] = self.detail
        return out


def _per_point(arr: np.ndarray, npts: int) -> np.ndarray:
    if arr.size == 0:
        return np.zeros(npts)
    return np.abs(arr).reshape(npts, -1).max(axis=1)


def _result(sm: SampledManifold, name, alphas, per_point, role="identity", tol=None, detail=None):
    tol = sm.tol if tol is None else tol
    per_point = np.asarray(per_point, dtype=float)
    k = int(np.argmax(per_point))
    resid = float(per_point[k])
    return CheckResult(
        name=name,
        alpha=tuple(float(a) for a in alphas),
        seed=sm.sampling.seed,
        points=len(sm.points),
        max_residual=resid,
        tol=tol,
        verdict="pass" if resid <= tol else "fail",
        worst_point=[float(x) for x in sm.points[k]],
        role=role,
        detail=detail or {},
    )


def _skip(sm: SampledManifold, name, alphas, reason, role="theorem", residual=float("nan")):
    return CheckResult(
        name=name,
        alpha=tuple(float(a) for a in alphas),
        seed=sm.sampling.seed,
        points=len(sm.points),
        max_residual=residual,
        tol=sm.tol,
        verdict="skip",
        worst_point=None,
        role=role,
        detail={"reason": reason},
    )


def _invalid(sm, name, alphas, role):
    return _skip(sm, name, alphas, f"invalid sample: {sm.error}", role=role)


def _stack(per_alpha):
    return np.max(np.stack(per_alpha), axis=0)


# ---------------------------------------------------------------------------
# Unconditional identities
# ---------------------------------------------------------------------------


def check_statistical(spec, sampling=None) -> CheckResult:
    """``∇g = Q`` at α = 1 and total symmetry of Q."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "statistical", (1.0,), "identity")
    N = len(sm.points)
    r1 = _per_point(nabla_g(sm.geo, 1.0) - sm.geo.Qv, N)
    Q = sm.geo.Qv
    r2 = np.array([sym_residual_array(Q[k]) for k in range(N)])
    return _result(sm, "statistical", (1.0,), np.maximum(r1, r2))


def check_torsion_free(spec, sampling=None, alphas=(-1.0, 0.0, 1.0)) -> CheckResult:
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "torsion_free", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        G = christoffel_alpha(sm.geo, a)
        per.append(_per_point(G - np.swapaxes(G, -1, -2), N))
    return _result(sm, "torsion_free", alphas, _stack(per))


def check_duality(spec, sampling=None) -> CheckResult:
    """``∂_i g_jk = Γ^(1)l_ij g_lk + Γ^(-1)l_ik g_jl``."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "duality", (1.0, -1.0), "identity")
    geo = sm.geo
    Gp, Gm = christoffel_alpha(geo, 1.0), christoffel_alpha(geo, -1.0)
    r = geo.dg - np.einsum("...lij,...lk->...ijk", Gp, geo.g) - np.einsum(
        "...lik,...jl->...ijk", Gm, geo.g
    )
    return _result(sm, "duality", (1.0, -1.0), _per_point(r, len(sm.points)))


def check_first_bianchi(spec, sampling=None, alphas=(-1.0, 0.0, 1.0)) -> CheckResult:
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "first_bianchi", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        R = sm.curvature(a).R
        cyc = R + np.einsum("...dabc->...dcab", R) + np.einsum("...dbca->...dcab", R)
        per.append(_per_point(cyc, N))
    return _result(sm, "first_bianchi", alphas, _stack(per))


def check_curvature_exchange(spec, sampling=None, alphas=(1.0,)) -> CheckResult:
    """``R_abcd + R_badc = R_cdab + R_dcba`` (the α-connection of a statistical
    manifold is itself statistical, so this holds at every α)."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "curvature_exchange", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        L = sm.curvature(a).Rlow
        lhs = L + np.einsum("...badc->...abcd", L)
        rhs = np.einsum("...cdab->...abcd", L) + np.einsum("...dcba->...abcd", L)
        per.append(_per_point(lhs - rhs, N))
    return _result(sm, "curvature_exchange", alphas, _stack(per))


def check_dual_curvature_skew(spec, sampling=None, alphas=(1.0,)) -> CheckResult:
    """``g(R(X,Y)Z,W) + g(R*(X,Y)W,Z) = 0`` with ``R* = R^(-α)``."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "dual_curvature_skew", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        Lp, Lm = sm.curvature(a).Rlow, sm.curvature(-a).Rlow
        per.append(_per_point(Lp + np.swapaxes(Lm, -1, -2), N))
    return _result(sm, "dual_curvature_skew", alphas, _stack(per))


def check_dual_curvature_pair_symmetry(spec, sampling=None, alphas=(1.0,)) -> CheckResult:
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "dual_curvature_pair_symmetry", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        S = sm.curvature(a).Rlow + sm.curvature(-a).Rlow
        per.append(_per_point(S - np.einsum("...cdab->...abcd", S), N))
    return _result(sm, "dual_curvature_pair_symmetry", alphas, _stack(per))


def check_dual_ricci_sum_symmetry(spec, sampling=None, alphas=(1.0,)) -> CheckResult:
    """``Ric + Ric*`` is symmetric."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "dual_ricci_sum_symmetry", alphas, "identity")
    N = len(sm.points)
    per = []
    for a in alphas:
        S = sm.curvature(a).Ric + sm.curvature(-a).Ric
        per.append(np.array([sym_residual_array(S[k]) for k in range(N)]))
    return _result(sm, "dual_ricci_sum_symmetry", alphas, _stack(per))


def check_ricci_closed_form(spec, sampling=None, alphas=(-1.0, 0.0, 1.0), tol=None) -> CheckResult:
    """Closed-form Ric^(α) against the directly computed curvature."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "ricci_closed_form", alphas, "identity")
    N = len(sm.points)
    rp, rm = sm.curvature(1.0).Ric, sm.curvature(-1.0).Ric
    per = [
        _per_point(ricci_alpha_closed_form(sm.geo, rp, rm, a) - sm.curvature(a).Ric, N)
        for a in alphas
    ]
    return _result(sm, "ricci_closed_form", alphas, _stack(per), tol=tol)


def check_ricci_antisym_relation(spec, sampling=None, alphas=(-1.0, 0.0, 1.0), tol=None) -> CheckResult:
    """``Ric^(α) - Ric^(-α) = α (Ric - Ric*)``."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "ricci_antisym_relation", alphas, "identity")
    N = len(sm.points)
    rp, rm = sm.curvature(1.0).Ric, sm.curvature(-1.0).Ric
    per = []
    for a in alphas:
        d = sm.curvature(a).Ric - sm.curvature(-a).Ric - a * (rp - rm)
        per.append(_per_point(d, N))
    return _result(sm, "ricci_antisym_relation", alphas, _stack(per), tol=tol)


def _levi_civita_nabla_q(geo) -> np.ndarray:
    """``(∇°_a Q)_ijk`` in ``[..., a, i, j, k]`` layout."""
    G, Q = geo.gamma0, geo.Qv
    return (
        geo.dQ
        - np.einsum("...mai,...mjk->...aijk", G, Q)
        - np.einsum("...maj,...imk->...aijk", G, Q)
        - np.einsum("...mak,...ijm->...aijk", G, Q)
    )


def _alternation(geo) -> np.ndarray:
    """``A[x, y, z, w] = (∇°_X Q)(Y,Z,W) - (∇°_Y Q)(X,Z,W)``."""
    nQ = _levi_civita_nabla_q(geo)
    return nQ - np.swapaxes(nQ, -4, -3)


def check_ricci_difference_trace(spec, sampling=None) -> CheckResult:
    """``Ric* - Ric = tr_g (X,W) ↦ (∇°_X Q)(Y,Z,W) - (∇°_Y Q)(X,Z,W)``."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "ricci_difference_trace", (1.0, -1.0), "identity")
    geo = sm.geo
    trace = np.einsum("...xw,...xyzw->...yz", geo.ginv, _alternation(geo))
    diff = sm.curvature(-1.0).Ric - sm.curvature(1.0).Ric
    return _result(sm, "ricci_difference_trace", (1.0, -1.0), _per_point(diff - trace, len(sm.points)))


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------


def _conj_sym_per_point(sm):
    return _per_point(sm.curvature(1.0).R - sm.curvature(-1.0).R, len(sm.points))


def _conj_ric_per_point(sm, alpha=1.0):
    return _per_point(sm.curvature(alpha).Ric - sm.curvature(-alpha).Ric, len(sm.points))


def check_conjugate_symmetry(spec, sampling=None) -> CheckResult:
    """``R = R*`` componentwise."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "conjugate_symmetry", (1.0, -1.0), "property")
    return _result(sm, "conjugate_symmetry", (1.0, -1.0), _conj_sym_per_point(sm), role="property")


def check_conjugate_ricci_symmetry(spec, sampling=None) -> CheckResult:
    """``Ric = Ric*``."""
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "conjugate_ricci_symmetry", (1.0, -1.0), "property")
    return _result(
        sm, "conjugate_ricci_symmetry", (1.0, -1.0), _conj_ric_per_point(sm), role="property"
    )


def _equiaffine_parts(sm, alpha):
    N = len(sm.points)
    ric = sm.curvature(alpha).Ric
    ric_sym = np.array([sym_residual_array(ric[k]) for k in range(N)])
    closed = closedness(sm.geo, alpha).reshape(N)
    return ric_sym, closed


def check_equiaffine(spec, sampling=None, alpha: float = 1.0) -> CheckResult:
    """Symmetric Ricci tensor and closed trace one-form at ``alpha``.

    ``detail`` carries both residuals and their separate verdicts.
    """
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "equiaffine", (alpha,), "property")
    ric_sym, closed = _equiaffine_parts(sm, alpha)
    out = _result(sm, "equiaffine", (alpha,), np.maximum(ric_sym, closed), role="property")
    out.detail = {
        "ricci_symmetry_residual": float(ric_sym.max()),
        "closedness_residual": float(closed.max()),
        "ricci_symmetry_verdict": "pass" if ric_sym.max() <= sm.tol else "fail",
        "closedness_verdict": "pass" if closed.max() <= sm.tol else "fail",
    }
    return out


def _band(values, tol, margin):
    return (values >= tol / margin) & (values <= tol * margin)


def check_equiaffine_consistency(spec, sampling=None, alphas=(-1.0, 0.0, 1.0), margin=10.0) -> CheckResult:
    """Ricci symmetry and ``dτ = 0`` must agree pointwise.

    Residual is the number of points whose two verdicts disagree, ignoring
    points where either residual lies within a factor ``margin`` of the
    tolerance.
    """
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "equiaffine_consistency", alphas, "identity")
    tol = sm.tol
    disagree = np.zeros(len(sm.points))
    excluded = 0
    for a in alphas:
        ric_sym, closed = _equiaffine_parts(sm, a)
        ambiguous = _band(ric_sym, tol, margin) | _band(closed, tol, margin)
        excluded += int(ambiguous.sum())
        bad = ((ric_sym <= tol) != (closed <= tol)) & ~ambiguous
        disagree += bad
    out = _result(sm, "equiaffine_consistency", alphas, disagree, tol=0.5)
    out.max_residual = float(disagree.sum())
    out.verdict = "pass" if out.max_residual == 0 else "fail"
    out.tol = sm.tol
    out.detail = {"excluded_margin_points": excluded}
    return out


def check_constant_curvature(spec, sampling=None, alpha: float = 1.0) -> CheckResult:
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "constant_curvature", (alpha,), "property")
    if len(sm.points) < 2:
        return _skip(sm, "constant_curvature", (alpha,), "needs >= 2 points", role="property")
    k_hat, resid = constant_curvature_fit(sm.spec, sm.points, alpha)
    return CheckResult(
        "constant_curvature",
        (float(alpha),),
        sm.sampling.seed,
        len(sm.points),
        float(resid),
        sm.tol,
        "pass" if resid <= sm.tol else "fail",
        None,
        role="property",
        detail={"K_hat": k_hat},
    )


def recover_recurrent_one_form(spec, p):
    """Best one-form ``ω`` with ``Q_ijk = ω_i g_jk + ω_j g_ik + ω_k g_ij``.

    Contracting with ``g^jk`` gives ``g^jk Q_ijk = (n + 2) ω_i``.  Returns
    ``(omega, residual)``; both are batched when ``p`` is a batch of points
    and ``spec`` may also be a prebuilt :class:`GeometryAtPoint`.
    """
    geo = spec if isinstance(spec, GeometryAtPoint) else geometry_at(spec, p)
    n = geo.dim
    omega = np.einsum("...jk,...ijk->...i", geo.ginv, geo.Qv) / (n + 2)
    model = _recurrent_model(omega, geo.g)
    diff = np.abs(geo.Qv - model)
    resid = diff.reshape(diff.shape[:-3] + (-1,)).max(axis=-1)
    return omega, (float(resid) if np.ndim(resid) == 0 else resid)


def _recurrent_model(omega, g):
    return (
        np.einsum("...i,...jk->...ijk", omega, g)
        + np.einsum("...j,...ik->...ijk", omega, g)
        + np.einsum("...k,...ij->...ijk", omega, g)
    )


def _omega_derivative(geo) -> np.ndarray:
    """``∂_a ω_i`` in ``[..., a, i]`` from jets of g and Q."""
    n = geo.dim
    return (
        np.einsum("...ajk,...ijk->...ai", geo.dginv, geo.Qv)
        + np.einsum("...jk,...aijk->...ai", geo.ginv, geo.dQ)
    ) / (n + 2)


def check_recurrent(spec, sampling=None) -> CheckResult:
    sm = sample_manifold(spec, sampling)
    if sm.error:
        return _invalid(sm, "recurrent", (), "property")
    _, resid = recover_recurrent_one_form(sm.geo, None)
    dw = _omega_derivative(sm.geo)
    closed = _per_point(dw - np.swapaxes(dw, -1, -2), len(sm.points))
    out = _result(sm, "recurrent", (), resid, role="property")
    out.detail = {"omega_closedness_residual": float(closed.max())}
    return out


# ---------------------------------------------------------------------------
# Implications
# ---------------------------------------------------------------------------


def check_constant_curvature_conjugate(spec, sampling=None) -> CheckResult:
    """Constant curvature implies ``R = R*`` and ``Ric = Ric*``."""
    sm = sample_manifold(spec, sampling)
    name = "constant_curvature_conjugate"
    if sm.error:
        return _invalid(sm, name, (1.0, -1.0), "theorem")
    if len(sm.points) < 2:
        return _skip(sm, name, (1.0, -1.0), "needs >= 2 points")
    k_hat, fit = constant_curvature_fit(sm.spec, sm.points, 1.0)
    if fit > sm.tol:
        return _skip(sm, name, (1.0, -1.0), f"not constant curvature (fit residual {fit:.3e})")
    per = np.maximum(_conj_sym_per_point(sm), _conj_ric_per_point(sm))
    out = _result(sm, name, (1.0, -1.0), per, role="theorem")
    out.detail = {"K_hat": k_hat, "fit_residual": fit}
    return out


def check_theorem_3_1(spec, sampling=None, alpha_grid=(-3.0, -1.0, 0.0, 0.7, 1.0, 3.0)) -> CheckResult:
    """Conjugate Ricci-symmetry implies equiaffinity for every α."""
    sm = sample_manifold(spec, sampling)
    name = "theorem_3_1"
    if sm.error:
        return _invalid(sm, name, alpha_grid, "theorem")
    pre = _conj_ric_per_point(sm)
    if pre.max() > sm.tol:
        return _skip(sm, name, alpha_grid, f"not conjugate Ricci-symmetric ({pre.max():.3e})")
    per = [np.maximum(*_equiaffine_parts(sm, a)) for a in alpha_grid]
    return _result(sm, name, alpha_grid, _stack(per), role="theorem")


def check_theorem_3_2(spec, sampling=None, alpha0: float = 0.7, alpha_grid=(-3.0, -1.0, 0.0, 0.7, 1.0, 3.0)) -> CheckResult:
    """``Ric^(α0) = Ric^(-α0)`` for some α0 ≠ 0 propagates to every α and
    makes every ∇^(α) equiaffine."""
    if alpha0 == 0:
        raise ValueError("alpha0 must be nonzero")
    sm = sample_manifold(spec, sampling)
    name = "theorem_3_2"
    grid = tuple(alpha_grid)
    if sm.error:
        return _invalid(sm, name, (alpha0,) + grid, "theorem")
    pre = _conj_ric_per_point(sm, alpha0)
    if pre.max() > sm.tol:
        return _skip(sm, name, (alpha0,) + grid, f"Ric^(a0) != Ric^(-a0) ({pre.max():.3e})")
    per = []
    for a in grid:
        per.append(_conj_ric_per_point(sm, a))
        per.append(np.maximum(*_equiaffine_parts(sm, a)))
    return _result(sm, name, (alpha0,) + grid, _stack(per), role="theorem")


def _agreement(sm, r_a, r_b, margin):
    tol = sm.tol
    ambiguous = _band(r_a, tol, margin) | _band(r_b, tol, margin)
    disagree = ((r_a <= tol) != (r_b <= tol)) & ~ambiguous
    return disagree, ambiguous


def check_prop_3_3(spec, sampling=None, margin: float = 10.0) -> CheckResult:
    """In dimension 2, pointwise ``R = R*`` iff ``Ric = Ric*``.

    Residual is the count of disagreeing points; points whose residuals sit
    within a factor ``margin`` of the tolerance are excluded and counted in
    ``detail``.
    """
    sm = sample_manifold(spec, sampling)
    if sm.spec.dim != 2:
        raise ValueError("prop_3_3 applies to 2-dimensional manifolds only")
    name = "prop_3_3"
    if sm.error:
        return _invalid(sm, name, (1.0, -1.0), "theorem")
    r_sym, r_ric = _conj_sym_per_point(sm), _conj_ric_per_point(sm)
    disagree, ambiguous = _agreement(sm, r_sym, r_ric, margin)
    return _count_result(sm, name, (1.0, -1.0), disagree, ambiguous, {
        "conjugate_symmetric_points": int(np.sum(r_sym <= sm.tol)),
        "conjugate_ricci_symmetric_points": int(np.sum(r_ric <= sm.tol)),
    })


def _count_result(sm, name, alphas, disagree, ambiguous, extra, residual_floor=0.0):
    count = float(np.sum(disagree))
    bad = np.flatnonzero(disagree)
    resid = max(count, residual_floor)
    return CheckResult(
        name,
        tuple(float(a) for a in alphas),
        sm.sampling.seed,
        len(sm.points),
        resid,
        sm.tol,
        "pass" if resid <= sm.tol else "fail",
        [float(x) for x in sm.points[bad[0]]] if len(bad) else None,
        role="theorem",
        detail={"disagreeing_points": int(count), "excluded_margin_points": int(np.sum(ambiguous)), **extra},
    )


def check_theorem_4_1(spec, sampling=None, margin: float = 10.0) -> CheckResult:
    """Closed recurrence one-form: conjugate symmetry iff conjugate
    Ricci-symmetry, plus the alternation identity for ``∇°Q``.

    The alternation of ``∇°Q`` in its first two slots is compared against
    ``g(W,Y)(∇°_Xω)(Z) - g(W,X)(∇°_Yω)(Z) + g(Y,Z)(∇°_Xω)(W) - g(X,Z)(∇°_Yω)(W)``.
    """
    sm = sample_manifold(spec, sampling)
    name = "theorem_4_1"
    if sm.error:
        return _invalid(sm, name, (1.0, -1.0), "theorem")
    geo = sm.geo
    omega, rec = recover_recurrent_one_form(geo, None)
    if rec.max() > sm.tol:
        return _skip(sm, name, (1.0, -1.0), f"not recurrent ({rec.max():.3e})")
    dw = _omega_derivative(geo)
    closed = _per_point(dw - np.swapaxes(dw, -1, -2), len(sm.points))
    if closed.max() > sm.tol:
        return _skip(sm, name, (1.0, -1.0), f"recurrence one-form not closed ({closed.max():.3e})")

    nw = dw - np.einsum("...mai,...m->...ai", geo.gamma0, omega)  # (∇°_a ω)_i
    g = geo.g
    rhs = (
        np.einsum("...wy,...xz->...xyzw", g, nw)
        - np.einsum("...wx,...yz->...xyzw", g, nw)
        + np.einsum("...yz,...xw->...xyzw", g, nw)
        - np.einsum("...xz,...yw->...xyzw", g, nw)
    )
    ident = _per_point(_alternation(geo) - rhs, len(sm.points))
    disagree, ambiguous = _agreement(sm, _conj_sym_per_point(sm), _conj_ric_per_point(sm), margin)
    out = _count_result(
        sm, name, (1.0, -1.0), disagree, ambiguous,
        {"alternation_identity_residual": float(ident.max()), "recurrence_residual": float(rec.max()),
         "omega_closedness_residual": float(closed.max())},
        residual_floor=float(ident.max()),
    )
    if not disagree.any():
        out.worst_point = [float(x) for x in sm.points[int(np.argmax(ident))]]
    return out


# ---------------------------------------------------------------------------
# Suite and report
# ---------------------------------------------------------------------------


@dataclass
class DiagnosticReport:
    manifold: str
    seed: int
    tolerance: float
    checks: list

    @property
    def failed(self) -> list:
        return [c for c in self.checks if c.verdict == "fail" and c.role != "property"]

    @property
    def ok(self) -> bool:
        return not self.failed

    def as_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "checks": [c.as_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        header = ("check", "role", "alpha", "points", "max_residual", "tol", "verdict")
        rows = [header]
        for c in self.checks:
            rows.append((
                c.name,
                c.role,
                ",".join(f"{a:g}" for a in c.alpha) or "-",
                str(c.points),
                f"{c.max_residual:.3e}",
                f"{c.tol:.1e}",
                c.verdict.upper(),
            ))
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = [f"manifold: {self.manifold}  seed: {self.seed}  tolerance: {self.tolerance:g}"]
        for r in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        lines.append(f"result: {'PASS' if self.ok else 'FAIL'} ({len(self.failed)} failing)")
        return "\n".join(lines) + "\n"


def _suite_thunks(sm, alphas, alpha0):
    alphas = tuple(float(a) for a in alphas)
    grid = tuple(sorted(set(alphas) | {-3.0, -1.0, 0.0, 0.7, 1.0, 3.0}))
    thunks = [
        lambda: check_statistical(sm),
        lambda: check_torsion_free(sm, alphas=alphas),
        lambda: check_duality(sm),
        lambda: check_first_bianchi(sm, alphas=alphas),
        lambda: check_curvature_exchange(sm, alphas=alphas),
        lambda: check_dual_curvature_skew(sm, alphas=alphas),
        lambda: check_dual_curvature_pair_symmetry(sm, alphas=alphas),
        lambda: check_dual_ricci_sum_symmetry(sm, alphas=alphas),
        lambda: check_ricci_closed_form(sm, alphas=alphas),
        lambda: check_ricci_antisym_relation(sm, alphas=alphas),
        lambda: check_ricci_difference_trace(sm),
        lambda: check_equiaffine_consistency(sm, alphas=alphas),
        lambda: check_conjugate_symmetry(sm),
        lambda: check_conjugate_ricci_symmetry(sm),
        lambda: check_constant_curvature(sm),
        lambda: check_recurrent(sm),
        lambda: check_constant_curvature_conjugate(sm),
        lambda: check_theorem_3_1(sm, alpha_grid=grid),
        lambda: check_theorem_3_2(sm, alpha0=alpha0, alpha_grid=grid),
        lambda: check_theorem_4_1(sm),
    ]
    thunks += [lambda a=a: check_equiaffine(sm, alpha=a) for a in alphas]
    if sm.spec.dim == 2:
        thunks.append(lambda: check_prop_3_3(sm))
    return thunks


def run_suite(
    spec: ManifoldSpec,
    sampling: Sampling = Sampling(),
    alphas=(-1.0, 0.0, 1.0),
    alpha0: float = 0.7,
    workers: int = 1,
) -> DiagnosticReport:
    """Run every check; results are ordered by check name, then α."""
    if not alphas:
        raise ValueError("alpha list must be nonempty")
    sm = sample_manifold(spec, sampling)
    thunks = _suite_thunks(sm, alphas, alpha0)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda f: f(), thunks))
    else:
        results = [f() for f in thunks]
    results.sort(key=lambda c: (c.name, c.alpha))
    return DiagnosticReport(spec.name, sampling.seed, sampling.tol, results)
