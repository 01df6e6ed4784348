"""Parallel volume forms of the α-connections (α-parallel priors).

A volume form ``f dθ¹∧…∧dθⁿ`` is parallel for a torsion-free connection
exactly when ``∂_i log f = τ_i`` with ``τ_i = Γ^k_{ki}``.  When ``dτ = 0``
on the chart, ``log f`` is the line integral of ``τ`` from a base point; at
α = 0 it reduces to ``½ log det g`` up to a constant (Jeffreys).
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .expr import eval_jet2
from .manifold import (
    ManifoldSpec,
    SPDError,
    _assemble_sym2,
    _assemble_sym2_grad,
    _assemble_sym3,
    _spd_mask,
    christoffel_alpha,
    dchristoffel_alpha,
    geometry_at,
)

__all__ = [
    "NotEquiaffineError",
    "PriorGrid",
    "tau",
    "tau_at",
    "dtau",
    "closedness",
    "line_integral",
    "parallel_volume",
    "path_independence_probe",
]

GL_ORDER = 10
MAX_DEPTH = 40


class NotEquiaffineError(ValueError):
    pass


def tau(geo, alpha: float) -> np.ndarray:
    """Trace one-form ``τ_i = Γ^(α)k_{ki}``."""
    return np.einsum("...kki->...i", christoffel_alpha(geo, alpha))


def dtau(geo, alpha: float) -> np.ndarray:
    """``∂_a τ_i`` in ``[..., a, i]`` layout (jet-exact)."""
    return np.einsum("...akki->...ai", dchristoffel_alpha(geo, alpha))


def closedness(geo, alpha: float) -> np.ndarray:
    """Pointwise max-abs of ``∂_i τ_j - ∂_j τ_i``."""
    d = dtau(geo, alpha)
    anti = np.abs(d - np.swapaxes(d, -1, -2))
    return anti.reshape(anti.shape[:-2] + (-1,)).max(axis=-1)


def tau_at(spec: ManifoldSpec, alpha: float, pts) -> np.ndarray:
    """``τ`` at a batch of points from first-order jets of g and values of Q.

    Uses ``Γ^k_{ki} = ½ g^{kl} ∂_i g_kl - (α/2) g^{kl} Q_{lki}``; cheaper
    than a full :func:`geometry_at` when only the trace is needed.
    """
    n = spec.dim
    pts = np.asarray(pts, dtype=float)
    gj = [eval_jet2(f, pts, order=1) for f in spec.g]
    g = _assemble_sym2(n, [j.value for j in gj])
    ok = _spd_mask(g)
    if not np.all(ok):
        raise SPDError("metric is not positive definite along the path")
    ginv = np.linalg.inv(g)
    dg = _assemble_sym2_grad(n, [j.grad for j in gj])  # [..., k, l, i]
    out = 0.5 * np.einsum("...kl,...kli->...i", ginv, dg)
    if alpha != 0 and not all(q.is_zero for q in spec.Q):
        Q = _assemble_sym3(n, [eval_jet2(f, pts, order=0).value for f in spec.Q])
        out = out - 0.5 * alpha * np.einsum("...kl,...lki->...i", ginv, Q)
    return out


# ---------------------------------------------------------------------------
# Line integrals
# ---------------------------------------------------------------------------

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


def _gl_on(spec, alpha, starts, ends, s0, s1):
    """Gauss-Legendre estimate of ∫ τ·(end-start) ds over [s0, s1] per row."""
    half = 0.5 * (s1 - s0)
    mid = 0.5 * (s1 + s0)
    s = mid[:, None] + half[:, None] * _NODES[None, :]  # (m, q)
    delta = ends - starts
    pts = starts[:, None, :] + s[..., None] * delta[:, None, :]
    n = spec.dim
    t = tau_at(spec, alpha, pts.reshape(-1, n)).reshape(pts.shape)
    integrand = np.einsum("mqi,mi->mq", t, delta)
    return half * (integrand @ _WEIGHTS)


def line_integral(spec: ManifoldSpec, alpha: float, starts, ends, tol: float = 1e-10):
    """Integrals of ``τ`` along straight segments, adaptive Gauss-Legendre.

    ``starts`` and ``ends`` have shape ``(m, n)``.  Each interval is accepted
    when its estimate agrees with the sum over its two halves to within
    ``tol`` scaled by the interval's share of the segment; otherwise it is
    bisected.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    total = np.zeros(len(starts))
    active = np.flatnonzero(np.any(starts != ends, axis=1))
    seg = active
    s0 = np.zeros(len(seg))
    s1 = np.ones(len(seg))
    coarse = _gl_on(spec, alpha, starts[seg], ends[seg], s0, s1) if len(seg) else np.zeros(0)
    for depth in range(MAX_DEPTH):
        if not len(seg):
            break
        mid = 0.5 * (s0 + s1)
        both = _gl_on(
            spec,
            alpha,
            np.concatenate([starts[seg], starts[seg]]),
            np.concatenate([ends[seg], ends[seg]]),
            np.concatenate([s0, mid]),
            np.concatenate([mid, s1]),
        )
        left, right = both[: len(seg)], both[len(seg) :]
        fine = left + right
        done = np.abs(fine - coarse) <= tol * (s1 - s0) + 1e-300
        if depth == MAX_DEPTH - 1:
            done[:] = True
        np.add.at(total, seg[done], fine[done])
        keep = ~done
        seg = np.concatenate([seg[keep], seg[keep]])
        s0, s1 = np.concatenate([s0[keep], mid[keep]]), np.concatenate([mid[keep], s1[keep]])
        coarse = np.concatenate([left[keep], right[keep]])
    return total


def _axis_path_integral(spec, alpha, p, q, order, tol):
    """∫ τ along the axis-aligned polyline from ``p`` to ``q`` in ``order``."""
    cur = np.array(p, dtype=float)
    starts, ends = [], []
    for k in order:
        nxt = cur.copy()
        nxt[k] = q[k]
        starts.append(cur)
        ends.append(nxt)
        cur = nxt
    return float(np.sum(line_integral(spec, alpha, starts, ends, tol)))


def path_independence_probe(spec: ManifoldSpec, alpha: float, p, q, tol: float = 1e-10) -> float:
    """Gap between the axis-order and reverse-axis-order integrals from p to q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    order = list(range(spec.dim))
    a = _axis_path_integral(spec, alpha, p, q, order, tol)
    b = _axis_path_integral(spec, alpha, p, q, order[::-1], tol)
    return abs(a - b)


# ---------------------------------------------------------------------------
# Prior on a lattice
# ---------------------------------------------------------------------------


@dataclass
class PriorGrid:
    alpha: float
    base_point: np.ndarray
    axes: list
    log_f: np.ndarray  # lattice shaped, one axis per coordinate
    closedness_residual: float
    log_normalizer: float | None = field(default=None)

    @property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def density(self) -> np.ndarray:
        return np.exp(self.log_f)

    def to_csv(self) -> str:
        buf = io.StringIO()
        n = len(self.axes)
        buf.write(",".join([f"t{i + 1}" for i in range(n)] + ["log_f"]) + "\n")
        for row, v in zip(self.points, self.log_f.ravel()):
            buf.write(",".join(format(x, ".17g") for x in (*row, v)) + "\n")
        return buf.getvalue()


def _lattice_axes(spec: ManifoldSpec, counts):
    if np.isscalar(counts):
        counts = [int(counts)] * spec.dim
    counts = [int(c) for c in counts]
    if len(counts) != spec.dim:
        raise ValueError(f"grid needs {spec.dim} per-axis counts")
    if min(counts) < 2:
        raise ValueError("grid counts must be >= 2")
    return [np.linspace(a, b, c) for (a, b), c in zip(spec.domain, counts)]


def _stage_integrals(spec, alpha, prefixes, base, k, values, tol):
    """Integrals along axis ``k`` from ``base[k]`` to each of ``values``.

    ``prefixes`` (M, k) fixes the first k coordinates; coordinates after k
    sit at the base point.  Returns an (M, len(values)) array.
    """
    bps = np.unique(np.concatenate([values, [base[k]]]))
    ib = int(np.searchsorted(bps, base[k]))
    M, J = len(prefixes), len(bps) - 1
    tail = np.broadcast_to(base[k + 1 :], (M, spec.dim - k - 1))
    starts = np.concatenate(
        [np.repeat(prefixes, J, axis=0), np.tile(bps[:-1], M)[:, None], np.repeat(tail, J, axis=0)],
        axis=1,
    )
    ends = starts.copy()
    ends[:, k] = np.tile(bps[1:], M)
    chunks = line_integral(spec, alpha, starts, ends, tol).reshape(M, J)
    cum = np.concatenate([np.zeros((M, 1)), np.cumsum(chunks, axis=1)], axis=1)
    to_bp = cum - cum[:, ib : ib + 1]
    return to_bp[:, np.searchsorted(bps, values)]


def parallel_volume(
    spec: ManifoldSpec,
    alpha: float,
    base_point=None,
    grid=20,
    tol: float = 1e-8,
    quad_tol: float = 1e-10,
    normalize: bool = False,
) -> PriorGrid:
    """Log density of the ∇^(α)-parallel volume form on a lattice.

    ``log_f`` is the integral of ``τ`` along the polyline from the base point
    that moves coordinate 1 first, then 2, and so on, normalized so the base
    point has ``log_f = 0``.  Raises :class:`NotEquiaffineError` when the
    closedness residual of ``τ`` over the lattice exceeds ``tol``; with
    ``normalize`` the density is divided by its trapezoid integral over the
    lattice box.
    """
    axes = _lattice_axes(spec, grid)
    base = spec.center if base_point is None else np.asarray(base_point, dtype=float)
    if base.shape != (spec.dim,):
        raise ValueError(f"base point needs {spec.dim} coordinates")
    if not spec.contains(base):
        raise ValueError("base point outside the domain")

    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    resid = float(np.max(closedness(geometry_at(spec, mesh), alpha)))
    if resid > tol:
        raise NotEquiaffineError(
            f"not equiaffine at alpha={alpha!r}: closedness residual {resid:.3e} > {tol:.1e}"
        )

    log_f = np.zeros(())
    prefixes = np.zeros((1, 0))
    for k, values in enumerate(axes):
        stage = _stage_integrals(spec, alpha, prefixes, base, k, values, quad_tol)
        log_f = log_f[..., None] + stage.reshape(log_f.shape + (len(values),))
        prefixes = np.concatenate(
            [np.repeat(prefixes, len(values), axis=0), np.tile(values, len(prefixes))[:, None]],
            axis=1,
        )

    out = PriorGrid(float(alpha), base, axes, log_f, resid)
    if normalize:
        z = out.density()
        for ax in reversed(axes):
            z = trapezoid(z, ax, axis=-1)
        out.log_normalizer = float(np.log(z))
        out.log_f = out.log_f - out.log_normalizer
    return out
