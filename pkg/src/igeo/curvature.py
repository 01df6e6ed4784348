"""Curvature of the α-connections.

Conventions, used everywhere in the package::

    R(∂_a, ∂_b) ∂_c = R^d_{cab} ∂_d            R[..., d, c, a, b]
    R_{abcd} = g(R(∂_a, ∂_b) ∂_c, ∂_d)           Rlow[..., a, b, c, d]
    Ric_{bc} = Σ_a R^a_{cab}                     (trace over the first slot)

Ricci closed form
-----------------
Writing ``Γ^(α) = Γ° - (α/2)K`` and expanding, the quadratic part of
``R^(α)`` is ``(α²/4) N`` with ``N^d_{cab} = K^d_{am}K^m_{bc} - K^d_{bm}K^m_{ac}``,
and the linear part is odd in α.  Hence

    Ric^(α) = (1+α)/2 Ric + (1-α)/2 Ric* + (1-α²)/4 (T1 - T2)

with ``T1_{bc} = K^a_{mb} K^m_{ac}`` (trace of ``V ↦ K(K(V, Z), Y)``) and
``T2_{bc} = K^a_{am} K^m_{bc}`` (trace of ``V ↦ K(V, K(Y, Z))``).  The
reading with ``Y`` and ``Z`` exchanged inside ``T1`` is kept as
:func:`ricci_alpha_closed_form_swapped`.  Both match the direct curvature:
relabelling the two summed indices shows ``T1`` is itself symmetric, so the
two readings are the same tensor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .manifold import (
    GeometryAtPoint,
    ManifoldSpec,
    christoffel_alpha,
    dchristoffel_alpha,
    geometry_at,
)

__all__ = [
    "CurvatureAtPoint",
    "riemann",
    "ricci_alpha_closed_form",
    "ricci_alpha_closed_form_swapped",
    "ricci_alpha_antisym_relation",
    "constant_curvature_fit",
    "bianchi_residual",
]


@dataclass(frozen=True, eq=False)
class CurvatureAtPoint:
    alpha: float
    R: np.ndarray
    Rlow: np.ndarray
    Ric: np.ndarray


def riemann(geo: GeometryAtPoint, alpha: float) -> CurvatureAtPoint:
    G = christoffel_alpha(geo, alpha)
    dG = dchristoffel_alpha(geo, alpha)  # [a, k, i, j]
    # ∂_a Γ^d_{bc}: dG[a, d, b, c] -> [d, c, a, b]
    t1 = np.einsum("...adbc->...dcab", dG)
    quad = np.einsum("...dam,...mbc->...dcab", G, G)
    R = t1 - np.swapaxes(t1, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    Rlow = np.einsum("...ecab,...ed->...abcd", R, geo.g)
    Ric = np.einsum("...acab->...bc", R)
    return CurvatureAtPoint(float(alpha), R, Rlow, Ric)


def _trace_terms(K: np.ndarray):
    T1 = np.einsum("...amb,...mac->...bc", K, K)
    T2 = np.einsum("...aam,...mbc->...bc", K, K)
    return T1, T2


def ricci_alpha_closed_form(geo, ric_plus, ric_minus, alpha: float) -> np.ndarray:
    """Ric^(α) from Ric, Ric* and the difference tensor alone."""
    T1, T2 = _trace_terms(geo.K)
    return (
        0.5 * (1 + alpha) * ric_plus
        + 0.5 * (1 - alpha) * ric_minus
        + 0.25 * (1 - alpha * alpha) * (T1 - T2)
    )


def ricci_alpha_closed_form_swapped(geo, ric_plus, ric_minus, alpha: float) -> np.ndarray:
    """The competing reading of the trace term, with ``Y`` and ``Z`` exchanged in T1."""
    T1, T2 = _trace_terms(geo.K)
    return (
        0.5 * (1 + alpha) * ric_plus
        + 0.5 * (1 - alpha) * ric_minus
        + 0.25 * (1 - alpha * alpha) * (np.swapaxes(T1, -1, -2) - T2)
    )


def ricci_alpha_antisym_relation(ric_a, ric_ma, ric_plus, ric_minus, alpha: float) -> float:
    """Max-abs of ``Ric^(α) - Ric^(-α) - α (Ric - Ric*)``."""
    r = np.asarray(ric_a) - np.asarray(ric_ma) - alpha * (np.asarray(ric_plus) - np.asarray(ric_minus))
    return float(np.max(np.abs(r))) if r.size else 0.0


def bianchi_residual(curv: CurvatureAtPoint) -> float:
    """Max-abs of the cyclic sum ``R^d_{cab} + R^d_{abc} + R^d_{bca}``."""
    R = curv.R
    cyc = (
        R
        + np.einsum("...dabc->...dcab", R)
        + np.einsum("...dbca->...dcab", R)
    )
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


def _constant_curvature_basis(g: np.ndarray) -> np.ndarray:
    """``g_bc g_ad - g_ac g_bd`` in ``[a, b, c, d]`` layout."""
    return np.einsum("...bc,...ad->...abcd", g, g) - np.einsum("...ac,...bd->...abcd", g, g)


def constant_curvature_fit(spec: ManifoldSpec, points, alpha: float = 1.0):
    """Best constant ``K`` in ``R(X,Y)Z = K{g(Y,Z)X - g(X,Z)Y}`` over ``points``.

    Returns ``(K_hat, residual)`` where the residual is the max-abs
    component mismatch of the lowered curvature at ``K_hat``.  The minimax
    objective is scanned on a grid around the least-squares estimate and then
    refined by golden-section search.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("constant_curvature_fit needs at least 2 points")
    geo = geometry_at(spec, pts)
    Rlow = riemann(geo, alpha).Rlow.ravel()
    B = _constant_curvature_basis(geo.g).ravel()

    def objective(k):
        return float(np.max(np.abs(Rlow - k * B)))

    if not np.any(Rlow) or not np.any(B):
        return 0.0, objective(0.0)
    k_ls = float(Rlow @ B / (B @ B))
    span = max(abs(k_ls), np.max(np.abs(Rlow)) / np.max(np.abs(B)), 1.0)
    grid = k_ls + span * np.linspace(-1.0, 1.0, 41)
    vals = np.array([objective(k) for k in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    best_k, best = grid[i], vals[i]
    if lo < best_k < hi:
        try:
            res = minimize_scalar(
                objective, bracket=(lo, best_k, hi), method="golden", options={"xtol": 1e-14}
            )
        except ValueError:  # flat objective, bracket not strict
            res = None
        if res is not None and res.fun <= best:
            best_k, best = float(res.x), float(res.fun)
    return float(best_k), float(best)
