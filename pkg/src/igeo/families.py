"""Witness manifolds.

Every builder returns a :class:`~igeo.manifold.ManifoldSpec` whose fields are
expression trees, so downstream derivatives stay jet-exact.

α-conformal structures
----------------------
For ``g = e^φ h`` and the connection

    ∇_X Y = ∇°_X Y + a (dφ(X) Y + dφ(Y) X) - b h(X, Y) grad_h φ,
    a = (1-α)/2,  b = (1+α)/2,

differentiating ``g`` gives

    (∇_X g)(Y, Z) = e^φ [(1 - 2a) dφ(X) h(Y,Z) + (b - a)(dφ(Y) h(X,Z) + dφ(Z) h(X,Y))]
                  = α [dφ(X) g(Y,Z) + dφ(Y) g(Z,X) + dφ(Z) g(X,Y)],

i.e. a recurrent metric with one-form ``ω = α dφ`` in every dimension.
:func:`alpha_conformal` materializes this ``Q`` and then checks it against
the connection evaluated directly from ``h`` and ``φ``.

Normal family
-------------
In ``(μ, σ)`` coordinates the Fisher metric is ``diag(1/σ², 2/σ²)`` and the
skewness tensor ``E[∂_iℓ ∂_jℓ ∂_kℓ]`` has ``Q_112 = 2/σ³``, ``Q_222 = 8/σ³``
and zeros elsewhere.  :func:`fisher_quadrature` recomputes both by
Gauss-Hermite quadrature and is the reference the closed forms are tested
against.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .expr import ScalarField, eval_jet2, parse
from .manifold import (
    ManifoldSpec,
    _spd_mask,
    _assemble_sym2,
    g_pairs,
    q_triples,
    sample_points,
)

__all__ = [
    "RiemannianSpec",
    "BuilderError",
    "euclidean",
    "sphere_chart",
    "exponential_family_from_potential",
    "normal_family",
    "fisher_quadrature",
    "recurrent_from",
    "alpha_conformal",
    "conformal_christoffel",
    "random_spec",
]


class BuilderError(ValueError):
    pass


def _field(v, n: int) -> ScalarField:
    if isinstance(v, ScalarField):
        return v
    return parse(str(v), n)


def _sf(node, n: int) -> ScalarField:
    return ScalarField(node, n)


@dataclass(frozen=True)
class RiemannianSpec:
    """A Riemannian metric ``h`` on a box (cubic form implicitly zero)."""

    dim: int
    domain: tuple[tuple[float, float], ...]
    h: tuple[ScalarField, ...]
    name: str = "riemannian"

    @classmethod
    def from_entries(cls, dim, domain, h: dict, name="riemannian"):
        hd = {tuple(sorted(k - 1 for k in key)): _field(v, dim) for key, v in h.items()}
        hs = tuple(hd.get(p, parse("0", dim)) for p in g_pairs(dim))
        return cls(dim, tuple((float(a), float(b)) for a, b in domain), hs, name)

    @classmethod
    def identity(cls, dim, domain, name="flat"):
        return cls.from_entries(dim, domain, {(i, i): "1" for i in range(1, dim + 1)}, name)

    def as_manifold(self) -> ManifoldSpec:
        zeros = tuple(parse("0", self.dim) for _ in q_triples(self.dim))
        return ManifoldSpec(self.dim, self.domain, self.h, zeros, self.name)


def _check_spd(spec: ManifoldSpec, count=64, seed=0, what="metric"):
    pts = sample_points(spec, count, seed)
    vals = [eval_jet2(f, pts).value for f in spec.g]
    ok = _spd_mask(_assemble_sym2(spec.dim, vals))
    if not np.all(ok):
        k = int(np.flatnonzero(~ok)[0])
        raise BuilderError(f"{what} not positive definite at sample {pts[k].tolist()}")


# ---------------------------------------------------------------------------
# Simple witnesses
# ---------------------------------------------------------------------------


def euclidean(n: int) -> ManifoldSpec:
    if n < 1:
        raise ValueError("n must be >= 1")
    return ManifoldSpec.from_entries(
        n, [(-1.0, 1.0)] * n, {(i, i): "1" for i in range(1, n + 1)}, name=f"euclidean{n}"
    )


def sphere_chart() -> ManifoldSpec:
    """Unit sphere in polar coordinates (Q = 0, constant curvature 1)."""
    return ManifoldSpec.from_entries(
        2, [(0.3, 2.8), (0.0, 3.0)], {(1, 1): "1", (2, 2): "sin(t1)^2"}, name="sphere"
    )


def exponential_family_from_potential(psi, domain, name="expfamily") -> ManifoldSpec:
    """Hessian structure of a convex potential: ``g = ∂²ψ``, ``Q = ∂³ψ``.

    In these (natural) coordinates the α = 1 connection has vanishing
    Christoffel symbols, so the structure is dually flat.
    """
    n = len(domain)
    psi = _field(psi, n)
    first = {i: E.diff(psi, i + 1) for i in range(n)}
    second = {(i, j): E.diff(first[i], j + 1) for i, j in g_pairs(n)}
    g = {(i + 1, j + 1): f for (i, j), f in second.items()}
    Q = {(i + 1, j + 1, k + 1): E.diff(second[(i, j)], k + 1) for i, j, k in q_triples(n)}
    spec = ManifoldSpec.from_entries(n, domain, g, Q, name=name)
    _check_spd(spec, what="Hessian of the potential (convexity)")
    return spec


def normal_family() -> ManifoldSpec:
    """N(μ, σ²) in coordinates ``(t1, t2) = (μ, σ)``."""
    return ManifoldSpec.from_entries(
        2,
        [(-1.0, 1.0), (0.5, 2.0)],
        {(1, 1): "1/t2^2", (2, 2): "2/t2^2"},
        {(1, 1, 2): "2/t2^3", (2, 2, 2): "8/t2^3"},
        name="normal",
    )


def fisher_quadrature(mu: float, sigma: float, nodes: int = 64):
    """Fisher metric and α = 1 cubic form of N(μ, σ²) by Gauss-Hermite quadrature.

    The cubic form is obtained from its connection definition,
    ``Q_ijk = ∂_i g_jk - Γ^(1)_{ij,k} - Γ^(1)_{ik,j}`` with
    ``Γ^(1)_{ij,k} = E[∂_i∂_jℓ ∂_kℓ]`` and
    ``∂_i g_jk = E[∂_i∂_jℓ ∂_kℓ + ∂_jℓ ∂_i∂_kℓ + ∂_iℓ ∂_jℓ ∂_kℓ]``.
    Returns ``(g, Q)`` as arrays of shape (2, 2) and (2, 2, 2).
    """
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / np.sqrt(2.0 * np.pi)
    x = mu + sigma * z
    r = x - mu
    s = sigma
    # score and its derivatives for log N(x; μ, σ) in (μ, σ)
    score = np.stack([r / s**2, -1.0 / s + r**2 / s**3])
    hess = np.empty((2, 2, len(z)))
    hess[0, 0] = -1.0 / s**2
    hess[0, 1] = hess[1, 0] = -2.0 * r / s**3
    hess[1, 1] = 1.0 / s**2 - 3.0 * r**2 / s**4

    def ex(arr):
        return arr @ w

    g = ex(np.einsum("ix,jx->ijx", score, score))
    gamma1 = ex(np.einsum("ijx,kx->ijkx", hess, score))
    T = ex(np.einsum("ix,jx,kx->ijkx", score, score, score))
    # differentiating E[∂_jℓ ∂_kℓ] under the integral sign
    dg = gamma1 + np.einsum("ikj->ijk", gamma1) + T
    Q = dg - gamma1 - np.einsum("ikj->ijk", gamma1)
    return g, Q


# ---------------------------------------------------------------------------
# Recurrent and α-conformal structures
# ---------------------------------------------------------------------------


def _recurrent_q(n, g_nodes, omega_nodes):
    """``Q_ijk = ω_i g_jk + ω_j g_ik + ω_k g_ij`` as trees, keyed by sorted triple."""
    Q = {}
    for i, j, k in q_triples(n):
        terms = [
            E.mul(omega_nodes[i], g_nodes[(j, k)]),
            E.mul(omega_nodes[j], g_nodes[(i, k)]),
            E.mul(omega_nodes[k], g_nodes[(i, j)]),
        ]
        Q[(i + 1, j + 1, k + 1)] = _sf(E.sum_nodes(terms), n)
    return Q


def _full_nodes(n, upper: dict):
    out = {}
    for i, j in itertools.product(range(n), repeat=2):
        out[(i, j)] = upper[tuple(sorted((i, j)))]
    return out


def recurrent_from(g_fields, omega_fields, domain, name="recurrent") -> ManifoldSpec:
    """Statistical manifold with a recurrent metric for the given one-form.

    ``g_fields`` is an n-by-n nested sequence (only the upper triangle is
    read) and ``omega_fields`` has length n; entries are text or fields.
    """
    n = len(domain)
    upper = {(i, j): _field(g_fields[i][j], n).root for i, j in g_pairs(n)}
    omega = [_field(w, n).root for w in omega_fields]
    if len(omega) != n:
        raise BuilderError("one-form needs n components")
    g = {(i + 1, j + 1): _sf(v, n) for (i, j), v in upper.items()}
    Q = _recurrent_q(n, _full_nodes(n, upper), omega)
    spec = ManifoldSpec.from_entries(n, domain, g, Q, name=name)
    _check_spd(spec)
    return spec


def conformal_christoffel(h: RiemannianSpec, phi, alpha: float, p) -> np.ndarray:
    """Christoffel symbols ``[..., k, i, j]`` of the α-conformal connection.

    Evaluated directly from ``h`` and ``φ``:
    ``Γ°(h)^k_ij + a(∂_iφ δ^k_j + ∂_jφ δ^k_i) - b h_ij h^kl ∂_lφ``.
    """
    from .manifold import geometry_at

    n = h.dim
    phi = _field(phi, n)
    geo_h = geometry_at(h.as_manifold(), p)
    dphi = eval_jet2(phi, p).grad
    a, b = 0.5 * (1 - alpha), 0.5 * (1 + alpha)
    eye = np.eye(n)
    grad_h = np.einsum("...kl,...l->...k", geo_h.ginv, dphi)
    return (
        geo_h.gamma0
        + a * (np.einsum("...i,kj->...kij", dphi, eye) + np.einsum("...j,ki->...kij", dphi, eye))
        - b * np.einsum("...ij,...k->...kij", geo_h.g, grad_h)
    )


def alpha_conformal(
    h: RiemannianSpec, phi, alpha: float, name=None, verify_points: int = 32
) -> ManifoldSpec:
    """Statistical manifold α-conformal to ``(h, ∇°)`` through ``φ``.

    ``g = e^φ h`` and ``Q = α (dφ ⊗ g)`` symmetrized; the result is checked
    against ``∇g`` computed from :func:`conformal_christoffel`, including
    total symmetry of that tensor.
    """
    from .manifold import geometry_at, nabla_g

    n = h.dim
    phi = _field(phi, n)
    _check_spd(h.as_manifold(), what="h")
    ephi = E.call("exp", phi.root)
    upper = {(i, j): E.mul(ephi, f.root) for (i, j), f in zip(g_pairs(n), h.h)}
    omega = [E.mul(E.constant(alpha), E.diff(phi, i + 1).root) for i in range(n)]
    g = {(i + 1, j + 1): _sf(v, n) for (i, j), v in upper.items()}
    Q = _recurrent_q(n, _full_nodes(n, upper), omega)
    spec = ManifoldSpec.from_entries(
        n, h.domain, g, Q, name=name or f"{h.name}-conformal[alpha={alpha!r}]"
    )

    pts = sample_points(spec, verify_points, seed=12345)
    geo = geometry_at(spec, pts)
    G = conformal_christoffel(h, phi, alpha, pts)
    if np.max(np.abs(G - np.swapaxes(G, -1, -2))) > 1e-12:
        raise BuilderError("conformal connection has torsion")
    direct = (
        geo.dg
        - np.einsum("...lij,...lk->...ijk", G, geo.g)
        - np.einsum("...lik,...jl->...ijk", G, geo.g)
    )
    scale = 1.0 + np.max(np.abs(direct))
    asym = max(
        np.max(np.abs(direct - np.swapaxes(direct, -1, -2))),
        np.max(np.abs(direct - np.swapaxes(direct, -3, -2))),
    )
    if asym > 1e-9 * scale:
        raise BuilderError(f"∇g of the conformal connection is not totally symmetric ({asym:.3g})")
    mismatch = np.max(np.abs(direct - geo.Qv))
    if mismatch > 1e-9 * scale:
        raise BuilderError(f"materialized cubic form disagrees with ∇g ({mismatch:.3g})")
    if np.max(np.abs(nabla_g(geo, 1.0) - geo.Qv)) > 1e-9 * scale:
        raise BuilderError("statistical consistency failed")
    return spec


# ---------------------------------------------------------------------------
# Random generic specs
# ---------------------------------------------------------------------------


def _monomials(n: int, degree: int):
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            exps = [0] * n
            for c in combo:
                exps[c] += 1
            out.append(tuple(exps))
    return out


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0.0) + ca * cb
    return out


def _poly_text(poly: dict) -> str:
    terms = []
    for e in sorted(poly, key=lambda e: (sum(e), tuple(-x for x in e))):
        c = poly[e]
        if c == 0.0:
            continue
        factors = []
        for i, k in enumerate(e):
            if k == 1:
                factors.append(f"t{i + 1}")
            elif k > 1:
                factors.append(f"t{i + 1}^{k}")
        mag = repr(abs(c))
        body = "*".join(([] if factors and abs(c) == 1.0 else [mag]) + factors)
        terms.append(("-" if c < 0 else "+", body))
    if not terms:
        return "0"
    sign, body = terms[0]
    text = ("-" if sign == "-" else "") + body
    for sign, body in terms[1:]:
        text += f" {sign} {body}"
    return text


def random_spec(dim: int, seed: int, degree: int = 2, amplitude: float = 0.3) -> ManifoldSpec:
    """Generic statistical manifold with polynomial fields on ``[-0.5, 0.5]^dim``.

    ``g = L Lᵀ + I`` with polynomial entries of ``L`` and independent
    polynomial ``Q`` entries, all coefficients uniform in
    ``[-amplitude, amplitude]`` from a seeded generator.
    """
    if not 2 <= dim <= 5:
        raise ValueError("random_spec supports dim in [2, 5]")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    rng = np.random.default_rng(seed)
    monos = _monomials(dim, degree)

    def rand_poly():
        coeffs = rng.uniform(-amplitude, amplitude, size=len(monos))
        return {m: float(c) for m, c in zip(monos, coeffs) if c != 0.0}

    L = [[rand_poly() for _ in range(dim)] for _ in range(dim)]
    q_polys = [rand_poly() for _ in q_triples(dim)]
    g = {}
    const = tuple([0] * dim)
    for i, j in g_pairs(dim):
        acc: dict = {}
        for k in range(dim):
            for e, c in _poly_mul(L[i][k], L[j][k]).items():
                acc[e] = acc.get(e, 0.0) + c
        if i == j:
            acc[const] = acc.get(const, 0.0) + 1.0
        g[(i + 1, j + 1)] = _poly_text(acc)
    Q = {(i + 1, j + 1, k + 1): _poly_text(p) for (i, j, k), p in zip(q_triples(dim), q_polys)}
    return ManifoldSpec.from_entries(
        dim, [(-0.5, 0.5)] * dim, g, Q, name=f"random-d{dim}-s{seed}"
    )
