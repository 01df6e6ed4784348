"""Statistical manifolds on a single coordinate chart.

A manifold is given by a metric ``g`` and a totally symmetric cubic form
``Q = ∇g``.  The primal connection is recovered as ``Γ° - K/2`` where ``Γ°``
is Levi-Civita of ``g`` and ``K^k_ij = g^kl Q_lij`` is the difference tensor
``∇* - ∇``.  The one-parameter family is

    Γ^(α) = Γ° - (α/2) K,

so α = 1 is the primal connection, α = -1 its dual and α = 0 Levi-Civita.

All pointwise arrays carry an optional leading batch axis so that one jet
sweep covers every sampled point.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .expr import DomainError, ParseError, ScalarField, eval_jet2, parse, to_text

__all__ = [
    "ManifoldSpec",
    "ManifoldFormatError",
    "SPDError",
    "GeometryAtPoint",
    "ValidationReport",
    "sample_points",
    "validate",
    "geometry_at",
    "christoffel_alpha",
    "dchristoffel_alpha",
    "nabla_g",
    "load_manifold",
    "loads_manifold",
    "dumps_manifold",
    "g_pairs",
    "q_triples",
]

PIVOT_RATIO = 1e-10


class ManifoldFormatError(ValueError):
    """Malformed manifold file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class SPDError(ValueError):
    def __init__(self, message: str, point_index=None):
        super().__init__(message)
        self.point_index = point_index


def g_pairs(n: int) -> list[tuple[int, int]]:
    return list(itertools.combinations_with_replacement(range(n), 2))


def q_triples(n: int) -> list[tuple[int, int, int]]:
    return list(itertools.combinations_with_replacement(range(n), 3))


def _zero(n: int) -> ScalarField:
    return parse("0", n)


@dataclass(frozen=True)
class ManifoldSpec:
    """Metric and cubic form fields on a box-shaped chart.

    ``g`` holds the upper-triangular entries in :func:`g_pairs` order and
    ``Q`` the sorted-triple entries in :func:`q_triples` order, so symmetry
    of both is structural.
    """

    dim: int
    domain: tuple[tuple[float, float], ...]
    g: tuple[ScalarField, ...]
    Q: tuple[ScalarField, ...]
    name: str = "manifold"

    def __post_init__(self):
        n = self.dim
        if n < 1:
            raise ValueError("dim must be >= 1")
        if len(self.domain) != n:
            raise ValueError("domain needs one interval per coordinate")
        for a, b in self.domain:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"empty or degenerate domain interval [{a}, {b}]")
        if len(self.g) != len(g_pairs(n)) or len(self.Q) != len(q_triples(n)):
            raise ValueError("wrong number of metric or cubic-form entries")
        for f in self.g + self.Q:
            if f.dim != n:
                raise ValueError("field bound to a different chart dimension")

    @classmethod
    def from_entries(cls, dim, domain, g: dict, Q: dict | None = None, name="manifold"):
        """Build from ``{(i, j): expr}`` / ``{(i, j, k): expr}`` with 1-based keys.

        Keys may be given in any order; they are sorted.  Values may be text
        or :class:`ScalarField`.  Missing entries are zero.
        """
        def field_of(v):
            return v if isinstance(v, ScalarField) else parse(str(v), dim)

        gd = {tuple(sorted(k - 1 for k in key)): field_of(v) for key, v in g.items()}
        qd = {tuple(sorted(k - 1 for k in key)): field_of(v) for key, v in (Q or {}).items()}
        gs = tuple(gd.get(p, _zero(dim)) for p in g_pairs(dim))
        qs = tuple(qd.get(t, _zero(dim)) for t in q_triples(dim))
        dom = tuple((float(a), float(b)) for a, b in domain)
        return cls(dim, dom, gs, qs, name)

    def g_field(self, i: int, j: int) -> ScalarField:
        """Entry ``g_ij`` (0-based)."""
        return self.g[g_pairs(self.dim).index(tuple(sorted((i, j))))]

    def q_field(self, i: int, j: int, k: int) -> ScalarField:
        return self.Q[q_triples(self.dim).index(tuple(sorted((i, j, k))))]

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.domain])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b for _, b in self.domain])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all((p >= self.lower) & (p <= self.upper), axis=-1)


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

_LINE = re.compile(r"^\s*(?P<key>[A-Za-z][A-Za-z0-9 ]*?)\s*=\s*(?P<value>.*?)\s*$")
_INTERVAL = re.compile(r"\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]")


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0]


def loads_manifold(text: str) -> ManifoldSpec:
    """Parse the line-oriented manifold format."""
    seen: dict[str, int] = {}
    header: dict[str, tuple[str, int]] = {}
    g_lines: list[tuple[tuple[int, ...], str, int]] = []
    q_lines: list[tuple[tuple[int, ...], str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        m = _LINE.match(line)
        if m is None:
            raise ManifoldFormatError(f"expected '<key> = <value>', got {raw.strip()!r}", lineno)
        key = " ".join(m.group("key").split())
        value = m.group("value")
        if key in seen:
            raise ManifoldFormatError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        parts = key.split()
        if parts[0] in ("dim", "name", "domain") and len(parts) == 1:
            header[parts[0]] = (value, lineno)
        elif parts[0] in ("g", "Q"):
            want = 2 if parts[0] == "g" else 3
            if len(parts) != want + 1 or not all(p.isdigit() for p in parts[1:]):
                raise ManifoldFormatError(f"{parts[0]} needs {want} integer indices", lineno)
            idx = tuple(int(p) for p in parts[1:])
            if list(idx) != sorted(idx):
                raise ManifoldFormatError(
                    f"index order: {parts[0]} indices must be non-decreasing, got {idx}", lineno
                )
            (g_lines if parts[0] == "g" else q_lines).append((idx, value, lineno))
        else:
            raise ManifoldFormatError(f"unknown key {key!r}", lineno)

    if "dim" not in header:
        raise ManifoldFormatError("missing 'dim'")
    dim_text, dim_line = header["dim"]
    try:
        n = int(dim_text)
    except ValueError:
        raise ManifoldFormatError(f"dim must be an integer, got {dim_text!r}", dim_line) from None
    if n < 1:
        raise ManifoldFormatError("dim must be >= 1", dim_line)

    if "domain" not in header:
        raise ManifoldFormatError("missing 'domain'")
    dom_text, dom_line = header["domain"]
    intervals = _INTERVAL.findall(dom_text)
    leftover = _INTERVAL.sub("", dom_text).strip()
    if len(intervals) != n or leftover:
        raise ManifoldFormatError(f"domain needs {n} intervals '[a, b]'", dom_line)
    try:
        domain = tuple((float(a), float(b)) for a, b in intervals)
    except ValueError:
        raise ManifoldFormatError("domain bounds must be numbers", dom_line) from None
    for a, b in domain:
        if not a < b:
            raise ManifoldFormatError(f"empty domain interval [{a}, {b}]", dom_line)

    def field_at(value, lineno):
        try:
            return parse(value, n)
        except ParseError as exc:
            raise ManifoldFormatError(str(exc), lineno) from None

    g: dict = {}
    for idx, value, lineno in g_lines:
        if max(idx) > n or min(idx) < 1:
            raise ManifoldFormatError(f"index out of range for dim {n}: {idx}", lineno)
        g[idx] = field_at(value, lineno)
    Q: dict = {}
    for idx, value, lineno in q_lines:
        if max(idx) > n or min(idx) < 1:
            raise ManifoldFormatError(f"index out of range for dim {n}: {idx}", lineno)
        Q[idx] = field_at(value, lineno)

    name = header.get("name", ("manifold", 0))[0]
    return ManifoldSpec.from_entries(n, domain, g, Q, name=name)


def load_manifold(path) -> ManifoldSpec:
    with open(path, encoding="utf-8") as fh:
        return loads_manifold(fh.read())


def dumps_manifold(spec: ManifoldSpec) -> str:
    """Canonical text form; zero entries are omitted."""
    lines = [
        f"dim = {spec.dim}",
        f"name = {spec.name}",
        "domain = " + " ".join(f"[{a!r}, {b!r}]" for a, b in spec.domain),
    ]
    for (i, j), f in zip(g_pairs(spec.dim), spec.g):
        if not f.is_zero:
            lines.append(f"g {i + 1} {j + 1} = {to_text(f.root)}")
    for (i, j, k), f in zip(q_triples(spec.dim), spec.Q):
        if not f.is_zero:
            lines.append(f"Q {i + 1} {j + 1} {k + 1} = {to_text(f.root)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Sampling and validation
# ---------------------------------------------------------------------------


def sample_points(spec: ManifoldSpec, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in the domain box, shape ``(count, n)``."""
    if count < 1:
        raise ValueError("sample count must be >= 1")
    unit = qmc.Halton(d=spec.dim, scramble=True, seed=seed).random(count)
    return qmc.scale(unit, spec.lower, spec.upper) if spec.dim > 0 else unit


def _eval_entries(fields, pts):
    return [eval_jet2(f, pts) for f in fields]


def _spd_mask(g: np.ndarray) -> np.ndarray:
    """Pointwise SPD test with the pivot-ratio guard, over any batch shape."""
    n = g.shape[-1]
    flat = g.reshape(-1, n, n)
    ok = np.zeros(len(flat), dtype=bool)
    finite = np.flatnonzero(np.all(np.isfinite(flat), axis=(1, 2)))
    try:
        L = np.linalg.cholesky(flat[finite])
    except np.linalg.LinAlgError:
        # some matrix is indefinite; find which ones one at a time
        L = np.zeros((len(finite), n, n))
        for k, m in enumerate(flat[finite]):
            try:
                L[k] = np.linalg.cholesky(m)
            except np.linalg.LinAlgError:
                pass
    piv = np.diagonal(L, axis1=-2, axis2=-1) ** 2
    ok[finite] = (piv.min(axis=-1) >= PIVOT_RATIO * piv.max(axis=-1)) & (piv.max(axis=-1) > 0)
    return ok.reshape(g.shape[:-2])


@dataclass
class ValidationReport:
    name: str
    points: np.ndarray
    spd: np.ndarray
    errors: list = field(default_factory=list)
    domain_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.domain_ok and not self.errors and bool(np.all(self.spd))

    def lines(self) -> list[str]:
        out = [
            f"manifold: {self.name}",
            f"domain box: {'ok' if self.domain_ok else 'FAIL'}",
            f"sampled points: {len(self.points)}",
            f"metric SPD: {int(np.sum(self.spd))}/{len(self.spd)}",
        ]
        for k in np.flatnonzero(~self.spd):
            if not any(e[0] == k for e in self.errors):
                out.append(f"  point {k} {_fmt_point(self.points[k])}: metric not positive definite")
        for k, msg in self.errors:
            out.append(f"  point {k} {_fmt_point(self.points[k])}: {msg}")
        out.append("result: " + ("PASS" if self.ok else "FAIL"))
        return out


def _fmt_point(p) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in p) + ")"


def validate(spec: ManifoldSpec, sample_count: int = 200, seed: int = 0) -> ValidationReport:
    """Check metric positivity and evaluability at low-discrepancy samples.

    Evaluation failures are reported per point instead of raised.
    """
    pts = sample_points(spec, sample_count, seed)
    spd = np.zeros(len(pts), dtype=bool)
    errors = []
    fields = spec.g + spec.Q
    try:
        jets = _eval_entries(fields, pts)
        bad_rows = set()
    except DomainError:
        jets = None
        bad_rows = None
    if jets is None:
        for k, p in enumerate(pts):
            try:
                for f in fields:
                    eval_jet2(f, p)
            except DomainError as exc:
                errors.append((k, str(exc)))
        bad_rows = {k for k, _ in errors}
        good = [k for k in range(len(pts)) if k not in bad_rows]
        if good:
            gj = _eval_entries(spec.g, pts[good])
            spd[good] = _spd_mask(_assemble_sym2(spec.dim, [j.value for j in gj]))
    else:
        gvals = [j.value for j in jets[: len(spec.g)]]
        spd = _spd_mask(_assemble_sym2(spec.dim, gvals))
        nonfinite = ~np.all(np.isfinite(np.stack([j.value for j in jets], axis=-1)), axis=-1)
        for k in np.flatnonzero(nonfinite):
            errors.append((int(k), "non-finite field value"))
    return ValidationReport(spec.name, pts, spd, errors, domain_ok=True)


# ---------------------------------------------------------------------------
# Pointwise geometry
# ---------------------------------------------------------------------------


def _assemble_sym2(n, values):
    batch = np.shape(values[0])
    out = np.zeros(batch + (n, n))
    for (i, j), v in zip(g_pairs(n), values):
        out[..., i, j] = v
        out[..., j, i] = v
    return out


def _assemble_sym3(n, values):
    batch = np.shape(values[0])
    out = np.zeros(batch + (n, n, n))
    for (i, j, k), v in zip(q_triples(n), values):
        for a, b, c in set(itertools.permutations((i, j, k))):
            out[..., a, b, c] = v
    return out


@dataclass(frozen=True, eq=False)
class GeometryAtPoint:
    """Cached connection data at one point or a batch of points.

    Index layout (after any leading batch axes):

    ``dg[a, j, k] = ∂_a g_jk``; ``d2g[a, b, j, k] = ∂_a ∂_b g_jk``;
    ``Qv[i, j, k] = Q_ijk``; ``dQ[a, i, j, k] = ∂_a Q_ijk``;
    ``gamma0[k, i, j] = Γ°^k_ij`` and ``dgamma0[a, k, i, j] = ∂_a Γ°^k_ij``;
    ``K`` and ``dK`` follow the Christoffel layout.
    """

    p: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    Qv: np.ndarray
    dQ: np.ndarray
    gamma0: np.ndarray
    dgamma0: np.ndarray
    K: np.ndarray
    dK: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[-1]

    @property
    def batch_shape(self) -> tuple:
        return self.g.shape[:-2]

    @property
    def dginv(self) -> np.ndarray:
        """``∂_a g^jk = -g^jm ∂_a g_mn g^nk``."""
        return -np.einsum("...jm,...amn,...nk->...ajk", self.ginv, self.dg, self.ginv)

    def point(self, k: int) -> "GeometryAtPoint":
        """The ``k``-th point of a batched geometry."""
        return GeometryAtPoint(**{name: getattr(self, name)[k] for name in _GEO_FIELDS})


_GEO_FIELDS = ("p", "g", "ginv", "dg", "d2g", "Qv", "dQ", "gamma0", "dgamma0", "K", "dK")


def geometry_at(spec: ManifoldSpec, p) -> GeometryAtPoint:
    """Evaluate metric and cubic-form jets at ``p`` and derive connection data.

    ``p`` is one point ``(n,)`` or a batch ``(N, n)``.  Raises
    :class:`SPDError` if the metric is not safely positive definite at any
    point, and :class:`~igeo.expr.DomainError` if a field cannot be
    evaluated.
    """
    n = spec.dim
    pts = np.asarray(p, dtype=float)
    if pts.shape[-1] != n:
        raise ValueError(f"point dimension {pts.shape[-1]} != {n}")
    gj = _eval_entries(spec.g, pts)
    qj = _eval_entries(spec.Q, pts)

    g = _assemble_sym2(n, [j.value for j in gj])
    ok = _spd_mask(g)
    if not np.all(ok):
        bad = int(np.flatnonzero(np.atleast_1d(~ok))[0])
        raise SPDError(
            "metric is not positive definite (or nearly singular)"
            + (f" at point {bad}" if pts.ndim > 1 else ""),
            bad if pts.ndim > 1 else None,
        )
    # derivative index first, then the tensor indices
    dg = np.moveaxis(_assemble_sym2_grad(n, [j.grad for j in gj]), -1, -3)
    d2g = _assemble_sym2_hess(n, [j.hess for j in gj])
    Qv = _assemble_sym3(n, [j.value for j in qj])
    dQ = np.moveaxis(_assemble_sym3_grad(n, [j.grad for j in qj]), -1, -4)

    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, -1, -2))
    dginv = -np.einsum("...jm,...amn,...nk->...ajk", ginv, dg, ginv)

    # first-kind symbols C_ijl = ½(∂_i g_jl + ∂_j g_il - ∂_l g_ij)
    C = 0.5 * (dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1))
    dC = 0.5 * (d2g + np.swapaxes(d2g, -3, -2) - np.moveaxis(d2g, -3, -1))
    gamma0 = np.einsum("...kl,...ijl->...kij", ginv, C)
    dgamma0 = np.einsum("...akl,...ijl->...akij", dginv, C) + np.einsum(
        "...kl,...aijl->...akij", ginv, dC
    )
    K = np.einsum("...kl,...lij->...kij", ginv, Qv)
    dK = np.einsum("...akl,...lij->...akij", dginv, Qv) + np.einsum(
        "...kl,...alij->...akij", ginv, dQ
    )
    return GeometryAtPoint(pts, g, ginv, dg, d2g, Qv, dQ, gamma0, dgamma0, K, dK)


def _assemble_sym2_grad(n, grads):
    """Entries' gradients into ``[..., j, k, a]``."""
    batch = np.shape(grads[0])[:-1]
    out = np.zeros(batch + (n, n, n))
    for (i, j), v in zip(g_pairs(n), grads):
        out[..., i, j, :] = v
        out[..., j, i, :] = v
    return out


def _assemble_sym2_hess(n, hessians):
    """Entries' Hessians into ``[..., a, b, j, k]``."""
    batch = np.shape(hessians[0])[:-2]
    out = np.zeros(batch + (n, n, n, n))
    for (i, j), h in zip(g_pairs(n), hessians):
        out[..., :, :, i, j] = h
        out[..., :, :, j, i] = h
    return out


def _assemble_sym3_grad(n, grads):
    batch = np.shape(grads[0])[:-1]
    out = np.zeros(batch + (n, n, n, n))
    for (i, j, k), v in zip(q_triples(n), grads):
        for a, b, c in set(itertools.permutations((i, j, k))):
            out[..., a, b, c, :] = v
    return out


def christoffel_alpha(geo: GeometryAtPoint, alpha: float) -> np.ndarray:
    """``Γ^(α)k_ij = Γ°^k_ij - (α/2) K^k_ij`` in ``[..., k, i, j]`` layout."""
    if alpha == 0:
        return geo.gamma0.copy()
    return geo.gamma0 - 0.5 * alpha * geo.K


def dchristoffel_alpha(geo: GeometryAtPoint, alpha: float) -> np.ndarray:
    """``∂_a Γ^(α)k_ij`` in ``[..., a, k, i, j]`` layout."""
    if alpha == 0:
        return geo.dgamma0.copy()
    return geo.dgamma0 - 0.5 * alpha * geo.dK


def nabla_g(geo: GeometryAtPoint, alpha: float) -> np.ndarray:
    """``(∇^(α)_i g)_jk = ∂_i g_jk - Γ^l_ij g_lk - Γ^l_ik g_jl``.

    Equals ``α Q_ijk`` for a statistical manifold.
    """
    G = christoffel_alpha(geo, alpha)
    return (
        geo.dg
        - np.einsum("...lij,...lk->...ijk", G, geo.g)
        - np.einsum("...lik,...jl->...ijk", G, geo.g)
    )
