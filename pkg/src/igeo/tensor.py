"""Small dense tensors with index variance.

Indices are 1-based at this API boundary and 0-based in the underlying
``numpy`` array.  Variance is a string with one character per index,
``'u'`` for upper and ``'l'`` for lower, e.g. ``'ull'`` for Christoffel
symbols stored as ``[k, i, j]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_RANK = 4
MAX_DIM = 8


class VarianceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Tensor:
    data: np.ndarray
    variance: str

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != len(self.variance):
            raise VarianceError(
                f"variance {self.variance!r} does not match rank {data.ndim}"
            )
        if set(self.variance) - {"u", "l"}:
            raise VarianceError(f"variance flags must be 'u' or 'l': {self.variance!r}")
        if data.ndim > MAX_RANK:
            raise ValueError(f"rank {data.ndim} exceeds {MAX_RANK}")
        if data.ndim and len(set(data.shape)) != 1:
            raise ValueError(f"non-square tensor shape {data.shape}")
        if data.ndim and data.shape[0] > MAX_DIM:
            raise ValueError(f"dimension {data.shape[0]} exceeds {MAX_DIM}")

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    def __add__(self, other: "Tensor") -> "Tensor":
        if other.variance != self.variance:
            raise VarianceError("cannot add tensors of different variance")
        return Tensor(self.data + other.data, self.variance)

    def __mul__(self, c: float) -> "Tensor":
        return Tensor(self.data * c, self.variance)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, dim: int, variance: str) -> "Tensor":
        return cls(np.zeros((dim,) * len(variance)), variance)

    @classmethod
    def identity(cls, dim: int) -> "Tensor":
        return cls(np.eye(dim), "ul")


def _axis(t: Tensor, i: int) -> int:
    if not 1 <= i <= t.rank:
        raise IndexError(f"index {i} out of range for rank {t.rank}")
    return i - 1


def contract(t: Tensor, i: int, j: int) -> Tensor:
    """Sum over the diagonal of indices ``i`` and ``j`` (one upper, one lower)."""
    a, b = _axis(t, i), _axis(t, j)
    if a == b:
        raise ValueError("contraction needs two distinct indices")
    if {t.variance[a], t.variance[b]} != {"u", "l"}:
        raise VarianceError("contraction pairs one upper with one lower index")
    data = np.trace(t.data, axis1=a, axis2=b)
    variance = "".join(v for k, v in enumerate(t.variance) if k not in (a, b))
    return Tensor(data, variance)


def raise_lower(t: Tensor, i: int, metric: Tensor) -> Tensor:
    """Flip the variance of index ``i`` using ``g`` (lowering) or ``g^-1`` (raising)."""
    a = _axis(t, i)
    if metric.rank != 2:
        raise ValueError("metric must be rank 2")
    if metric.dim != t.dim:
        raise ValueError("metric dimension does not match tensor")
    want = "ll" if t.variance[a] == "u" else "uu"
    if metric.variance != want:
        raise VarianceError(
            f"flipping a {'n upper' if want == 'll' else ' lower'} index needs a "
            f"metric of variance {want!r}, got {metric.variance!r}"
        )
    moved = np.tensordot(metric.data, t.data, axes=([1], [a]))
    data = np.moveaxis(moved, 0, a)
    flipped = "l" if t.variance[a] == "u" else "u"
    return Tensor(data, t.variance[:a] + flipped + t.variance[a + 1 :])


def trace_g(t: Tensor, i: int, j: int, ginv: Tensor) -> Tensor:
    """Metric trace over two lower indices: raise ``i`` with ``ginv``, then contract."""
    a, b = _axis(t, i), _axis(t, j)
    if t.variance[a] != "l" or t.variance[b] != "l":
        raise VarianceError("trace_g needs two lower indices")
    return contract(raise_lower(t, i, ginv), i, j)


def _perm_list(rank: int, perms) -> list[tuple[int, ...]]:
    if perms is None:
        return list(itertools.permutations(range(rank)))
    out = {tuple(range(rank))}
    for p in perms:
        p = tuple(int(k) - 1 for k in p)
        if sorted(p) != list(range(rank)):
            raise ValueError(f"not a permutation of 1..{rank}: {p}")
        out.add(p)
    return sorted(out)


def sym_residual_array(arr: np.ndarray, perms=None, batch_ndim: int = 0) -> float:
    """Max-abs of ``arr`` minus its average over ``perms`` (plus identity).

    ``perms`` are 1-based permutations of the trailing tensor axes; ``None``
    means the full symmetric group.  Leading ``batch_ndim`` axes are carried
    through untouched.
    """
    arr = np.asarray(arr, dtype=float)
    rank = arr.ndim - batch_ndim
    plist = _perm_list(rank, perms)
    lead = tuple(range(batch_ndim))
    sym = sum(np.transpose(arr, lead + tuple(batch_ndim + k for k in p)) for p in plist)
    sym = sym / len(plist)
    return float(np.max(np.abs(arr - sym))) if arr.size else 0.0


def sym_residual(t: Tensor, perms=None) -> float:
    """Max-abs distance of ``t`` from its symmetrization over ``perms``.

    Permutations are given as 1-based tuples over all indices of ``t``, for
    example ``[(2, 1)]`` for the swap of a rank-2 tensor.  All indices that
    any permutation moves must share variance.
    """
    plist = _perm_list(t.rank, perms)
    for p in plist:
        for k, pk in enumerate(p):
            if t.variance[k] != t.variance[pk]:
                raise VarianceError("permuted indices must share variance")
    return sym_residual_array(t.data, perms)
