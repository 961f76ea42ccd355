"""Sparse real vectors, signed walker ensembles, and the small amount of
linear algebra the solvers need on them."""

from __future__ import annotations

import math
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import DimensionError

# |x| below this is treated as an exact cancellation after arithmetic
PRUNE_THRESHOLD = 1e-30


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class SparseVector:
    """Real vector of dimension ``dim`` stored as sorted (index, value) pairs.

    Indices are strictly increasing and no stored value is zero.  Instances
    are immutable; the arrays are read-only views.
    """

    __slots__ = ("indices", "values", "dim")

    def __init__(self, indices, values, dim: int, *, check: bool = True):
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if check:
            if idx.ndim != 1 or idx.shape != val.shape:
                raise ValueError("indices and values must be 1-d arrays of equal length")
            if idx.size:
                if np.any(np.diff(idx) <= 0):
                    order = np.argsort(idx, kind="stable")
                    idx, val = idx[order], val[order]
                    if np.any(np.diff(idx) == 0):
                        raise ValueError("duplicate indices")
                if idx[0] < 0 or idx[-1] >= dim:
                    raise DimensionError(f"index out of range for dim {dim}")
            keep = val != 0.0
            if not keep.all():
                idx, val = idx[keep], val[keep]
        if idx.flags.writeable:
            idx = _frozen(idx.copy())
        if val.flags.writeable:
            val = _frozen(val.copy())
        self.indices = idx
        self.values = val
        self.dim = int(dim)

    @classmethod
    def zeros(cls, dim: int) -> "SparseVector":
        return cls(np.empty(0, np.int64), np.empty(0), dim, check=False)

    @classmethod
    def basis(cls, k: int, dim: int, value: float = 1.0) -> "SparseVector":
        return cls([k], [value], dim)

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.size, check=False)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int) -> "SparseVector":
        pairs = list(pairs)
        if not pairs:
            return cls.zeros(dim)
        idx, val = zip(*pairs)
        return cls(idx, val, dim)

    @classmethod
    def _accumulate(cls, rows: np.ndarray, weights: np.ndarray, dim: int) -> "SparseVector":
        """Sum ``weights`` into bins ``rows``; bins are filled in input order."""
        if rows.size == 0:
            return cls.zeros(dim)
        uniq, inv = np.unique(rows, return_inverse=True)
        sums = np.bincount(inv, weights=weights, minlength=uniq.size)
        keep = np.abs(sums) >= PRUNE_THRESHOLD
        return cls(uniq[keep], sums[keep], dim, check=False)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def get(self, k: int) -> float:
        pos = np.searchsorted(self.indices, k)
        if pos < self.indices.size and self.indices[pos] == k:
            return float(self.values[pos])
        return 0.0

    def scaled(self, c: float) -> "SparseVector":
        if c == 0:
            return SparseVector.zeros(self.dim)
        return SparseVector(self.indices, self.values * c, self.dim, check=False)

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self):
        return zip(self.indices.tolist(), self.values.tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        body = ", ".join(f"({i}, {v:.6g})" for i, v in list(self)[:6])
        more = ", ..." if len(self) > 6 else ""
        return f"SparseVector(dim={self.dim}, [{body}{more}])"


class WalkerEnsemble:
    """Signed integer walker counts keyed by location.

    Stored as sorted location/count arrays with zero counts removed, so
    opposite-signed walkers at a location are already annihilated and the
    total walker number equals the 1-norm of the represented vector.
    """

    __slots__ = ("locations", "counts", "dim")

    def __init__(self, locations, counts, dim: int, *, check: bool = True):
        loc = np.asarray(locations, dtype=np.int64)
        cnt = np.asarray(counts, dtype=np.int64)
        if check:
            if loc.shape != cnt.shape or loc.ndim != 1:
                raise ValueError("locations and counts must be 1-d arrays of equal length")
            if loc.size and (np.any(np.diff(loc) <= 0)):
                uniq, inv = np.unique(loc, return_inverse=True)
                cnt = _int_sum(inv, cnt, uniq.size)
                loc = uniq
            if loc.size and (loc[0] < 0 or loc[-1] >= dim):
                raise DimensionError(f"location out of range for dim {dim}")
            keep = cnt != 0
            if not keep.all():
                loc, cnt = loc[keep], cnt[keep]
        self.locations = _frozen(loc.copy()) if loc.flags.writeable else loc
        self.counts = _frozen(cnt.copy()) if cnt.flags.writeable else cnt
        self.dim = int(dim)

    @classmethod
    def from_dict(cls, counts: Mapping[int, int], dim: int) -> "WalkerEnsemble":
        items = sorted(counts.items())
        if not items:
            return cls.empty(dim)
        loc, cnt = zip(*items)
        return cls(loc, cnt, dim)

    @classmethod
    def empty(cls, dim: int) -> "WalkerEnsemble":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), dim, check=False)

    @classmethod
    def from_vector(cls, x) -> "WalkerEnsemble":
        x = np.asarray(x)
        if not np.all(x == np.round(x)):
            raise ValueError("walker ensembles represent integer vectors")
        nz = np.flatnonzero(x)
        return cls(nz, x[nz].astype(np.int64), x.size, check=False)

    @property
    def population(self) -> int:
        """Total walker number M = sum of |counts|."""
        return int(np.abs(self.counts).sum())

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.locations.tolist(), self.counts.tolist()))

    def get(self, k: int) -> int:
        pos = np.searchsorted(self.locations, k)
        if pos < self.locations.size and self.locations[pos] == k:
            return int(self.counts[pos])
        return 0

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=np.int64)
        out[self.locations] = self.counts
        return out

    def __len__(self) -> int:
        return int(self.locations.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WalkerEnsemble):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return f"WalkerEnsemble(dim={self.dim}, occupied={len(self)}, M={self.population})"


def _int_sum(inv: np.ndarray, cnt: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    np.add.at(out, inv, cnt)
    return out


Vector = Union[SparseVector, WalkerEnsemble]


def _pairs(v: Vector) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(v, WalkerEnsemble):
        return v.locations, v.counts.astype(np.float64)
    return v.indices, v.values


def _check_dims(v: Vector, w: Vector) -> None:
    if v.dim != w.dim:
        raise DimensionError(f"dimension mismatch: {v.dim} vs {w.dim}")


def norm1(v: Vector) -> float:
    return float(np.abs(_pairs(v)[1]).sum())


def norm2(v: Vector) -> float:
    return float(np.sqrt(np.dot(_pairs(v)[1], _pairs(v)[1])))


def norm0(v: Vector) -> int:
    return len(v)


def dot(v: Vector, w: Vector) -> float:
    _check_dims(v, w)
    iv, xv = _pairs(v)
    iw, xw = _pairs(w)
    _, a, b = np.intersect1d(iv, iw, assume_unique=True, return_indices=True)
    return float(np.dot(xv[a], xw[b]))


def axpy(a: float, v: Vector, w: Vector) -> SparseVector:
    """Return ``a*v + w`` as a SparseVector, pruning cancelled entries."""
    _check_dims(v, w)
    iv, xv = _pairs(v)
    iw, xw = _pairs(w)
    rows = np.concatenate([iv, iw])
    weights = np.concatenate([a * xv, xw])
    return SparseVector._accumulate(rows, weights, v.dim)


def to_sparse(w: WalkerEnsemble) -> SparseVector:
    return SparseVector(w.locations, w.counts.astype(np.float64), w.dim, check=False)


class InfiniteTangent:
    """Returned by :func:`tan_angle` for orthogonal vectors.

    Deliberately not a float: comparing it with a number raises ``TypeError``.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE_TANGENT"

    def __str__(self) -> str:
        return "inf"

    def __reduce__(self):
        return (InfiniteTangent, ())


INFINITE_TANGENT = InfiniteTangent()


def tan_angle(u: Vector, v: Vector) -> float | InfiniteTangent:
    """tan of the angle between the lines spanned by ``u`` and ``v``.

    The numerator sqrt(|u|^2 |v|^2 - <u,v>^2) is evaluated as
    |u| * |v - proj_u v| to avoid cancellation when the angle is small.
    """
    _check_dims(u, v)
    nu = norm2(u)
    nv = norm2(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("tan_angle is undefined for a zero vector")
    uv = dot(u, v)
    if uv == 0.0:
        return INFINITE_TANGENT
    if isinstance(u, WalkerEnsemble):
        u = to_sparse(u)
    if isinstance(v, WalkerEnsemble):
        v = to_sparse(v)
    # work with unit vectors so the result is exactly scale covariant up to rounding
    uh = u.scaled(1.0 / nu)
    vh = v.scaled(1.0 / nv)
    c = dot(uh, vh)
    perp = axpy(-c, uh, vh)
    return norm2(perp) / abs(c)


def round_stochastic(Q: float, u: float) -> int:
    """floor(Q) + 1 with probability Q - floor(Q), else floor(Q), given u ~ U(0,1)."""
    if Q < 0:
        raise ValueError("round_stochastic needs Q >= 0")
    f = math.floor(Q)
    return f + 1 if u < Q - f else f


def round_stochastic_array(Q: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorised :func:`round_stochastic`."""
    Q = np.asarray(Q, dtype=np.float64)
    if np.any(Q < 0):
        raise ValueError("round_stochastic needs Q >= 0")
    f = np.floor(Q)
    return (f + (u < Q - f)).astype(np.int64)
