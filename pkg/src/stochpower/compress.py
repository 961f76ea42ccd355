"""Sparse compression of vectors.

``compress(v, spec, rng)`` returns a vector with about ``spec.m`` nonzeros.
The two stochastic schemes keep the largest entries exactly and resample
the rest so that the result is unbiased; hard thresholding keeps the m
largest entries and drops everything else.

Ordering everywhere is magnitude descending with index ascending as the
tie-break; the systematic scheme sweeps the small entries in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .vectors import SparseVector

SCHEMES = ("systematic", "bernoulli", "hard-threshold")


@dataclass(frozen=True)
class CompressionSpec:
    m: int
    scheme: str = "systematic"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("compression target m must be a positive integer")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown compression scheme {self.scheme!r}")


@dataclass(frozen=True)
class SplitResult:
    """Greedy split of a vector into exactly kept and resampled parts.

    ``small_indices``/``small_values`` are ordered by magnitude descending,
    not by index; ``small`` is the same data as a SparseVector.
    """

    tau: int
    kept_indices: np.ndarray
    kept_values: np.ndarray
    small_indices: np.ndarray
    small_values: np.ndarray
    small_norm1: float
    m: int
    dim: int

    @property
    def small(self) -> SparseVector:
        return SparseVector(self.small_indices, self.small_values, self.dim)

    @property
    def kept(self) -> list[tuple[int, float]]:
        return list(zip(self.kept_indices.tolist(), self.kept_values.tolist()))

    @property
    def quantum(self) -> float:
        """Magnitude s / (m - tau) given to every resampled entry."""
        return self.small_norm1 / (self.m - self.tau)


def _magnitude_order(v: SparseVector) -> np.ndarray:
    # indices are ascending already, so a stable sort gives the index tie-break
    return np.argsort(-np.abs(v.values), kind="stable")


def split_large(v: SparseVector, m: int) -> SplitResult:
    """Extract the largest entries while |v(i')| >= s / (m - tau)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    order = _magnitude_order(v)
    idx = v.indices[order]
    val = v.values[order]
    mag = np.abs(val)
    n = mag.size
    s = float(mag.sum())
    tau = 0
    if n <= m:
        tau = n
        s = 0.0
    else:
        while tau < m and mag[tau] >= s / (m - tau):
            s -= mag[tau]
            tau += 1
        assert tau < m, "split exhausted m with small entries remaining"
    empty_i = np.empty(0, np.int64)
    return SplitResult(
        tau=tau,
        kept_indices=idx[:tau],
        kept_values=val[:tau],
        small_indices=idx[tau:] if tau < n else empty_i,
        small_values=val[tau:] if tau < n else np.empty(0),
        small_norm1=s,
        m=int(m),
        dim=v.dim,
    )


def _systematic_counts(mag: np.ndarray, n_pick: int, U: np.ndarray) -> np.ndarray:
    """Hit counts N_i for each row of uniforms ``U`` (shape (R,)).

    Stratum k of row r is the point (U[r] + k) / n_pick * S on the running
    sum of ``mag``; entry i is hit when it covers that point.
    """
    cum = np.cumsum(mag)
    total = cum[-1]
    pts = (U[:, None] + np.arange(n_pick)[None, :]) / n_pick * total
    hit = np.searchsorted(cum, pts, side="right")
    np.minimum(hit, mag.size - 1, out=hit)
    R = U.size
    flat = hit + (np.arange(R) * mag.size)[:, None]
    return np.bincount(flat.ravel(), minlength=R * mag.size).reshape(R, mag.size)


def _assemble(split: SplitResult, counts: np.ndarray) -> SparseVector:
    """Kept entries plus sgn(v_i) N_i s / (m - tau) on the small ones."""
    pick = counts > 0
    small_vals = np.sign(split.small_values[pick]) * counts[pick] * _quantum(split)
    idx = np.concatenate([split.kept_indices, split.small_indices[pick]])
    val = np.concatenate([split.kept_values, small_vals])
    order = np.argsort(idx, kind="stable")
    return SparseVector(idx[order], val[order], split.dim, check=False)


def _quantum(split: SplitResult) -> float:
    # sampling uses the running sum of the small magnitudes as its scale
    return float(np.abs(split.small_values).sum()) / (split.m - split.tau)


def compress_systematic(v: SparseVector, m: int, rng: np.random.Generator) -> SparseVector:
    """Systematic resampling driven by a single uniform U."""
    split = split_large(v, m)
    if split.small_values.size == 0:
        return v
    U = np.array([rng.random()])
    counts = _systematic_counts(np.abs(split.small_values), m - split.tau, U)[0]
    return _assemble(split, counts)


def compress_bernoulli(v: SparseVector, m: int, rng: np.random.Generator) -> SparseVector:
    """Independent Bernoulli(|v_i| (m - tau) / s) selection of small entries."""
    split = split_large(v, m)
    if split.small_values.size == 0:
        return v
    u = rng.random(split.small_values.size)
    counts = (u < _bernoulli_probs(split)).astype(np.int64)
    return _assemble(split, counts)


def _bernoulli_probs(split: SplitResult) -> np.ndarray:
    mag = np.abs(split.small_values)
    return mag / _quantum(split)


def compress_hard_threshold(v: SparseVector, m: int) -> SparseVector:
    """Keep the m largest-magnitude entries (lower index wins ties)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(v) <= m:
        return v
    keep = np.sort(_magnitude_order(v)[:m])
    return SparseVector(v.indices[keep], v.values[keep], v.dim, check=False)


def compress(v: SparseVector, spec: CompressionSpec, rng: np.random.Generator | None = None) -> SparseVector:
    if spec.scheme == "hard-threshold":
        return compress_hard_threshold(v, spec.m)
    if rng is None:
        raise ValueError(f"{spec.scheme} compression needs a random generator")
    if spec.scheme == "systematic":
        return compress_systematic(v, spec.m, rng)
    return compress_bernoulli(v, spec.m, rng)


def sample_compressions(v: SparseVector, spec: CompressionSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent compressions of ``v`` as a dense (n, dim) array.

    Draws from ``rng`` exactly as ``n`` successive :func:`compress` calls
    would, so row r equals the r-th sequential compression.  Meant for
    statistical checks on small dimensions.
    """
    split = split_large(v, spec.m)
    out = np.zeros((n, v.dim))
    out[:, split.kept_indices] = split.kept_values
    if spec.scheme == "hard-threshold":
        return np.broadcast_to(compress_hard_threshold(v, spec.m).to_dense(), (n, v.dim)).copy()
    if split.small_values.size == 0:
        out[:] = v.to_dense()
        return out
    q = _quantum(split)
    sgn = np.sign(split.small_values)
    if spec.scheme == "systematic":
        counts = _systematic_counts(np.abs(split.small_values), spec.m - split.tau, rng.random(n))
    else:
        u = rng.random((n, split.small_values.size))
        counts = (u < _bernoulli_probs(split)[None, :]).astype(np.int64)
    out[:, split.small_indices] = counts * (sgn * q)[None, :]
    return out
