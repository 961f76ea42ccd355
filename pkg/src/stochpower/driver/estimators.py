"""Energy estimators on the H scale."""

from __future__ import annotations

import numpy as np

from ..errors import UndefinedEstimator
from ..hamiltonian import ColumnOracle
from ..vectors import SparseVector, WalkerEnsemble, dot, to_sparse


def _lookup(v: SparseVector, rows: np.ndarray) -> np.ndarray:
    pos = np.searchsorted(v.indices, rows)
    pos = np.minimum(pos, max(len(v) - 1, 0))
    hit = (v.indices[pos] == rows) if len(v) else np.zeros(rows.size, bool)
    return np.where(hit, v.values[pos] if len(v) else 0.0, 0.0)


def projected_energy(H: ColumnOracle, v_star: SparseVector, v: SparseVector | WalkerEnsemble) -> float:
    """v*^T H v / v*^T v, reading only the columns of H on the support of v*."""
    if isinstance(v, WalkerEnsemble):
        v = to_sparse(v)
    den = dot(v_star, v)
    if den == 0.0:
        raise UndefinedEstimator("projected energy undefined: v* is orthogonal to v")
    ks = v_star.indices
    ptr, rows, vals = H.offdiag_columns(ks)
    col = np.repeat(np.arange(ks.size), np.diff(ptr))
    off = np.bincount(col, weights=vals * _lookup(v, rows), minlength=ks.size)
    num = float(np.dot(v_star.values, H.diagonals(ks) * _lookup(v, ks) + off))
    return num / den


def shift_estimate(record, i0: int, w: int) -> float:
    """Mean of the shift over rows [i0, i0 + w) of a controlled-phase run."""
    if record.controlled_from is None:
        raise ValueError("record never reached the controlled phase")
    if w < 1 or i0 < 0 or i0 + w > len(record):
        raise ValueError("window outside the record")
    t = np.asarray(record.column("t"))
    if int(t[i0]) < record.controlled_from:
        raise ValueError("window starts before the controlled phase")
    shifts = np.asarray(record.column("shift")[i0 : i0 + w], dtype=float)
    return float(shifts.mean())
