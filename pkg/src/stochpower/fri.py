"""Fast randomized iteration: exact sparse product followed by compression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compress import CompressionSpec, compress
from .errors import DegenerateIterate, DimensionError
from .hamiltonian import ColumnOracle
from .vectors import PRUNE_THRESHOLD, SparseVector, axpy, norm1, norm2

# accumulate into a dense scratch array up to this dimension
DENSE_SCRATCH_LIMIT = 25_000_000


@dataclass(frozen=True)
class MatvecResult:
    product: SparseVector
    nnz_before_compress: int


@dataclass
class StepDiagnostics:
    """Per-step quantities recorded by every solver (None when not measured)."""

    population: int | None = None
    shift: float | None = None
    l1: float | None = None
    l2: float | None = None
    nnz_matvec: int | None = None
    error_norm: float | None = None
    product_norm: float | None = None

    @property
    def rel_compress_err(self) -> float | None:
        if self.error_norm is None or not self.product_norm:
            return None
        return self.error_norm / self.product_norm


def exact_matvec(A: ColumnOracle, v: SparseVector) -> MatvecResult:
    """A v through the column oracle.

    Contributions are summed per row in a fixed order: off-diagonal terms by
    ascending column (within a column in the oracle's enumeration order),
    then the diagonal terms by ascending column.
    """
    if v.dim != A.dim:
        raise DimensionError(f"dimension mismatch: matrix {A.dim}, vector {v.dim}")
    if len(v) == 0:
        return MatvecResult(SparseVector.zeros(A.dim), 0)
    ptr, rows, vals = A.offdiag_columns(v.indices)
    weights = vals * np.repeat(v.values, np.diff(ptr))
    all_rows = np.concatenate([rows, v.indices])
    all_w = np.concatenate([weights, A.diagonals(v.indices) * v.values])
    if A.dim <= DENSE_SCRATCH_LIMIT:
        acc = np.bincount(all_rows, weights=all_w, minlength=A.dim)
        nz = np.flatnonzero(np.abs(acc) >= PRUNE_THRESHOLD)
        product = SparseVector(nz, acc[nz], A.dim, check=False)
    else:
        product = SparseVector._accumulate(all_rows, all_w, A.dim)
    return MatvecResult(product, len(product))


def fri_step(
    A: ColumnOracle,
    v: SparseVector,
    spec: CompressionSpec | None,
    rng: np.random.Generator | None = None,
) -> tuple[SparseVector, StepDiagnostics]:
    """One normalised step x' = Phi_m(A x) / ||Phi_m(A x)||_2.

    ``spec=None`` is the exact power step.  Diagnostics describe the
    unnormalised product: ||xi||_2 = ||Phi_m(Av) - Av||_2, ||Av||_2, ||Av||_0.
    """
    if len(v) == 0:
        raise DegenerateIterate("cannot iterate from the zero vector")
    mv = exact_matvec(A, v)
    y = mv.product
    if spec is None or len(y) <= spec.m:
        z = y
        err = 0.0
    else:
        z = compress(y, spec, rng)
        err = norm2(axpy(-1.0, y, z))
    nz = norm2(z)
    if nz == 0.0:
        raise DegenerateIterate("compressed product is the zero vector")
    x = z.scaled(1.0 / nz)
    diag = StepDiagnostics(
        population=len(x),
        l1=norm1(x),
        l2=1.0,
        nnz_matvec=mv.nnz_before_compress,
        error_norm=err,
        product_norm=norm2(y),
    )
    return x, diag
