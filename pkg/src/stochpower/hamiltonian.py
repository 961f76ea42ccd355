"""Matrix access through columns.

Every solver sees a symmetric matrix only through a :class:`ColumnOracle`:
its diagonal, the off-diagonal nonzeros of a column, and a sampler that
picks one off-diagonal entry of a column.  The batch methods (``diagonals``,
``offdiag_columns``, ``sample_offdiag_batch``) are what the vectorised
solvers call; subclasses override them when they can do better than a loop.
"""

from __future__ import annotations

import abc
from pathlib import Path

import numpy as np

from .errors import AsymmetricMatrixError, DimensionError, MatrixFileError

DENSE_LIMIT = 5000


class ColumnOracle(abc.ABC):
    """Abstract real symmetric ``dim x dim`` matrix."""

    dim: int

    @abc.abstractmethod
    def diagonal(self, k: int) -> float:
        """H(k, k)."""

    @abc.abstractmethod
    def offdiag_column(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Rows (ascending) and values of the off-diagonal nonzeros of column k."""

    def offdiag_count(self, k: int) -> int:
        return int(self.offdiag_column(k)[0].size)

    def diagonals(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        return np.array([self.diagonal(int(k)) for k in ks], dtype=np.float64)

    def offdiag_columns(self, ks) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated columns for ``ks`` as ``(ptr, rows, values)``.

        Column ``ks[i]`` occupies ``rows[ptr[i]:ptr[i+1]]``.
        """
        ks = np.asarray(ks, dtype=np.int64)
        cols = [self.offdiag_column(int(k)) for k in ks]
        ptr = np.zeros(ks.size + 1, dtype=np.int64)
        if cols:
            ptr[1:] = np.cumsum([c[0].size for c in cols])
            rows = np.concatenate([c[0] for c in cols]).astype(np.int64)
            vals = np.concatenate([c[1] for c in cols]).astype(np.float64)
        else:
            rows = np.empty(0, np.int64)
            vals = np.empty(0)
        return ptr, rows, vals

    def sample_offdiag(self, k: int, rng: np.random.Generator):
        """Draw one off-diagonal entry of column ``k``.

        Returns ``(row, value, probability)``, or ``None`` when the draw
        produces no entry (empty column, or a rejected proposal).
        """
        rows, vals, probs = self.sample_offdiag_batch(np.array([k]), rng.random(1))
        if rows[0] < 0:
            return None
        return int(rows[0]), float(vals[0]), float(probs[0])

    def sample_offdiag_batch(self, ks, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Uniform choice over each column's nonzero off-diagonals.

        ``u`` holds one uniform in [0, 1) per entry of ``ks``.  Rows are -1
        (value 0, probability 1) where the column is empty.
        """
        ks = np.asarray(ks, dtype=np.int64)
        u = np.asarray(u, dtype=np.float64)
        uniq, inv = np.unique(ks, return_inverse=True)
        ptr, rows, vals = self.offdiag_columns(uniq)
        return _pick_uniform(ptr, rows, vals, inv, u)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


def _pick_uniform(ptr, rows, vals, col_of, u):
    start = ptr[col_of]
    count = ptr[col_of + 1] - start
    out_rows = np.full(col_of.size, -1, dtype=np.int64)
    out_vals = np.zeros(col_of.size)
    out_prob = np.ones(col_of.size)
    has = count > 0
    if has.any():
        off = np.minimum((u[has] * count[has]).astype(np.int64), count[has] - 1)
        pos = start[has] + off
        out_rows[has] = rows[pos]
        out_vals[has] = vals[pos]
        out_prob[has] = 1.0 / count[has]
    return out_rows, out_vals, out_prob


class CsrOracle(ColumnOracle):
    """Explicitly stored symmetric matrix: diagonal plus off-diagonal columns."""

    def __init__(self, dim: int, diag: np.ndarray, indptr: np.ndarray, indices: np.ndarray, data: np.ndarray):
        self.dim = int(dim)
        self._diag = np.asarray(diag, dtype=np.float64)
        self._indptr = np.asarray(indptr, dtype=np.int64)
        self._indices = np.asarray(indices, dtype=np.int64)
        self._data = np.asarray(data, dtype=np.float64)

    @classmethod
    def from_coo(cls, dim: int, rows, cols, vals) -> "CsrOracle":
        """Build from full (both triangles) coordinate lists; duplicates must already be merged."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        on = rows == cols
        diag = np.zeros(dim)
        diag[rows[on]] = vals[on]
        off = ~on & (vals != 0)
        r, c, v = rows[off], cols[off], vals[off]
        order = np.lexsort((r, c))
        r, c, v = r[order], c[order], v[order]
        indptr = np.zeros(dim + 1, dtype=np.int64)
        indptr[1:] = np.cumsum(np.bincount(c, minlength=dim))
        return cls(dim, diag, indptr, r, v)

    def diagonal(self, k: int) -> float:
        return float(self._diag[k])

    def diagonals(self, ks) -> np.ndarray:
        return self._diag[np.asarray(ks, dtype=np.int64)]

    def offdiag_column(self, k: int):
        a, b = self._indptr[k], self._indptr[k + 1]
        return self._indices[a:b], self._data[a:b]

    def offdiag_count(self, k: int) -> int:
        return int(self._indptr[k + 1] - self._indptr[k])

    def offdiag_columns(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        start = self._indptr[ks]
        count = self._indptr[ks + 1] - start
        ptr = np.zeros(ks.size + 1, dtype=np.int64)
        np.cumsum(count, out=ptr[1:])
        pos = np.repeat(start - ptr[:-1], count) + np.arange(ptr[-1])
        return ptr, self._indices[pos], self._data[pos]

    def sample_offdiag_batch(self, ks, u):
        ks = np.asarray(ks, dtype=np.int64)
        u = np.asarray(u, dtype=np.float64)
        ptr = self._indptr
        return _pick_uniform(ptr, self._indices, self._data, ks, u)

    def to_dense(self) -> np.ndarray:
        out = np.diag(self._diag)
        cols = np.repeat(np.arange(self.dim), np.diff(self._indptr))
        out[self._indices, cols] = self._data
        return out


class DenseMatrix(CsrOracle):
    """Small symmetric matrix held as a full array (also kept in CSR form)."""

    def __init__(self, array):
        a = np.array(array, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError("DenseMatrix needs a square array")
        if not np.array_equal(a, a.T):
            raise AsymmetricMatrixError("DenseMatrix must be exactly symmetric")
        n = a.shape[0]
        rows, cols = np.nonzero(a)
        tmp = CsrOracle.from_coo(n, rows, cols, a[rows, cols])
        super().__init__(n, tmp._diag, tmp._indptr, tmp._indices, tmp._data)
        a.flags.writeable = False
        self.array = a

    def to_dense(self) -> np.ndarray:
        return self.array.copy()


class FileMatrix(CsrOracle):
    """Matrix read by :func:`load_matrix`."""

    path: Path | None = None


def load_matrix(path) -> FileMatrix:
    """Read the plain-text upper-triangle format.

    The first non-comment line is the dimension N; every further line is
    ``i j value`` with 1-based indices and i <= j.  ``#`` starts a comment.
    A pair listed twice is an error; a lower-triangle line (i > j) is
    accepted only if it does not contradict its mirror entry.
    """
    path = Path(path)
    dim = None
    seen: dict[tuple[int, int], int] = {}
    values: dict[tuple[int, int], tuple[float, int]] = {}
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if dim is None:
                if len(parts) != 1:
                    raise MatrixFileError("expected the matrix dimension", lineno)
                try:
                    dim = int(parts[0])
                except ValueError:
                    raise MatrixFileError(f"bad dimension {parts[0]!r}", lineno) from None
                if dim < 1:
                    raise MatrixFileError("dimension must be positive", lineno)
                continue
            if len(parts) != 3:
                raise MatrixFileError("expected 'i j value'", lineno)
            try:
                i, j, val = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise MatrixFileError(f"cannot parse {line!r}", lineno) from None
            if not (1 <= i <= dim and 1 <= j <= dim):
                raise MatrixFileError(f"index out of range 1..{dim}", lineno)
            if not np.isfinite(val):
                raise MatrixFileError("non-finite value", lineno)
            if (i, j) in seen:
                raise MatrixFileError(f"duplicate entry ({i}, {j}), first given on line {seen[(i, j)]}", lineno)
            seen[(i, j)] = lineno
            key = (min(i, j), max(i, j))
            if key in values:
                prev, prev_line = values[key]
                if prev != val:
                    raise AsymmetricMatrixError(
                        f"entry ({i}, {j}) = {val!r} contradicts ({j}, {i}) = {prev!r} from line {prev_line}",
                        lineno,
                    )
                continue
            values[key] = (val, lineno)
    if dim is None:
        raise MatrixFileError("empty matrix file")
    upper = [(i, j, v) for (i, j), (v, _) in values.items()]
    if upper:
        ii, jj, vv = (np.array(x) for x in zip(*upper))
        ii = ii.astype(np.int64) - 1
        jj = jj.astype(np.int64) - 1
        vv = vv.astype(np.float64)
    else:
        ii = jj = np.empty(0, np.int64)
        vv = np.empty(0)
    off = ii != jj
    rows = np.concatenate([ii, jj[off]])
    cols = np.concatenate([jj, ii[off]])
    vals = np.concatenate([vv, vv[off]])
    tmp = CsrOracle.from_coo(dim, rows, cols, vals)
    fm = FileMatrix(dim, tmp._diag, tmp._indptr, tmp._indices, tmp._data)
    fm.path = path
    return fm


def dense_from_oracle(o: ColumnOracle, max_dim: int = DENSE_LIMIT) -> DenseMatrix:
    if o.dim > max_dim:
        raise DimensionError(f"dimension {o.dim} exceeds the dense limit {max_dim}")
    ks = np.arange(o.dim)
    a = np.zeros((o.dim, o.dim))
    a[ks, ks] = o.diagonals(ks)
    ptr, rows, vals = o.offdiag_columns(ks)
    cols = np.repeat(ks, np.diff(ptr))
    a[rows, cols] = vals
    return DenseMatrix(a)


def matrix_norm1(o: ColumnOracle) -> float:
    """max_k (|H(k,k)| + sum_j |H(j,k)|), by enumerating every column."""
    ks = np.arange(o.dim)
    ptr, _, vals = o.offdiag_columns(ks)
    csum = np.add.reduceat(np.abs(vals), ptr[:-1]) if vals.size else np.zeros(o.dim)
    csum = np.where(np.diff(ptr) > 0, csum, 0.0)
    return float(np.max(np.abs(o.diagonals(ks)) + csum))


class IterationMatrix(ColumnOracle):
    """A = I - delta (H - shift I) seen as a column oracle itself."""

    def __init__(self, oracle: ColumnOracle, delta: float, shift: float = 0.0):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.oracle = oracle
        self.delta = float(delta)
        self.shift = float(shift)
        self.dim = oracle.dim

    def set_shift(self, s: float) -> None:
        self.shift = float(s)

    def diagonal(self, k: int) -> float:
        return 1.0 - self.delta * (self.oracle.diagonal(k) - self.shift)

    def diagonals(self, ks) -> np.ndarray:
        return 1.0 - self.delta * (self.oracle.diagonals(ks) - self.shift)

    def offdiag_column(self, k: int):
        rows, vals = self.oracle.offdiag_column(k)
        return rows, -self.delta * vals

    def offdiag_count(self, k: int) -> int:
        return self.oracle.offdiag_count(k)

    def offdiag_columns(self, ks):
        ptr, rows, vals = self.oracle.offdiag_columns(ks)
        return ptr, rows, -self.delta * vals

    def sample_offdiag_batch(self, ks, u):
        rows, vals, probs = self.oracle.sample_offdiag_batch(ks, u)
        return rows, -self.delta * vals, probs

    def column(self, k: int) -> tuple[float, np.ndarray, np.ndarray]:
        """(A(k,k), off-diagonal rows, off-diagonal values)."""
        rows, vals = self.offdiag_column(k)
        return self.diagonal(k), rows, vals

    def energy_from_eigenvalue(self, lam: float) -> float:
        """Map an eigenvalue of A back to the H scale."""
        return (1.0 - lam) / self.delta + self.shift

    def __repr__(self) -> str:
        return f"IterationMatrix({self.oracle!r}, delta={self.delta}, shift={self.shift})"


def random_test_matrix(n: int, gap: float = 1.0, seed: int = 0, coupling: float = 0.01) -> DenseMatrix:
    """Diagonally dominant symmetric test Hamiltonian.

    The diagonal is 0, ``gap`` and then ``n - 2`` values evenly spaced in
    [3 gap, 6 gap]; every off-diagonal entry is Gaussian with standard
    deviation ``coupling``.  The ground state therefore sits near e_0 with a
    controlled gap, and all columns are full.
    """
    if n < 2:
        raise ValueError("test matrix needs n >= 2")
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x7E57]))
    d = np.empty(n)
    d[0] = 0.0
    d[1] = gap
    if n > 2:
        d[2:] = np.linspace(3 * gap, 6 * gap, n - 2)
    g = rng.normal(0.0, coupling, size=(n, n))
    a = np.triu(g, 1)
    a = a + a.T
    a[np.arange(n), np.arange(n)] = d
    return DenseMatrix(a)
