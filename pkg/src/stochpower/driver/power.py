"""Deterministic reference eigensolvers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, NonConvergence
from ..fri import exact_matvec
from ..hamiltonian import DENSE_LIMIT, ColumnOracle, DenseMatrix
from ..vectors import SparseVector, axpy, dot, norm2


@dataclass(frozen=True)
class PowerResult:
    eigenvalue: float
    vector: SparseVector
    iterations: int
    residual: float

    def __iter__(self):
        # allows ``lam, u, iters = exact_power_iteration(...)``
        return iter((self.eigenvalue, self.vector, self.iterations))


def exact_power_iteration(
    A: ColumnOracle,
    v0: SparseVector,
    max_iter: int = 100_000,
    tol: float = 1e-13,
    stagnation_window: int = 50,
    residual_tol: float | None = None,
    callback=None,
) -> PowerResult:
    """Normalised power iteration with a Rayleigh-quotient stopping rule.

    Stops once successive Rayleigh quotients differ by less than ``tol`` and
    the residual ||Ax - lam x|| is at most ``residual_tol`` (sqrt(tol) by
    default).  If the quotient has settled while the residual stays large
    and stops improving for ``stagnation_window`` consecutive steps, the
    start vector is probably (nearly) orthogonal to the dominant
    eigenvector, or the top eigenvalue is not unique in magnitude, and
    NonConvergence is raised.
    ``callback(t, x, lam)`` is called after every step.
    """
    if norm2(v0) == 0.0:
        raise ValueError("start vector must be nonzero")
    x = v0.scaled(1.0 / norm2(v0))
    lam_prev = math.nan
    stalled = 0
    res = best = math.inf
    res_tol = math.sqrt(tol) if residual_tol is None else residual_tol
    for it in range(1, max_iter + 1):
        y = exact_matvec(A, x).product
        lam = dot(x, y)
        res = norm2(axpy(-lam, x, y))
        ny = norm2(y)
        if ny == 0.0:
            raise NonConvergence("iterate mapped to zero", residual=res, iterations=it)
        settled = abs(lam - lam_prev) < tol
        if settled and res <= res_tol:
            return PowerResult(lam, x, it, res)
        if res < best * (1 - 1e-3):
            best = res
            stalled = 0
        elif settled:
            stalled += 1
        if stalled >= stagnation_window:
            raise NonConvergence(
                "Rayleigh quotient stagnated with a large residual; the start vector may be "
                "orthogonal to the dominant eigenvector",
                residual=res,
                iterations=it,
            )
        x = y.scaled(1.0 / ny)
        lam_prev = lam
        if callback is not None:
            callback(it, x, lam)
    raise NonConvergence(f"no convergence in {max_iter} iterations", residual=res, iterations=max_iter)


def dense_eig_smallest(M: DenseMatrix | np.ndarray, residual_tol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Smallest eigenpair of a symmetric matrix by LAPACK ``eigh``.

    The eigenvector is unit length with its largest-magnitude entry positive.
    Raises NonConvergence when ||Mu - E u|| exceeds ``residual_tol`` ||M||_2.
    """
    a = M.array if isinstance(M, DenseMatrix) else np.asarray(M, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("expected a square matrix")
    if a.shape[0] > DENSE_LIMIT:
        raise DimensionError(f"dense eigensolver limited to dimension {DENSE_LIMIT}")
    w, V = np.linalg.eigh(a)
    u = V[:, 0]
    u = u * np.sign(u[np.argmax(np.abs(u))])
    e0 = float(w[0])
    scale = max(abs(w[0]), abs(w[-1]))
    res = float(np.linalg.norm(a @ u - e0 * u))
    if res > residual_tol * max(scale, 1e-300):
        raise NonConvergence("dense eigensolver residual too large", residual=res)
    return e0, u
