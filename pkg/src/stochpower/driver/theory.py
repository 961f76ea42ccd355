"""Iteration-count and complexity predictor, and empirical checks of the
noise assumptions behind it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..compress import CompressionSpec, sample_compressions
from ..errors import ConfigError
from ..fciqmc import one_step_replicas, proposition_constant
from ..fri import exact_matvec
from ..hamiltonian import ColumnOracle, dense_from_oracle, matrix_norm1
from ..vectors import SparseVector, WalkerEnsemble, norm1, to_sparse


@dataclass(frozen=True)
class TheoryPrediction:
    T: int
    m0: float
    lambda1: float
    lambda2: float
    epsilon: float
    delta_prob: float
    cos_theta0: float
    v0_ratio: float
    A_ratio: float
    C_e: float


def predict_theory(
    lambda1: float,
    lambda2: float,
    epsilon: float,
    delta_prob: float,
    cos_theta0: float,
    v0_ratio: float = 1.0,
    A_ratio: float = 1.0,
    C_e: float = 1.0,
) -> TheoryPrediction:
    """Iterations T and complexity m0 sufficient for tan(theta) <= epsilon
    with probability 1 - 2 delta_prob.

    T  = ceil(log(2 sqrt2 / (sqrt(delta) eps cos0)) / log(lambda1 / lambda2))
    m0 = 4 C_e / (delta eps^2 cos0^2) * v0_ratio^2 * T * A_ratio^(2T)

    ``v0_ratio`` is ||v0||_1 / ||v0||_2 and ``A_ratio`` is ||A||_1 / ||A||_2.
    T is at least 1; the ceiling ignores a relative excess of 1e-9 so that
    exact integer ratios are not pushed up by rounding.
    """
    if not lambda1 > lambda2:
        raise ValueError("no spectral gap: need lambda1 > lambda2")
    if not lambda2 > 0:
        raise ValueError("lambda2 must be positive")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < delta_prob < 1:
        raise ValueError("delta_prob must lie in (0, 1)")
    if not 0 < cos_theta0 <= 1:
        raise ValueError("cos_theta0 must lie in (0, 1]")
    x = math.log(2 * math.sqrt(2) / (math.sqrt(delta_prob) * epsilon * cos_theta0)) / math.log(lambda1 / lambda2)
    T = max(1, math.ceil(x - 1e-9 * max(1.0, abs(x))))
    pre = 4 * C_e / (delta_prob * epsilon**2 * cos_theta0**2)
    try:
        growth = A_ratio ** (2 * T)
    except OverflowError:
        growth = math.inf
    m0 = pre * v0_ratio**2 * T * growth
    return TheoryPrediction(T, m0, lambda1, lambda2, epsilon, delta_prob, cos_theta0, v0_ratio, A_ratio, C_e)


def predict_for_matrix(A: ColumnOracle, v0: SparseVector, epsilon: float, delta_prob: float, C_e: float = 1.0) -> TheoryPrediction:
    """Evaluate the predictor with spectral inputs taken from a dense copy of A."""
    a = dense_from_oracle(A).array
    w, V = np.linalg.eigh(a)
    order = np.argsort(-np.abs(w))
    lam1, lam2 = float(abs(w[order[0]])), float(abs(w[order[1]]))
    u1 = V[:, order[0]]
    x = v0.to_dense()
    cos0 = abs(float(u1 @ x)) / float(np.linalg.norm(x))
    return predict_theory(
        lam1,
        lam2,
        epsilon,
        delta_prob,
        cos0,
        v0_ratio=norm1(v0) / float(np.linalg.norm(x)),
        A_ratio=matrix_norm1(A) / float(np.max(np.abs(w))),
        C_e=C_e,
    )


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""


@dataclass
class AssumptionReport:
    method: str
    replicas: int
    C_e_empirical: float
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


METHODS = ("exact", "fri-systematic", "fri-bernoulli", "fciqmc")


def assumption_suite(
    A: ColumnOracle,
    method: str,
    replicas: int,
    v: SparseVector | WalkerEnsemble,
    rng: np.random.Generator,
    m: int | None = None,
) -> AssumptionReport:
    """Monte Carlo checks of the step noise xi = v' - A v from a fixed v.

    (a) every component of the mean of xi is within 5 standard errors of 0;
    (b) E ||xi||^2 <= C_e ||A||_1^2 ||v||_1^2 / m within 3 standard errors,
        with C_e = 1 for the compression methods and the stochastic-rounding
        constant of the walker method divided by ||A||_1^2;
    (c) E ||v'||_1 <= ||A||_1 ||v||_1 within 3 standard errors.
    For the walker method ``v`` must be a WalkerEnsemble and m is its
    population.  The empirical C_e is the ratio of E ||xi||^2 to
    ||A||_1^2 ||v||_1^2 / m.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if A.dim > 100:
        raise ConfigError("assumption checks are limited to dimension 100")
    sv = to_sparse(v) if isinstance(v, WalkerEnsemble) else v
    Av = exact_matvec(A, sv).product.to_dense()
    nA = matrix_norm1(A)
    nv = norm1(sv)
    if method == "exact":
        samples = np.broadcast_to(Av, (replicas, A.dim))
        m_eff = m or A.dim
        C_bound = 1.0
    elif method == "fciqmc":
        if not isinstance(v, WalkerEnsemble):
            raise ConfigError("the walker method needs a WalkerEnsemble")
        samples = one_step_replicas(A, v, replicas, rng).astype(float)
        m_eff = v.population
        C_bound = proposition_constant(A) / nA**2
    else:
        if m is None:
            raise ConfigError("compression methods need m")
        spec = CompressionSpec(m, "systematic" if method == "fri-systematic" else "bernoulli")
        samples = sample_compressions(SparseVector.from_dense(Av), spec, replicas, rng)
        m_eff = m
        C_bound = 1.0
    xi = samples - Av[None, :]
    R = replicas
    checks = []

    mean = xi.mean(axis=0)
    se = xi.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(A.dim)
    dev = np.abs(mean)
    ok = bool(np.all(dev <= 5 * se + 1e-12 * max(1.0, float(np.abs(Av).max()))))
    worst = float(np.max(dev / np.where(se > 0, se, np.inf))) if np.any(se > 0) else 0.0
    checks.append(CheckResult("martingale", ok, worst, 5.0, "max |mean xi| / SE"))

    sq = np.einsum("ij,ij->i", xi, xi)
    scale = nA**2 * nv**2 / m_eff
    mean_sq = float(sq.mean())
    se_sq = float(sq.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    checks.append(CheckResult("variance", mean_sq <= C_bound * scale + 3 * se_sq, mean_sq, C_bound * scale))

    l1 = np.abs(samples).sum(axis=1)
    mean_l1 = float(l1.mean())
    se_l1 = float(l1.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    checks.append(CheckResult("l1-growth", mean_l1 <= nA * nv * (1 + 1e-12) + 3 * se_l1, mean_l1, nA * nv))
    return AssumptionReport(method, R, mean_sq / scale, checks)
