"""Build a system from a configuration and run one solver on it."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod
from ..compress import CompressionSpec
from ..config import ExperimentConfig
from ..errors import ConfigError, UndefinedEstimator
from ..fciqmc import CONTROLLED, FciqmcConfig, FciqmcState, fciqmc_step
from ..fri import fri_step
from ..hamiltonian import DENSE_LIMIT, ColumnOracle, IterationMatrix, dense_from_oracle, load_matrix, random_test_matrix
from ..hubbard import HubbardMomentum
from ..vectors import SparseVector, WalkerEnsemble, tan_angle, to_sparse
from .estimators import projected_energy
from .power import dense_eig_smallest, exact_power_iteration
from .records import RunRecord
from .stats import SummaryStats, summarize

# walker runs measure the exact step error up to this dimension when asked for "auto"
EXACT_ERROR_AUTO_DIM = 100_000


@dataclass
class Reference:
    energy: float | None = None
    vector: SparseVector | None = None


@dataclass
class Problem:
    H: ColumnOracle
    start: int
    reference: Reference


@dataclass
class ExperimentResult:
    record: RunRecord
    summary: SummaryStats | None
    reference: Reference
    final: object


def build_system(cfg: ExperimentConfig) -> tuple[ColumnOracle, int]:
    """The Hamiltonian oracle and the start/projection location."""
    s = cfg.system
    if s.kind == "hubbard":
        H = HubbardMomentum(s.L, s.n_up, s.n_down, s.U, sampler=s.sampler)
        default_start = H.hartree_fock()
    else:
        if s.kind == "file":
            H = load_matrix(s.path)
        else:
            H = random_test_matrix(s.N, gap=s.gap, seed=s.matrix_seed, coupling=s.coupling)
        d = H.diagonals(np.arange(H.dim))
        default_start = int(np.argmin(d))
    start = default_start if cfg.solver.start is None else cfg.solver.start
    if not 0 <= start < H.dim:
        raise ConfigError(f"solver.start {start} outside [0, {H.dim})")
    return H, start


def read_reference(path) -> Reference:
    """Read a ``kind,index,value`` reference file (energy row plus vector rows)."""
    energy = None
    idx, val = [], []
    dim = None
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["kind", "index", "value"]:
                raise ConfigError(f"{path}: expected header kind,index,value")
            for row in reader:
                if row["kind"] == "energy":
                    energy = float(row["value"])
                elif row["kind"] == "dim":
                    dim = int(row["value"])
                elif row["kind"] == "vector":
                    idx.append(int(row["index"]))
                    val.append(float(row["value"]))
                else:
                    raise ConfigError(f"{path}: unknown row kind {row['kind']!r}")
    except OSError as exc:
        raise ConfigError(f"cannot read reference {path}: {exc}") from None
    vec = None
    if idx:
        if dim is None:
            raise ConfigError(f"{path}: vector rows need a dim row")
        order = np.argsort(idx)
        vec = SparseVector(np.asarray(idx)[order], np.asarray(val)[order], dim)
    return Reference(energy, vec)


def write_reference(path, ref: Reference) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "index", "value"])
        w.writerow(["energy", "", format(ref.energy, ".17g")])
        if ref.vector is not None:
            w.writerow(["dim", "", ref.vector.dim])
            for i, x in ref.vector:
                w.writerow(["vector", i, format(x, ".17g")])


def compute_reference(H: ColumnOracle, start: int, delta: float) -> Reference:
    """Ground state by dense diagonalisation when small, otherwise by exact
    power iteration on I - delta H from the start location."""
    if H.dim <= DENSE_LIMIT:
        e0, u = dense_eig_smallest(dense_from_oracle(H))
        return Reference(e0, SparseVector.from_dense(u))
    A = IterationMatrix(H, delta)
    res = exact_power_iteration(A, SparseVector.basis(start, H.dim))
    return Reference(A.energy_from_eigenvalue(res.eigenvalue), res.vector)


def build_problem(cfg: ExperimentConfig) -> Problem:
    cfg.validate()
    H, start = build_system(cfg)
    kind = cfg.reference.kind
    if kind == "none":
        ref = Reference()
    elif kind == "file":
        ref = read_reference(cfg.reference.path)
        if ref.vector is not None and ref.vector.dim != H.dim:
            raise ConfigError("reference vector dimension does not match the system")
    else:
        ref = compute_reference(H, start, cfg.solver.delta)
    return Problem(H, start, ref)


def _energy(H, v_star, v) -> float | None:
    try:
        return projected_energy(H, v_star, v)
    except UndefinedEstimator:
        return None


def _tan(ref: Reference, v):
    return None if ref.vector is None else tan_angle(ref.vector, v)


def run_experiment(cfg: ExperimentConfig, run_index: int = 0, problem: Problem | None = None, progress=None) -> ExperimentResult:
    """Run the configured method for ``solver.iterations`` steps.

    Iteration t draws from the stream keyed by (seed, run_index) at counter
    t.  Row 0 of the record describes the start vector.
    """
    problem = problem or build_problem(cfg)
    method = cfg.solver.method
    if method in ("fciqmc", "ifciqmc"):
        record, final = _run_walkers(cfg, problem, run_index, progress)
    else:
        record, final = _run_fri(cfg, problem, run_index, progress)
    i0, w = cfg.window()
    summary = summarize(record, problem.reference.energy, i0, w, cfg.stats.seconds_budget)
    return ExperimentResult(record, summary, problem.reference, final)


def _run_fri(cfg, problem: Problem, run_index: int, progress):
    H, start, ref = problem.H, problem.start, problem.reference
    method = cfg.solver.method
    A = IterationMatrix(H, cfg.solver.delta)
    spec = None
    if method != "exact":
        scheme = {"fri-systematic": "systematic", "fri-bernoulli": "bernoulli", "ht": "hard-threshold"}[method]
        spec = CompressionSpec(cfg.solver.m, scheme)
    v_star = SparseVector.basis(start, H.dim)
    x = v_star
    record = RunRecord(method)
    record.append(0, 0.0, 1, proj_energy=_energy(H, v_star, x), l1=1.0, l2=1.0, tan_theta=_tan(ref, x))
    for t in range(1, cfg.solver.iterations + 1):
        t0 = time.perf_counter()
        gen = rngmod.stream(cfg.solver.seed, t, rngmod.ENTITY_COMPRESS, run_index)
        x, d = fri_step(A, x, spec, gen)
        e = _energy(H, v_star, x)
        wall = (time.perf_counter() - t0) * 1e3
        record.append(
            t,
            wall,
            d.population,
            proj_energy=e,
            l1=d.l1,
            l2=d.l2,
            nnz_matvec=d.nnz_matvec,
            rel_compress_err=d.rel_compress_err,
            tan_theta=_tan(ref, x),
        )
        if progress is not None:
            progress(t, record)
    return record, x


def _run_walkers(cfg, problem: Problem, run_index: int, progress):
    H, start, ref = problem.H, problem.start, problem.reference
    f = cfg.fciqmc
    s0 = H.diagonal(start) if f.initial_shift is None else f.initial_shift
    fcfg = FciqmcConfig(
        target_population=cfg.solver.m,
        eta=cfg.eta(),
        q=f.q,
        initial_shift=s0,
        initiator_enabled=cfg.solver.method == "ifciqmc",
        initiator_threshold=f.initiator_threshold,
        initial_initiators=(start,),
        max_population=cfg.population_cap(),
    )
    measure = f.exact_error == "on" or (f.exact_error == "auto" and H.dim <= EXACT_ERROR_AUTO_DIM)
    A = IterationMatrix(H, cfg.solver.delta, s0)
    w0 = WalkerEnsemble(np.array([start]), np.array([f.initial_walkers]), H.dim)
    state = FciqmcState.start(w0, s0, fcfg)
    v_star = SparseVector.basis(start, H.dim)
    record = RunRecord(cfg.solver.method)
    l2 = float(f.initial_walkers)
    record.append(
        0, 0.0, w0.population, shift=s0, proj_energy=_energy(H, v_star, w0), l1=l2, l2=l2, tan_theta=_tan(ref, to_sparse(w0))
    )
    for t in range(1, cfg.solver.iterations + 1):
        t0 = time.perf_counter()
        gen = rngmod.stream(cfg.solver.seed, t, rngmod.ENTITY_FCIQMC, run_index)
        state, d = fciqmc_step(state, A, fcfg, gen, measure_error=measure)
        e = _energy(H, v_star, state.walkers)
        wall = (time.perf_counter() - t0) * 1e3
        if state.phase == CONTROLLED and record.controlled_from is None:
            record.controlled_from = t
        record.append(
            t,
            wall,
            d.population,
            shift=state.shift,
            proj_energy=e,
            l1=d.l1,
            l2=d.l2,
            nnz_matvec=d.nnz_matvec,
            rel_compress_err=d.rel_compress_err,
            tan_theta=_tan(ref, to_sparse(state.walkers)),
        )
        if progress is not None:
            progress(t, record)
    return record, state

