"""Signed-walker dynamics: spawning, diagonal death/cloning, annihilation,
the initiator rule and the two-phase shift controller.

Walkers are processed in ordinal order: locations ascending, and the |c|
walkers of a location one after another.  Each step draws, from the
iteration's random stream, M uniforms for the spawning targets, M for the
spawn counts and M for diagonal rounding, in that order; walker i uses the
i-th draw of each block.  The initiator rule consumes no randomness, so an
initiator run in which every location is an initiator is draw-for-draw the
plain run.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .errors import PopulationCollapse, PopulationExplosion
from .fri import StepDiagnostics, exact_matvec
from .hamiltonian import ColumnOracle, IterationMatrix
from .vectors import SparseVector, WalkerEnsemble, axpy, norm2, round_stochastic_array, to_sparse

GROWTH = "growth"
CONTROLLED = "controlled"


@dataclass(frozen=True)
class FciqmcConfig:
    target_population: int
    eta: float = 0.05
    q: int = 10
    initial_shift: float | None = None
    initiator_enabled: bool = False
    initiator_threshold: int = 3
    initial_initiators: tuple[int, ...] = ()
    max_population: int | None = None

    def __post_init__(self):
        if self.target_population < 1:
            raise ValueError("target population must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer")
        if self.initiator_threshold < 1:
            raise ValueError("initiator threshold must be a positive integer")
        if self.max_population is not None and self.max_population < self.target_population:
            raise ValueError("max_population must be at least the target population")


@dataclass(frozen=True)
class FciqmcState:
    walkers: WalkerEnsemble
    shift: float
    phase: str = GROWTH
    t: int = 0
    initiators: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    # (t, M_t, s_t) for the last q+1 iterations
    history: tuple[tuple[int, int, float], ...] = ()

    @classmethod
    def start(cls, walkers: WalkerEnsemble, shift: float, cfg: FciqmcConfig) -> "FciqmcState":
        if walkers.population == 0:
            raise PopulationCollapse("initial walker ensemble is empty")
        inits = np.unique(np.asarray(cfg.initial_initiators, dtype=np.int64))
        return cls(
            walkers=walkers,
            shift=float(shift),
            initiators=inits,
            history=((0, walkers.population, float(shift)),),
        )

    @property
    def population(self) -> int:
        return self.walkers.population


class SpawnEvent(NamedTuple):
    parent_location: int
    parent_is_initiator: bool
    target_location: int
    count: int
    sign: int


@dataclass(frozen=True)
class SpawnEvents:
    """Struct-of-arrays list of spawn events, in walker ordinal order."""

    parent: np.ndarray
    parent_is_initiator: np.ndarray
    target: np.ndarray
    count: np.ndarray
    sign: np.ndarray
    dim: int

    @classmethod
    def empty(cls, dim: int) -> "SpawnEvents":
        z = np.empty(0, np.int64)
        return cls(z, np.empty(0, bool), z, z, z, dim)

    @classmethod
    def from_events(cls, events, dim: int) -> "SpawnEvents":
        events = list(events)
        if not events:
            return cls.empty(dim)
        cols = list(zip(*events))
        return cls(
            np.array(cols[0], np.int64),
            np.array(cols[1], bool),
            np.array(cols[2], np.int64),
            np.array(cols[3], np.int64),
            np.array(cols[4], np.int64),
            dim,
        )

    def select(self, mask: np.ndarray) -> "SpawnEvents":
        return SpawnEvents(
            self.parent[mask], self.parent_is_initiator[mask], self.target[mask], self.count[mask], self.sign[mask], self.dim
        )

    @property
    def children(self) -> int:
        return int(self.count.sum())

    def __len__(self) -> int:
        return int(self.parent.size)

    def __iter__(self) -> Iterator[SpawnEvent]:
        for row in zip(
            self.parent.tolist(),
            self.parent_is_initiator.tolist(),
            self.target.tolist(),
            self.count.tolist(),
            self.sign.tolist(),
        ):
            yield SpawnEvent(*row)


# -- kernels on flat per-walker arrays -------------------------------------


def _expand(w: WalkerEnsemble) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    reps = np.abs(w.counts)
    locs = np.repeat(w.locations, reps)
    signs = np.repeat(np.sign(w.counts), reps)
    return locs, signs, reps


def _spawn_kernel(A: ColumnOracle, locs, signs, u_site, u_round):
    rows, vals, probs = A.sample_offdiag_batch(locs, u_site)
    valid = rows >= 0
    Q = np.where(valid, np.abs(vals) / probs, 0.0)
    n = round_stochastic_array(Q, u_round)
    ok = valid & (n > 0)
    return np.flatnonzero(ok), rows[ok], n[ok], (np.sign(vals[ok]) * signs[ok]).astype(np.int64)


def _diagonal_kernel(diag_per_walker, signs, u):
    n = round_stochastic_array(np.abs(diag_per_walker), u)
    return n * (np.sign(diag_per_walker).astype(np.int64) * signs)


def _merge(locs: np.ndarray, counts: np.ndarray, dim: int) -> WalkerEnsemble:
    if locs.size == 0:
        return WalkerEnsemble.empty(dim)
    uniq, inv = np.unique(locs, return_inverse=True)
    tot = np.zeros(uniq.size, dtype=np.int64)
    np.add.at(tot, inv, counts)
    keep = tot != 0
    return WalkerEnsemble(uniq[keep], tot[keep], dim, check=False)


# -- the three sub-steps ---------------------------------------------------


def spawn_step(
    A: ColumnOracle,
    w: WalkerEnsemble,
    rng: np.random.Generator,
    initiators: np.ndarray | None = None,
) -> SpawnEvents:
    """Each walker proposes one target l with probability p(l | parent) and
    spawns round(|A(l, parent)| / p) children of sign sgn(A(l, parent) s).

    ``initiators`` only labels the events (all parents count as initiators
    when it is None); filtering is :func:`initiator_filter`'s job.
    """
    locs, signs, _ = _expand(w)
    M = locs.size
    u_site = rng.random(M)
    u_round = rng.random(M)
    who, target, n, sgn = _spawn_kernel(A, locs, signs, u_site, u_round)
    parent = locs[who]
    if initiators is None:
        is_init = np.ones(parent.size, dtype=bool)
    else:
        is_init = np.isin(parent, initiators)
    return SpawnEvents(parent, is_init, target, n, sgn, w.dim)


def diagonal_step(A: ColumnOracle, w: WalkerEnsemble, rng: np.random.Generator) -> WalkerEnsemble:
    """Each walker leaves round(|A(l,l)|) copies of sign sgn(A(l,l)) s at l."""
    locs, signs, reps = _expand(w)
    u = rng.random(locs.size)
    d = np.repeat(A.diagonals(w.locations), reps)
    kids = _diagonal_kernel(d, signs, u)
    if kids.size == 0:
        return WalkerEnsemble.empty(w.dim)
    starts = np.concatenate([[0], np.cumsum(reps)[:-1]])
    per_loc = np.add.reduceat(kids, starts)
    keep = per_loc != 0
    return WalkerEnsemble(w.locations[keep], per_loc[keep], w.dim, check=False)


def initiator_filter(events: SpawnEvents, w: WalkerEnsemble, initiators) -> SpawnEvents:
    """Apply the initiator rule against the pre-spawn ensemble ``w``.

    Events from initiator parents pass.  Events from other parents pass when
    the target is occupied in ``w``, or when at least two such events land
    on the same unoccupied target with the same sign.
    """
    if len(events) == 0:
        return events
    is_init = np.isin(events.parent, np.asarray(initiators, dtype=np.int64))
    events = replace(events, parent_is_initiator=is_init)
    occupied = np.isin(events.target, w.locations)
    restricted = ~is_init & ~occupied
    keep = ~restricted
    if restricted.any():
        ridx = np.flatnonzero(restricted)
        key = events.target[ridx] * 2 + (events.sign[ridx] > 0)
        _, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
        keep[ridx[cnt[inv] >= 2]] = True
    return events.select(keep)


def annihilate(spawned: SpawnEvents, diag_survivors: WalkerEnsemble) -> WalkerEnsemble:
    """Signed sum of spawned children and diagonal survivors per location."""
    locs = np.concatenate([spawned.target, diag_survivors.locations])
    counts = np.concatenate([spawned.count * spawned.sign, diag_survivors.counts])
    return _merge(locs, counts, diag_survivors.dim)


# -- controller -----------------------------------------------------------


def update_shift(state: FciqmcState, cfg: FciqmcConfig) -> float:
    """Shift at ``state.t`` from the populations t and t - q apart.

    ``state.history`` must already contain the entry for ``state.t`` (its
    shift slot is ignored) and, when t is a multiple of q, the one for t - q.
    """
    if state.phase != CONTROLLED:
        raise ValueError("the shift is only updated in the controlled phase")
    t = state.t
    M_t = _history_get(state, t)[1]
    if M_t == 0:
        raise PopulationCollapse(f"population vanished at iteration {t}")
    if t % cfg.q != 0:
        return state.shift
    _, M_prev, s_prev = _history_get(state, t - cfg.q)
    return s_prev - cfg.eta / cfg.q * (math.log(M_t) - math.log(M_prev))


def _history_get(state: FciqmcState, t: int):
    for entry in reversed(state.history):
        if entry[0] == t:
            return entry
    raise KeyError(f"no population history for iteration {t}")


def fciqmc_step(
    state: FciqmcState,
    A: IterationMatrix,
    cfg: FciqmcConfig,
    rng: np.random.Generator,
    measure_error: bool = False,
) -> tuple[FciqmcState, StepDiagnostics]:
    """Advance one iteration with the matrix I - delta (H - s_t I).

    ``A``'s shift is overwritten with ``state.shift``.  With
    ``measure_error`` the exact product is formed to report ||xi||_2.
    """
    A.set_shift(state.shift)
    w = state.walkers
    initiators = state.initiators
    if cfg.initiator_enabled:
        grown = w.locations[np.abs(w.counts) > cfg.initiator_threshold]
        initiators = np.union1d(initiators, grown)
        events = spawn_step(A, w, rng, initiators)
        events = initiator_filter(events, w, initiators)
    else:
        events = spawn_step(A, w, rng)
    survivors = diagonal_step(A, w, rng)
    new_w = annihilate(events, survivors)

    diag = StepDiagnostics(shift=state.shift)
    if measure_error:
        mv = exact_matvec(A, to_sparse(w))
        diag.error_norm = norm2(axpy(-1.0, mv.product, to_sparse(new_w)))
        diag.product_norm = norm2(mv.product)
        diag.nnz_matvec = mv.nnz_before_compress

    t = state.t + 1
    M = new_w.population
    if M == 0:
        raise PopulationCollapse(f"population vanished at iteration {t}")
    if cfg.max_population is not None and M > cfg.max_population:
        raise PopulationExplosion(f"population {M} exceeds the cap {cfg.max_population} at iteration {t}")
    hist = deque(state.history, maxlen=cfg.q + 1)
    hist.append((t, M, state.shift))
    new_state = replace(state, walkers=new_w, t=t, initiators=initiators, history=tuple(hist))
    if state.phase == GROWTH:
        if M > cfg.target_population:
            new_state = replace(new_state, phase=CONTROLLED)
    else:
        s = update_shift(new_state, cfg)
        hist[-1] = (t, M, s)
        new_state = replace(new_state, shift=s, history=tuple(hist))

    diag.population = M
    diag.l1 = float(M)
    diag.l2 = float(np.sqrt(np.dot(new_w.counts.astype(float), new_w.counts.astype(float))))
    return new_state, diag


# -- replica and diagnostic helpers ------------------------------------------


def one_step_replicas(A: ColumnOracle, w: WalkerEnsemble, n: int, rng: np.random.Generator, chunk: int = 4096) -> np.ndarray:
    """``n`` independent plain steps from ``w``, as a dense (n, dim) array.

    Replica r consumes the same 3M uniforms, in the same order, that the r-th
    sequential ``spawn_step`` + ``diagonal_step`` pair would.
    """
    locs, signs, reps = _expand(w)
    M = locs.size
    d = np.repeat(A.diagonals(w.locations), reps)
    out = np.zeros((n, w.dim), dtype=np.int64)
    for start in range(0, n, chunk):
        r = min(chunk, n - start)
        u = rng.random((r, 3 * M))
        rep_locs = np.tile(locs, r)
        rep_signs = np.tile(signs, r)
        who, target, cnt, sgn = _spawn_kernel(
            A, rep_locs, rep_signs, u[:, :M].ravel(), u[:, M : 2 * M].ravel()
        )
        replica = who // M
        block = np.zeros(r * w.dim, dtype=np.int64)
        np.add.at(block, replica * w.dim + target, cnt * sgn)
        kids = _diagonal_kernel(np.tile(d, r), rep_signs, u[:, 2 * M :].ravel())
        np.add.at(block, np.repeat(np.arange(r), M) * w.dim + rep_locs, kids)
        out[start : start + r] = block.reshape(r, w.dim)
    return out


def evolve_unannihilated(
    A: ColumnOracle, positive: WalkerEnsemble, negative: WalkerEnsemble, rng: np.random.Generator
) -> tuple[WalkerEnsemble, WalkerEnsemble]:
    """One step in which opposite-signed walkers never cancel.

    ``positive`` and ``negative`` hold nonnegative counts of + and - walkers;
    children are routed to one or the other by their sign.
    """
    lp, _, rp = _expand(positive)
    ln, _, rn = _expand(negative)
    locs = np.concatenate([lp, ln])
    signs = np.concatenate([np.ones(lp.size, np.int64), -np.ones(ln.size, np.int64)])
    M = locs.size
    u = rng.random(3 * M)
    who, target, cnt, sgn = _spawn_kernel(A, locs, signs, u[:M], u[M : 2 * M])
    kids = _diagonal_kernel(A.diagonals(locs), signs, u[2 * M :])
    all_locs = np.concatenate([target, locs])
    all_signed = np.concatenate([cnt * sgn, kids])
    pos = all_signed > 0
    dim = positive.dim
    return _merge(all_locs[pos], all_signed[pos], dim), _merge(all_locs[~pos], -all_signed[~pos], dim)


def proposition_constant(A: ColumnOracle) -> float:
    """max_k (||a_k||_0 - 2) ||a_{o,k}||_2^2 + 1/2 by enumerating every column."""
    ks = np.arange(A.dim)
    ptr, _, vals = A.offdiag_columns(ks)
    counts = np.diff(ptr)
    sq = np.zeros(A.dim)
    np.add.at(sq, np.repeat(ks, counts), vals**2)
    nnz = counts + (A.diagonals(ks) != 0)
    return float(np.max((nnz - 2) * sq) + 0.5)


def walkers_from_vector(v: SparseVector) -> WalkerEnsemble:
    """Round a real vector's entries to the nearest integers as walkers."""
    counts = np.rint(v.values).astype(np.int64)
    keep = counts != 0
    return WalkerEnsemble(v.indices[keep], counts[keep], v.dim, check=False)
