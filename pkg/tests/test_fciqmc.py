import math

import numpy as np
import pytest

from stochpower.errors import PopulationCollapse
from stochpower.fciqmc import (
    CONTROLLED,
    GROWTH,
    FciqmcConfig,
    FciqmcState,
    SpawnEvents,
    annihilate,
    diagonal_step,
    evolve_unannihilated,
    fciqmc_step,
    initiator_filter,
    one_step_replicas,
    proposition_constant,
    spawn_step,
    update_shift,
)
from stochpower.hamiltonian import DenseMatrix, IterationMatrix
from stochpower.rng import stream
from stochpower.vectors import WalkerEnsemble, norm1

from conftest import near_identity


def ens(d, dim=10):
    return WalkerEnsemble.from_dict(d, dim)


def events(rows, dim=10):
    """rows of (parent, target, count, sign)."""
    return SpawnEvents.from_events([(p, True, t, c, s) for p, t, c, s in rows], dim)


@pytest.fixture
def star():
    h = np.zeros((4, 4))
    h[0, 1:] = h[1:, 0] = [0.25, 0.25, -0.25]
    return IterationMatrix(DenseMatrix(h), 0.01)


class TestSpawn:
    def test_expectation_matches_column(self, star):
        n = 1_000_000
        ev = spawn_step(star, ens({0: n}, 4), np.random.default_rng(0))
        vec = np.zeros(4)
        np.add.at(vec, ev.target, ev.count * ev.sign)
        se = math.sqrt(0.0075 / 3 * n) / n
        np.testing.assert_allclose(vec[1:] / n, [-0.0025, -0.0025, 0.0025], atol=5 * se)
        assert vec[0] == 0
        assert np.all(ev.count == 1)  # Q = 0.0075 < 1

    def test_zero_column_spawns_nothing(self):
        A = IterationMatrix(DenseMatrix(np.diag([1.0, 2.0])), 0.1)
        assert len(spawn_step(A, ens({0: 50}, 2), np.random.default_rng(0))) == 0

    def test_negative_parent_flips_sign(self, star):
        pos = spawn_step(star, ens({0: 2000}, 4), stream(1, 3))
        neg = spawn_step(star, ens({0: -2000}, 4), stream(1, 3))
        np.testing.assert_array_equal(pos.target, neg.target)
        np.testing.assert_array_equal(pos.sign, -neg.sign)

    def test_event_records(self, star):
        ev = spawn_step(star, ens({0: 5000}, 4), stream(2))
        for e in ev:
            assert e.parent_location == 0 and e.count >= 1 and e.sign in (-1, 1)


class TestDiagonal:
    def _matrix(self, d):
        return IterationMatrix(DenseMatrix(np.diag([(1.0 - d) / 0.5, 0.0])), 0.5)

    def test_unit_diagonal_keeps_all(self):
        A = self._matrix(1.0)
        out = diagonal_step(A, ens({0: -7}, 2), np.random.default_rng(0))
        assert out.as_dict() == {0: -7}

    def test_survival_probability(self):
        A = self._matrix(0.95)
        n = 200_000
        out = diagonal_step(A, ens({0: n}, 2), np.random.default_rng(1))
        assert abs(out.get(0) / n - 0.95) < 5 * math.sqrt(0.95 * 0.05 / n)

    def test_negative_diagonal_flips(self):
        A = self._matrix(-0.2)
        n = 200_000
        out = diagonal_step(A, ens({0: n}, 2), np.random.default_rng(2))
        assert abs(-out.get(0) / n - 0.2) < 5 * math.sqrt(0.2 * 0.8 / n)


class TestInitiatorFilter:
    def test_single_event_to_empty_dropped(self):
        out = initiator_filter(events([(1, 5, 1, 1)]), ens({1: 2}), initiators=[])
        assert len(out) == 0

    def test_coincident_same_sign_kept(self):
        ev = events([(1, 5, 1, 1), (2, 5, 2, 1)])
        out = initiator_filter(ev, ens({1: 2, 2: 1}), initiators=[])
        assert len(out) == 2

    def test_opposite_signs_do_not_count(self):
        ev = events([(1, 5, 1, 1), (2, 5, 1, -1)])
        assert len(initiator_filter(ev, ens({1: 2, 2: 1}), initiators=[])) == 0

    def test_occupied_target_kept(self):
        ev = events([(1, 3, 1, -1)])
        assert len(initiator_filter(ev, ens({1: 2, 3: 1}), initiators=[])) == 1

    def test_initiator_parent_passes(self):
        ev = events([(1, 5, 1, 1)])
        out = initiator_filter(ev, ens({1: 2}), initiators=[1])
        assert len(out) == 1 and out.parent_is_initiator.all()

    def test_all_initiators_is_identity(self):
        ev = events([(1, 5, 1, 1), (2, 6, 1, -1), (1, 2, 3, 1)])
        out = initiator_filter(ev, ens({1: 2, 2: 1}), initiators=range(10))
        assert list(out) == list(ev)


class TestAnnihilate:
    def test_partial(self):
        assert annihilate(events([(0, 5, 3, 1)]), ens({5: -2})).as_dict() == {5: 1}

    def test_full(self):
        assert annihilate(events([(0, 5, 2, 1)]), ens({5: -2})).as_dict() == {}

    def test_disjoint(self):
        out = annihilate(events([(0, 5, 2, -1)]), ens({1: 4}))
        assert out.as_dict() == {1: 4, 5: -2}
        assert out.population == norm1(out) == 6


class TestShift:
    def _state(self, M_prev, M_t, t=10, s_prev=0.3):
        return FciqmcState(
            walkers=ens({0: max(M_t, 1)}),
            shift=s_prev,
            phase=CONTROLLED,
            t=t,
            history=((t - 10, M_prev, s_prev), (t, M_t, s_prev)),
        )

    def test_stationary_population(self):
        assert update_shift(self._state(100, 100), FciqmcConfig(10)) == 0.3

    def test_e_fold_growth(self):
        st = self._state(1000, round(1000 * math.e))
        s = update_shift(st, FciqmcConfig(10, eta=0.05, q=10))
        assert s == pytest.approx(0.3 - 0.005, abs=1e-6)

    def test_off_period_unchanged(self):
        st = FciqmcState(ens({0: 5}), 0.7, CONTROLLED, 13, history=((12, 9, 0.7), (13, 5, 0.7)))
        assert update_shift(st, FciqmcConfig(10)) == 0.7

    def test_collapse(self):
        st = FciqmcState(ens({0: 5}), 0.7, CONTROLLED, 10, history=((0, 9, 0.7), (10, 0, 0.7)))
        with pytest.raises(PopulationCollapse):
            update_shift(st, FciqmcConfig(10))

    def test_growth_phase_rejected(self):
        with pytest.raises(ValueError):
            update_shift(FciqmcState(ens({0: 5}), 0.0), FciqmcConfig(10))

    @pytest.mark.parametrize("kw", [dict(eta=0), dict(q=0), dict(target_population=0), dict(initiator_threshold=0)])
    def test_config_validation(self, kw):
        args = dict(target_population=10) | kw
        with pytest.raises(ValueError):
            FciqmcConfig(**args)


class TestStep:
    def test_identity_matrix_is_static(self):
        H = DenseMatrix(np.full((5, 5), 0.0) + np.diag(np.full(5, -2.0)))
        A = IterationMatrix(H, 0.1)
        cfg = FciqmcConfig(10**6)
        w = ens({0: 3, 2: -4, 4: 1}, 5)
        st = FciqmcState.start(w, -2.0, cfg)
        for t in range(20):
            st, _ = fciqmc_step(st, A, cfg, stream(0, t))
        assert st.walkers == w

    def test_phase_transition_and_invariants(self, hubbard2):
        A = IterationMatrix(hubbard2, 0.01)
        hf = hubbard2.hartree_fock()
        cfg = FciqmcConfig(300, eta=5.0, initial_initiators=(hf,))
        s0 = hubbard2.diagonal(hf)
        st = FciqmcState.start(ens({hf: 200}, hubbard2.dim), s0, cfg)
        switched = None
        for t in range(1, 600):
            st, d = fciqmc_step(st, A, cfg, stream(4, t))
            assert d.population == st.population == norm1(st.walkers)
            if st.phase == GROWTH:
                assert st.shift == s0
            elif switched is None:
                switched = t
        assert switched is not None
        assert st.shift != s0

    def test_initiator_set_only_grows(self, hubbard2):
        A = IterationMatrix(hubbard2, 0.05)
        hf = hubbard2.hartree_fock()
        cfg = FciqmcConfig(10**5, initiator_enabled=True, initiator_threshold=2, initial_initiators=(hf,))
        st = FciqmcState.start(ens({hf: 50}, hubbard2.dim), hubbard2.diagonal(hf), cfg)
        prev = set(st.initiators.tolist())
        for t in range(100):
            st, _ = fciqmc_step(st, A, cfg, stream(5, t))
            cur = set(st.initiators.tolist())
            assert prev <= cur and hf in cur
            prev = cur
        assert len(prev) > 1

    def test_initiator_with_all_locations_equals_plain(self):
        H = near_identity(20, 7)
        A1, A2 = IterationMatrix(H, 0.5), IterationMatrix(H, 0.5)
        plain = FciqmcConfig(400, eta=1.0)
        init = FciqmcConfig(400, eta=1.0, initiator_enabled=True, initial_initiators=tuple(range(20)))
        w = ens({0: 30, 3: -4}, 20)
        a = FciqmcState.start(w, H.diagonal(0), plain)
        b = FciqmcState.start(w, H.diagonal(0), init)
        for t in range(200):
            a, _ = fciqmc_step(a, A1, plain, stream(9, t))
            b, _ = fciqmc_step(b, A2, init, stream(9, t))
            assert a.walkers == b.walkers and a.shift == b.shift

    def test_measured_error(self):
        H = near_identity(10, 1)
        A = IterationMatrix(H, 0.5)
        cfg = FciqmcConfig(1000)
        st = FciqmcState.start(ens({0: 100}, 10), 0.0, cfg)
        _, d = fciqmc_step(st, A, cfg, stream(0), measure_error=True)
        assert d.error_norm > 0 and d.product_norm > 0 and d.nnz_matvec >= 1

    def test_growth_on_4x4_hubbard(self, hubbard4):
        H = type(hubbard4)(4, 5, 5, 4.0, sampler="rejection")
        A = IterationMatrix(H, 0.01)
        hf = H.hartree_fock()
        cfg = FciqmcConfig(10**7)
        finals = []
        for seed in range(4):
            st = FciqmcState.start(ens({hf: 200}, H.dim), H.diagonal(hf), cfg)
            for t in range(15):
                st, _ = fciqmc_step(st, A, cfg, stream(seed, t))
            finals.append(st.population)
        assert np.mean(finals) >= 200


def test_replicas_match_sequential_kernels():
    H = near_identity(12, 2)
    A = IterationMatrix(H, 0.4)
    w = ens({0: 4, 5: -3, 11: 2}, 12)
    batch = one_step_replicas(A, w, 25, np.random.default_rng(3), chunk=7)
    g = np.random.default_rng(3)
    for row in batch:
        ev = spawn_step(A, w, g)
        out = annihilate(ev, diagonal_step(A, w, g))
        np.testing.assert_array_equal(row, out.to_dense())


def test_proposition_constant_by_hand():
    a = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.25], [0.0, 0.25, 1.0]])
    # column 1 has 3 nonzeros and off-diagonal 2-norm^2 0.3125
    assert proposition_constant(DenseMatrix(a)) == pytest.approx(0.3125 + 0.5)


def test_no_annihilation_sign_problem():
    rng = np.random.default_rng(0)
    n = 10
    h = rng.choice([-1.0, 1.0], size=(n, n)) * rng.uniform(0.5, 1.0, size=(n, n))
    h = np.triu(h, 1) + np.triu(h, 1).T
    A = IterationMatrix(DenseMatrix(h), 0.1, shift=-1.0)
    checkpoints = [0, 5, 10, 15]
    ratios = np.zeros((20, len(checkpoints)))
    for r in range(20):
        pos, neg = ens({0: 50}, n), WalkerEnsemble.empty(n)
        for t in range(checkpoints[-1] + 1):
            if t in checkpoints:
                net = norm1(WalkerEnsemble(np.concatenate([pos.locations, neg.locations]), np.concatenate([pos.counts, -neg.counts]), n))
                ratios[r, checkpoints.index(t)] = (pos.population + neg.population) / max(net, 1)
            pos, neg = evolve_unannihilated(A, pos, neg, stream(r, t))
    mean = ratios.mean(axis=0)
    assert mean[0] == 1.0
    assert np.all(np.diff(mean) > 0)
