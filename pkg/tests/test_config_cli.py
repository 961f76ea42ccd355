import csv
import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochpower import cli
from stochpower import config as C
from stochpower.driver.power import dense_eig_smallest
from stochpower.driver.records import COLUMNS, RunRecord
from stochpower.driver.runner import build_problem, read_reference, run_experiment
from stochpower.errors import ConfigError, PopulationCollapse, PopulationExplosion
from stochpower.hamiltonian import dense_from_oracle
from stochpower.hubbard import HubbardMomentum
from stochpower.vectors import INFINITE_TANGENT

HUBBARD2_EXACT = """
[system]
kind = hubbard
L = 2
n_up = 1
n_down = 1
U = 4

[solver]
method = exact
delta = 0.1
iterations = 300

[stats]
i0 = 200
w = 100
"""


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- config


def test_parse_defaults_and_window():
    cfg = C.parse(HUBBARD2_EXACT).validate()
    assert cfg.system.L == 2 and cfg.system.U == 4.0
    assert cfg.solver.method == "exact"
    assert cfg.window() == (200, 100)
    assert C.parse("[solver]\nmethod = fciqmc\n").window() == C.WALKER_WINDOW
    assert C.parse("[solver]\nmethod = ht\n").window() == C.FRI_WINDOW


def test_eta_default_scales_with_delta():
    cfg = C.parse("[solver]\ndelta = 0.02\n")
    assert cfg.eta() == pytest.approx(2.5)
    assert C.parse("[fciqmc]\neta = 0.3\n").eta() == 0.3


def test_population_cap_default():
    cfg = C.parse("[solver]\nm = 100\n")
    assert cfg.population_cap() == 50 * 100 + 100_000
    assert C.parse("[solver]\nm = 100\n[fciqmc]\nmax_population = 500\n").population_cap() == 500


@pytest.mark.parametrize(
    "text",
    [
        "[bogus]\nx = 1\n",
        "[solver]\nbogus = 1\n",
        "[solver]\nm = abc\n",
        "not a config",
        "[output]\nnormalize_wall = maybe\n",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        C.parse(text)


@pytest.mark.parametrize(
    "patch",
    [
        {"solver.delta": "0"},
        {"solver.delta": "-1"},
        {"solver.iterations": "0"},
        {"solver.m": "0"},
        {"solver.method": "magic"},
        {"system.kind": "lattice"},
        {"system.N": "20"},  # two system sources
        {"system.L": "none"},
        {"stats.i0": "250"},  # window longer than the record
        {"stats.w": "1"},
        {"fciqmc.eta": "0"},
        {"fciqmc.exact_error": "sometimes"},
        {"fciqmc.max_population": "10"},
        {"reference.kind": "file"},
        {"solver.seed": str(2**64)},
    ],
)
def test_validate_rejects(patch):
    cfg = C.parse(HUBBARD2_EXACT)
    for k, v in patch.items():
        if v == "none":
            section, key = k.split(".")
            cfg = dataclasses.replace(cfg, **{section: dataclasses.replace(getattr(cfg, section), **{key: None})})
        else:
            cfg = C.set_parameter(cfg, k, v)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_set_parameter_accepts_bare_and_qualified_names():
    cfg = C.parse(HUBBARD2_EXACT)
    assert C.set_parameter(cfg, "m", "77").solver.m == 77
    assert C.set_parameter(cfg, "solver.m", "78").solver.m == 78
    assert C.set_parameter(cfg, "seed", "0x10").solver.seed == 16
    # "kind" exists in several sections, so only the qualified name works
    with pytest.raises(ConfigError):
        C.set_parameter(cfg, "kind", "file")
    with pytest.raises(ConfigError):
        C.set_parameter(cfg, "solver.nothing", "1")
    with pytest.raises(ConfigError):
        C.set_parameter(cfg, "m", "ten")
    # the original is untouched
    assert cfg.solver.m == 1000


def test_inline_comments_and_case_sensitive_keys():
    cfg = C.parse("[system]\nkind = hubbard  # lattice\nL = 4\nN = none\n")
    assert cfg.system.kind == "hubbard" and cfg.system.L == 4 and cfg.system.N is None


_methods = st.sampled_from(C.METHODS)
_configs = st.builds(
    lambda method, delta, m, it, seed, U, L, eta, norm, budget: C.ExperimentConfig(
        system=C.SystemConfig(kind="hubbard", L=L, n_up=1, n_down=1, U=U),
        solver=C.SolverConfig(method=method, delta=delta, m=m, iterations=it, seed=seed),
        fciqmc=C.FciqmcParams(eta=eta),
        stats=C.StatsConfig(seconds_budget=budget),
        output=C.OutputConfig(normalize_wall=norm),
    ),
    _methods,
    st.floats(1e-6, 1.0),
    st.integers(1, 10**7),
    st.integers(1, 10**6),
    st.integers(0, 2**64 - 1),
    st.floats(-10, 10),
    st.integers(2, 6),
    st.none() | st.floats(1e-3, 10),
    st.booleans(),
    st.floats(1.0, 1e6),
)


@given(_configs)
@settings(max_examples=100, deadline=None)
def test_serialize_parse_round_trip(cfg):
    text = C.serialize(cfg)
    back = C.parse(text)
    assert back == cfg
    assert C.serialize(back) == text


# ---------------------------------------------------------------- records


def test_record_csv_round_trip(tmp_path):
    rec = RunRecord("fri-systematic")
    rec.append(0, 0.0, 1, proj_energy=-1.0, l1=1.0, l2=1.0, tan_theta=INFINITE_TANGENT)
    rec.append(1, 0.25, 3, proj_energy=1 / 3, l1=1.2, l2=1.0, nnz_matvec=7, rel_compress_err=0.1, tan_theta=0.5)
    rec.append(2, 0.5, 2, proj_energy=None, shift=-2.0)
    path = tmp_path / "r.csv"
    rec.write_csv(path)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(COLUMNS)
    assert "0.33333333333333331" in text  # 17 significant digits
    assert text.splitlines()[1].endswith(",inf")
    back = RunRecord.read_csv(path)
    assert back.rows() == rec.rows()
    assert back.to_csv_text() == text


def test_record_rejects_bad_rows():
    rec = RunRecord()
    rec.append(0, 0.0, 1)
    with pytest.raises(ValueError):
        rec.append(0, 0.0, 1)
    with pytest.raises(ValueError):
        rec.append(1, 0.0, 1, shift=float("nan"))
    with pytest.raises(KeyError):
        rec.append(1, 0.0, 1, energy=1.0)


def test_normalize_wall_zeroes_column():
    rec = RunRecord()
    rec.append(0, 12.5, 1)
    assert rec.to_csv_text(normalize_wall=True).splitlines()[1].split(",")[1] == "0"


# ---------------------------------------------------------------- run


def test_cli_run_exact_matches_dense(tmp_path):
    cfgp = write(tmp_path, HUBBARD2_EXACT)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(cfgp), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    e0, _ = dense_eig_smallest(dense_from_oracle(HubbardMomentum(2, 1, 1, 4.0)))
    assert summary["reference_energy"] == pytest.approx(e0, abs=1e-12)
    assert abs(summary["stats"]["avg_error"]) < 1e-8
    rec = RunRecord.read_csv(out / "records.csv")
    assert len(rec) == 301
    assert rec.column("t") == list(range(301))


@pytest.mark.parametrize("method", ["fri-systematic", "fri-bernoulli", "ht", "fciqmc", "ifciqmc"])
def test_same_seed_gives_byte_identical_csv(tmp_path, method):
    text = HUBBARD2_EXACT.replace("method = exact", f"method = {method}\nm = 3\nseed = 11")
    text = text.replace("i0 = 200", "i0 = 100").replace("w = 100", "w = 50").replace("iterations = 300", "iterations = 150")
    cfgp = write(tmp_path, text)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["run", "--config", str(cfgp), "--out", str(out), "--normalize-wall"]) == 0
        outs.append((out / "records.csv").read_bytes())
    assert outs[0] == outs[1]
    # a different seed changes stochastic trajectories
    out = tmp_path / "o2"
    assert cli.main(["run", "--config", str(cfgp), "--out", str(out), "--normalize-wall", "--seed", "12"]) == 0
    if method != "ht":
        assert (out / "records.csv").read_bytes() != outs[0]


def test_run_index_changes_stream():
    cfg = C.parse(
        HUBBARD2_EXACT.replace("method = exact", "method = fri-systematic\nm = 2")
        .replace("iterations = 300", "iterations = 20")
        .replace("i0 = 200", "i0 = 0")
        .replace("w = 100", "w = 10")
    )
    a = run_experiment(cfg, run_index=0).record.to_csv_text(True)
    b = run_experiment(cfg, run_index=1).record.to_csv_text(True)
    assert a != b


def test_collapse_exit_code(tmp_path):
    text = """
[system]
kind = dense-random
N = 20
[solver]
method = fciqmc
delta = 0.01
m = 1000
iterations = 500
[stats]
i0 = 0
w = 2
"""
    cfg = C.parse(text)
    p = build_problem(cfg)
    s_kill = p.H.diagonal(p.start) - 1 / 0.01  # start diagonal of the iteration matrix is zero
    cfg = C.set_parameter(cfg, "initial_shift", repr(s_kill))
    with pytest.raises(PopulationCollapse):
        run_experiment(cfg)
    cfgp = write(tmp_path, C.serialize(cfg))
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == cli.EXIT_COLLAPSE


def test_single_walker_on_4x4_fails_population_control(tmp_path):
    text = """
[system]
kind = hubbard
L = 4
n_up = 5
n_down = 5
U = 4
sampler = rejection
[solver]
method = fciqmc
m = 1
iterations = 3000
seed = 1
[fciqmc]
initial_walkers = 1
[stats]
i0 = 0
w = 2
[reference]
kind = none
"""
    cfg = C.parse(text)
    with pytest.raises(PopulationExplosion):
        run_experiment(cfg)
    cfgp = write(tmp_path, text)
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == cli.EXIT_COLLAPSE


def test_missing_config_is_config_error(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.ini")]) == cli.EXIT_CONFIG


def test_invalid_config_exit_code(tmp_path):
    cfgp = write(tmp_path, HUBBARD2_EXACT.replace("delta = 0.1", "delta = -0.1"))
    assert cli.main(["run", "--config", str(cfgp), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


# ---------------------------------------------------------------- sweep


def test_sweep_empty_values_is_noop(tmp_path):
    cfgp = write(tmp_path, HUBBARD2_EXACT)
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(cfgp), "--param", "m", "--values", "", "--out", str(out)]) == 0
    assert not out.exists()


def test_sweep_unknown_parameter(tmp_path):
    cfgp = write(tmp_path, HUBBARD2_EXACT)
    assert cli.main(["sweep", "--config", str(cfgp), "--param", "solver.bogus", "--values", "1,2"]) == cli.EXIT_CONFIG


def test_sweep_bad_value(tmp_path):
    cfgp = write(tmp_path, HUBBARD2_EXACT)
    assert cli.main(["sweep", "--config", str(cfgp), "--param", "m", "--values", "1,x"]) == cli.EXIT_CONFIG


def test_sweep_writes_table(tmp_path):
    text = HUBBARD2_EXACT.replace("method = exact", "method = fri-systematic")
    cfgp = write(tmp_path, text)
    out = tmp_path / "sw"
    assert cli.main(["sweep", "--config", str(cfgp), "--param", "m", "--values", "2,4", "--out", str(out)]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["2", "4"]
    assert [r["run_index"] for r in rows] == ["0", "1"]
    assert all(r["status"] == "ok" for r in rows)
    assert (out / "m=2" / "records.csv").exists()
    summary = json.loads((out / "m=4" / "summary.json").read_text())
    assert "m = 4" in summary["config"]


def test_sweep_mse_nonincreasing_in_m():
    text = """
[system]
kind = dense-random
N = 200
[solver]
method = fri-systematic
delta = 0.1
iterations = 400
[stats]
i0 = 200
w = 200
"""
    cfg = C.parse(text)
    prob = build_problem(cfg)
    medians = []
    for m in (50, 100, 200):
        mses = []
        for seed in range(5):
            c = C.set_parameter(C.set_parameter(cfg, "m", str(m)), "seed", str(seed))
            mses.append(run_experiment(c, problem=prob).summary.mse)
        medians.append(float(np.median(mses)))
    assert medians[0] >= medians[1] >= medians[2]


# ---------------------------------------------------------------- oracle


def test_oracle_export_from_system_string(tmp_path):
    out = tmp_path / "ref.csv"
    assert cli.main(["oracle", "--system", "hubbard:L=2,n_up=1,n_down=1,U=4", "--out", str(out)]) == 0
    ref = read_reference(out)
    H = HubbardMomentum(2, 1, 1, 4.0)
    e0, u = dense_eig_smallest(dense_from_oracle(H))
    assert ref.energy == pytest.approx(e0, abs=1e-12)
    assert np.allclose(ref.vector.to_dense(), u, atol=1e-12)


def test_oracle_file_reference_feeds_run(tmp_path):
    ref = tmp_path / "ref.csv"
    assert cli.main(["oracle", "--system", "dense-random:N=30,seed=2", "--out", str(ref)]) == 0
    text = f"""
[system]
kind = dense-random
N = 30
matrix_seed = 2
[solver]
method = exact
delta = 0.1
iterations = 300
[stats]
i0 = 200
w = 100
[reference]
kind = file
path = {ref}
"""
    cfgp = write(tmp_path, text)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(cfgp), "--out", str(out)]) == 0
    rec = RunRecord.read_csv(out / "records.csv")
    assert rec.column("tan_theta")[-1] < 1e-6


def test_oracle_needs_one_source(tmp_path):
    assert cli.main(["oracle", "--out", str(tmp_path / "r.csv")]) == cli.EXIT_CONFIG
    assert cli.main(["oracle", "--system", "hubbard:L=2,bad", "--out", str(tmp_path / "r.csv")]) == cli.EXIT_CONFIG
