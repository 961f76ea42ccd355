"""Command-line front end.

    stochpower run --config exp.ini [--seed S] [--out DIR] [--normalize-wall]
    stochpower sweep --config exp.ini --param m --values 50,100,200 [--out DIR]
    stochpower oracle (--config exp.ini | --system SPEC) --out ref.csv

Exit codes: 0 success, 1 other solver error, 2 configuration or input
error, 3 walker population collapse or blow-up, 4 non-convergence, 5 degenerate
iterate or undefined estimator.  ``STOCHPOWER_WORKERS`` sets the number of
worker processes used by ``sweep`` (default 1).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .driver.runner import build_system, compute_reference, run_experiment, write_reference
from .errors import ConfigError, StochPowerError

log = logging.getLogger("stochpower")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_COLLAPSE = 3
EXIT_NONCONVERGENCE = 4
EXIT_DEGENERATE = 5

SWEEP_FIELDS = ("param", "value", "run_index", "status", "avg_error", "std", "mse", "tau_auto", "avg_compression_error", "time_per_iter", "mean_energy")


def exit_code(exc: BaseException) -> int:
    return getattr(exc, "exit_code", EXIT_ERROR)


def _write_run(out: Path, cfg: cfgmod.ExperimentConfig, result, run_index: int) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    result.record.write_csv(out / "records.csv", normalize_wall=cfg.output.normalize_wall)
    summary = {
        "method": cfg.solver.method,
        "seed": cfg.solver.seed,
        "run_index": run_index,
        "reference_energy": result.reference.energy,
        "controlled_from": result.record.controlled_from,
        "stats": result.summary.as_dict() if result.summary else None,
        "config": cfgmod.serialize(cfg),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def cmd_run(args) -> int:
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg = cfgmod.set_parameter(cfg, "solver.seed", str(args.seed))
    if args.out is not None:
        cfg = cfgmod.set_parameter(cfg, "output.dir", args.out)
    if args.normalize_wall:
        cfg = cfgmod.set_parameter(cfg, "output.normalize_wall", "true")
    cfg.validate()
    result = run_experiment(cfg)
    _write_run(Path(cfg.output.dir), cfg, result, 0)
    s = result.summary
    log.info("wrote %s (avg error %s, std %s)", cfg.output.dir, s.avg_error, s.std)
    return EXIT_OK


def _sweep_one(cfg_text: str, param: str, value: str, run_index: int, out_dir: str) -> dict:
    row = {"param": param, "value": value, "run_index": run_index}
    try:
        cfg = cfgmod.set_parameter(cfgmod.parse(cfg_text), param, value)
        cfg = cfgmod.set_parameter(cfg, "output.dir", str(Path(out_dir) / f"{param}={value}"))
        cfg.validate()
        result = run_experiment(cfg, run_index=run_index)
        _write_run(Path(cfg.output.dir), cfg, result, run_index)
        stats = result.summary.as_dict()
        row.update({k: stats.get(k) for k in SWEEP_FIELDS if k in stats})
        row["status"] = "ok"
    except StochPowerError as exc:
        row["status"] = f"error {exit_code(exc)}: {exc}"
    return row


def cmd_sweep(args) -> int:
    cfg = cfgmod.load(args.config)
    if args.param not in cfgmod.parameter_names():
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        log.info("empty value list, nothing to do")
        return EXIT_OK
    # fail fast on values that do not parse
    for v in values:
        cfgmod.set_parameter(cfg, args.param, v).validate()
    out_dir = args.out or cfg.output.dir
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    text = cfgmod.serialize(cfg)
    workers = int(os.environ.get("STOCHPOWER_WORKERS", "1") or 1)
    jobs = [(text, args.param, v, i, out_dir) for i, v in enumerate(values)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, *zip(*jobs)))
    else:
        rows = [_sweep_one(*j) for j in jobs]
    with open(Path(out_dir) / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else (format(r[k], ".17g") if isinstance(r[k], float) else r[k])) for k in SWEEP_FIELDS})
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        log.error("%s=%s: %s", r["param"], r["value"], r["status"])
    return EXIT_ERROR if failed else EXIT_OK


def parse_system_spec(spec: str) -> cfgmod.ExperimentConfig:
    """``hubbard:L=2,n_up=1,n_down=1,U=4``, ``file:PATH`` or ``dense-random:N=200,gap=1``."""
    kind, _, rest = spec.partition(":")
    cfg = cfgmod.ExperimentConfig(system=cfgmod.SystemConfig(kind=kind))
    if kind == "file":
        return cfgmod.set_parameter(cfg, "system.path", rest)
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"bad system item {item!r}; expected key=value")
        key = {"seed": "matrix_seed"}.get(key.strip(), key.strip())
        cfg = cfgmod.set_parameter(cfg, f"system.{key}", value)
    return cfg


def cmd_oracle(args) -> int:
    if (args.config is None) == (args.system is None):
        raise ConfigError("give exactly one of --config and --system")
    cfg = cfgmod.load(args.config) if args.config else parse_system_spec(args.system)
    if args.delta is not None:
        cfg = cfgmod.set_parameter(cfg, "solver.delta", str(args.delta))
    cfg = dataclasses.replace(cfg, reference=cfgmod.ReferenceConfig(kind="none"), stats=cfgmod.StatsConfig(i0=0, w=2))
    cfg.validate()
    H, start = build_system(cfg)
    ref = compute_reference(H, start, cfg.solver.delta)
    write_reference(args.out, ref)
    log.info("ground energy %.12f written to %s", ref.energy, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochpower", description="Stochastic power-iteration eigensolvers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--normalize-wall", action="store_true", help="write wall_ms as 0 for byte comparisons")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run one experiment per parameter value")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="export the exact ground state")
    o.add_argument("--config")
    o.add_argument("--system")
    o.add_argument("--delta", type=float)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except StochPowerError as exc:
        print(f"stochpower: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
