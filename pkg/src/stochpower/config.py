"""Experiment configuration: INI-style sections of ``key = value`` lines.

Example::

    [system]
    kind = hubbard
    L = 2
    n_up = 1
    n_down = 1
    U = 4

    [solver]
    method = fri-systematic
    delta = 0.01
    m = 50
    iterations = 1000
    seed = 7

``serialize`` writes every known key in a fixed order, omitting unset
optional ones, so ``serialize(parse(text))`` is a canonical form.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ConfigError

SYSTEM_KINDS = ("hubbard", "file", "dense-random")
METHODS = ("exact", "fciqmc", "ifciqmc", "fri-systematic", "fri-bernoulli", "ht")
REFERENCE_KINDS = ("none", "dense-oracle", "file")
EXACT_ERROR = ("auto", "on", "off")

# default statistics windows (burn-in i0, window w)
WALKER_WINDOW = (2400, 1600)
FRI_WINDOW = (600, 400)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    return int(text.strip(), 0)


@dataclass
class SystemConfig:
    kind: str = "hubbard"
    L: int | None = None
    n_up: int | None = None
    n_down: int | None = None
    U: float | None = None
    sampler: str = "uniform"
    path: str | None = None
    N: int | None = None
    gap: float = 1.0
    coupling: float = 0.01
    matrix_seed: int = 0


@dataclass
class SolverConfig:
    method: str = "fri-systematic"
    delta: float = 0.01
    m: int = 1000
    iterations: int = 1000
    seed: int = 0
    start: int | None = None


@dataclass
class FciqmcParams:
    eta: float | None = None
    q: int = 10
    initial_shift: float | None = None
    initiator_threshold: int = 3
    initial_walkers: int = 10
    exact_error: str = "auto"
    max_population: int | None = None


@dataclass
class StatsConfig:
    i0: int | None = None
    w: int | None = None
    seconds_budget: float = 1e4


@dataclass
class ReferenceConfig:
    kind: str = "dense-oracle"
    path: str | None = None


@dataclass
class OutputConfig:
    dir: str = "out"
    normalize_wall: bool = False


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    fciqmc: FciqmcParams = field(default_factory=FciqmcParams)
    stats: StatsConfig = field(default_factory=StatsConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def window(self) -> tuple[int, int]:
        default = WALKER_WINDOW if self.solver.method in ("fciqmc", "ifciqmc") else FRI_WINDOW
        i0 = self.stats.i0 if self.stats.i0 is not None else default[0]
        w = self.stats.w if self.stats.w is not None else default[1]
        return i0, w

    def eta(self) -> float:
        """Shift damping; by default 0.05 per unit of imaginary time."""
        if self.fciqmc.eta is not None:
            return self.fciqmc.eta
        return 0.05 / self.solver.delta

    def population_cap(self) -> int:
        """Walker count at which a run is aborted (50 m + 10^5 by default)."""
        if self.fciqmc.max_population is not None:
            return self.fciqmc.max_population
        return 50 * self.solver.m + 100_000

    def validate(self) -> "ExperimentConfig":
        s, v = self.system, self.solver
        if s.kind not in SYSTEM_KINDS:
            raise ConfigError(f"system.kind must be one of {SYSTEM_KINDS}")
        if s.kind == "hubbard":
            for key in ("L", "n_up", "n_down", "U"):
                if getattr(s, key) is None:
                    raise ConfigError(f"hubbard system needs system.{key}")
            if s.sampler not in ("uniform", "rejection"):
                raise ConfigError("system.sampler must be uniform or rejection")
        elif s.kind == "file":
            if s.path is None:
                raise ConfigError("file system needs system.path")
        elif s.N is None or s.N < 2:
            raise ConfigError("dense-random system needs system.N >= 2")
        extra = {
            "hubbard": ("path", "N"),
            "file": ("L", "n_up", "n_down", "U", "N"),
            "dense-random": ("L", "n_up", "n_down", "U", "path"),
        }[s.kind]
        given = [k for k in extra if getattr(s, k) is not None]
        if given:
            raise ConfigError(f"system.kind = {s.kind} conflicts with system.{given[0]}")
        if v.method not in METHODS:
            raise ConfigError(f"solver.method must be one of {METHODS}")
        if not v.delta > 0:
            raise ConfigError("solver.delta must be positive")
        if v.iterations < 1:
            raise ConfigError("solver.iterations must be >= 1")
        if v.m < 1:
            raise ConfigError("solver.m must be >= 1")
        if not 0 <= v.seed < 2**64:
            raise ConfigError("solver.seed must be a 64-bit unsigned integer")
        f = self.fciqmc
        if f.eta is not None and not f.eta > 0:
            raise ConfigError("fciqmc.eta must be positive")
        if f.q < 1 or f.initiator_threshold < 1 or f.initial_walkers < 1:
            raise ConfigError("fciqmc.q, initiator_threshold and initial_walkers must be >= 1")
        if f.max_population is not None and f.max_population < v.m:
            raise ConfigError("fciqmc.max_population must be at least solver.m")
        if f.exact_error not in EXACT_ERROR:
            raise ConfigError(f"fciqmc.exact_error must be one of {EXACT_ERROR}")
        i0, w = self.window()
        if i0 < 0 or w < 2:
            raise ConfigError("stats window needs i0 >= 0 and w >= 2")
        if i0 + w > v.iterations + 1:
            raise ConfigError(
                f"stats window [{i0}, {i0 + w}) does not fit a record of {v.iterations + 1} rows"
            )
        if not self.stats.seconds_budget > 0:
            raise ConfigError("stats.seconds_budget must be positive")
        r = self.reference
        if r.kind not in REFERENCE_KINDS:
            raise ConfigError(f"reference.kind must be one of {REFERENCE_KINDS}")
        if r.kind == "file" and r.path is None:
            raise ConfigError("file reference needs reference.path")
        return self


_SECTIONS = {
    "system": SystemConfig,
    "solver": SolverConfig,
    "fciqmc": FciqmcParams,
    "stats": StatsConfig,
    "reference": ReferenceConfig,
    "output": OutputConfig,
}

_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "int": _int,
    "float": float,
    "str": str.strip,
    "bool": _bool,
}


def _converter(cls, name: str) -> Callable[[str], Any]:
    annotation = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    base = str(annotation).split("|")[0].strip()
    return _CONVERTERS[base]


def _format(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def parameter_names() -> dict[str, tuple[str, str]]:
    """Names accepted by ``set_parameter``: ``section.key``, and bare ``key``
    when the key is unique across sections."""
    names: dict[str, tuple[str, str]] = {}
    seen: dict[str, int] = {}
    for sec, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            names[f"{sec}.{f.name}"] = (sec, f.name)
            seen[f.name] = seen.get(f.name, 0) + 1
    for sec, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            if seen[f.name] == 1:
                names[f.name] = (sec, f.name)
    return names


def set_parameter(cfg: ExperimentConfig, name: str, text: str) -> ExperimentConfig:
    """Copy of ``cfg`` with one parameter replaced (value given as text)."""
    names = parameter_names()
    if name not in names:
        raise ConfigError(f"unknown parameter {name!r}")
    sec, key = names[name]
    section = getattr(cfg, sec)
    try:
        value = _converter(type(section), key)(text)
    except ValueError as exc:
        raise ConfigError(f"bad value {text!r} for {name}: {exc}") from None
    return dataclasses.replace(cfg, **{sec: dataclasses.replace(section, **{key: value})})


def parse(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    parts = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        cls = _SECTIONS[sec]
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in cp.items(sec):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            if raw.strip().lower() in ("", "none") and key not in ("kind", "method"):
                kwargs[key] = None
                continue
            try:
                kwargs[key] = _converter(cls, key)(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {exc}") from None
        parts[sec] = cls(**kwargs)
    return ExperimentConfig(**parts)


def load(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse(text)


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for sec in _SECTIONS:
        section = getattr(cfg, sec)
        lines.append(f"[{sec}]")
        for f in dataclasses.fields(section):
            x = getattr(section, f.name)
            if x is not None:
                lines.append(f"{f.name} = {_format(x)}")
        lines.append("")
    return "\n".join(lines)
