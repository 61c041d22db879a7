"""Run configuration: a sectioned key-value text file.

Example::

    [grid]
    N_x = 64
    N_z = 64
    a = 1.0

    [time]
    T = 1.0
    dt = 1e-3

    [initial]
    preset = single-mode
    k = 1
    m = 0
    amplitude = 0.1

    [noise]
    J = 16
    sigma0 = 0.1
    beta = 1.0
    seed = 0
    schedule = 0.0:1.0, 0.5:2.0

Every key is optional; omitted keys take the defaults below.  Unknown
sections or keys, malformed values and constraint violations are all
collected and reported together.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, List, Tuple

from .grid import Grid
from .noise import BoundaryNoiseModel

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Validation failure carrying every violation found."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _int(s: str) -> int:
    return int(s.strip())


def _float(s: str) -> float:
    return float(s.strip())


def _str(s: str) -> str:
    return s.strip()


def _floats(s: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in s.replace(",", " ").split())


def _schedule(s: str) -> Tuple[Tuple[float, float], ...]:
    out = []
    for item in s.split(","):
        item = item.strip()
        if not item:
            continue
        t, c = item.split(":")
        out.append((float(t), float(c)))
    return tuple(out)


def _fmt(v: Any) -> str:
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{repr(float(t))}:{repr(float(c))}" for t, c in v)
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> key -> (attribute, parser, default)
_SCHEMA: Dict[str, Dict[str, Tuple[str, Callable[[str], Any], Any]]] = {
    "grid": {"N_x": ("n_x", _int, 64), "N_z": ("n_z", _int, 64), "a": ("a", _float, 1.0)},
    "time": {"T": ("T", _float, 1.0), "dt": ("dt", _float, 1e-3)},
    "physics": {"nu": ("nu", _float, 1.0)},
    "initial": {
        "preset": ("ic_preset", _str, "zero"),
        "k": ("ic_k", _int, 1),
        "m": ("ic_m", _int, 0),
        "amplitude": ("ic_amplitude", _float, 0.1),
        "file": ("ic_file", _str, ""),
    },
    "noise": {
        "J": ("J", _int, 16),
        "sigma0": ("sigma0", _float, 0.1),
        "beta": ("beta", _float, 1.0),
        "seed": ("seed", _int, 0),
        "schedule": ("schedule", _schedule, ()),
        "substeps": ("substeps", _int, 1),
    },
    "diagnostics": {
        "window": ("window", _floats, (0.25, 0.75)),
        "t1": ("t1", _float, 0.1),
        "t2": ("t2", _float, 0.2),
        "contrast_threshold": ("contrast_threshold", _float, 0.1),
        "picard_tol": ("picard_tol", _float, 1e-10),
        "picard_max_iter": ("picard_max_iter", _int, 30),
        "T_bar": ("T_bar", _float, 0.1),
        "axis": ("axis", _str, "dt"),
        "levels": ("levels", _int, 3),
        "n_paths": ("n_paths", _int, 16),
    },
    "output": {"directory": ("directory", _str, "out"), "stride": ("stride", _int, 10)},
}

_PRESETS = ("zero", "single-mode", "file")
_AXES = ("dt", "N_z", "N_x", "J")


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; build with :func:`parse_config`."""

    n_x: int = 64
    n_z: int = 64
    a: float = 1.0
    T: float = 1.0
    dt: float = 1e-3
    nu: float = 1.0
    ic_preset: str = "zero"
    ic_k: int = 1
    ic_m: int = 0
    ic_amplitude: float = 0.1
    ic_file: str = ""
    J: int = 16
    sigma0: float = 0.1
    beta: float = 1.0
    seed: int = 0
    schedule: Tuple[Tuple[float, float], ...] = ()
    substeps: int = 1
    window: Tuple[float, ...] = (0.25, 0.75)
    t1: float = 0.1
    t2: float = 0.2
    contrast_threshold: float = 0.1
    picard_tol: float = 1e-10
    picard_max_iter: int = 30
    T_bar: float = 0.1
    axis: str = "dt"
    levels: int = 3
    n_paths: int = 16
    directory: str = "out"
    stride: int = 10

    def __post_init__(self):
        problems = _violations(self)
        if problems:
            raise ConfigError(problems)

    @property
    def grid(self) -> Grid:
        return Grid(self.n_x, self.n_z, self.a)

    @property
    def model(self) -> BoundaryNoiseModel:
        return BoundaryNoiseModel(self.J, self.sigma0, self.beta, self.seed, self.schedule)

    def initial_condition(self):
        """Velocity field named by the initial-condition preset."""
        from .initial import single_mode, zero

        if self.ic_preset == "zero":
            return zero(self.grid)
        if self.ic_preset == "single-mode":
            return single_mode(self.grid, self.ic_k, self.ic_m, self.ic_amplitude, self.nu)
        from .fields import VelocityField
        from .snapshot import read_snapshot

        u = read_snapshot(self.ic_file)
        if not isinstance(u, VelocityField) or u.grid != self.grid:
            raise ConfigError([f"initial.file: {self.ic_file} does not hold a velocity field on the configured grid"])
        return u

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        """Canonical text form; parse_config(to_text()) reproduces the config."""
        lines = []
        for section, keys in _SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (attr, _, _) in keys.items():
                lines.append(f"{key} = {_fmt(getattr(self, attr))}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _violations(c: RunConfig) -> List[str]:
    out = []

    def need(ok: bool, key: str, msg: str, value: Any) -> None:
        if not ok:
            out.append(f"{key}: {msg}, got {value!r}")

    for section, keys in _SCHEMA.items():
        for key, (attr, conv, _) in keys.items():
            v = getattr(c, attr)
            if conv is _float and not (isinstance(v, (int, float)) and math.isfinite(v)):
                out.append(f"{section}.{key}: must be a finite number, got {v!r}")
    if out:
        return out
    need(c.n_x >= 4 and c.n_x % 2 == 0, "grid.N_x", "must be an even integer >= 4", c.n_x)
    need(c.n_z >= 4, "grid.N_z", "must be an integer >= 4", c.n_z)
    need(c.a > 0, "grid.a", "must be positive", c.a)
    need(c.T > 0, "time.T", "must be positive", c.T)
    need(0 < c.dt <= c.T, "time.dt", "must satisfy 0 < dt <= T", c.dt)
    need(c.nu > 0, "physics.nu", "must be positive", c.nu)
    need(c.ic_preset in _PRESETS, "initial.preset", f"must be one of {_PRESETS}", c.ic_preset)
    if c.ic_preset == "single-mode":
        need(0 <= c.ic_k < c.n_x // 2, "initial.k", "must satisfy 0 <= k < N_x/2", c.ic_k)
        need(0 <= c.ic_m < c.n_z, "initial.m", "must satisfy 0 <= m < N_z", c.ic_m)
    if c.ic_preset == "file":
        need(bool(c.ic_file), "initial.file", "must name a snapshot file", c.ic_file)
    need(c.ic_amplitude >= 0, "initial.amplitude", "must be nonnegative", c.ic_amplitude)
    need(1 <= c.J < c.n_x, "noise.J", "must satisfy 1 <= J < N_x", c.J)
    need(c.sigma0 >= 0, "noise.sigma0", "must be nonnegative", c.sigma0)
    need(c.beta >= 0, "noise.beta", "must be nonnegative", c.beta)
    need(c.seed >= 0, "noise.seed", "must be nonnegative", c.seed)
    need(c.substeps >= 1, "noise.substeps", "must be >= 1", c.substeps)
    lo_hi = c.window
    need(
        len(lo_hi) == 2 and 0 < lo_hi[0] < lo_hi[1] < c.a,
        "diagnostics.window",
        "must be two heights with 0 < lo < hi < a",
        lo_hi,
    )
    need(0 < c.t1 < c.t2, "diagnostics.t1", "must satisfy 0 < t1 < t2", c.t1)
    need(c.contrast_threshold > 0, "diagnostics.contrast_threshold", "must be positive", c.contrast_threshold)
    need(c.picard_tol > 0, "diagnostics.picard_tol", "must be positive", c.picard_tol)
    need(c.picard_max_iter >= 1, "diagnostics.picard_max_iter", "must be >= 1", c.picard_max_iter)
    need(c.T_bar > 0, "diagnostics.T_bar", "must be positive", c.T_bar)
    need(c.axis in _AXES, "diagnostics.axis", f"must be one of {_AXES}", c.axis)
    need(c.levels >= 3, "diagnostics.levels", "must be >= 3", c.levels)
    need(c.n_paths >= 2, "diagnostics.n_paths", "must be >= 2", c.n_paths)
    need(bool(c.directory), "output.directory", "must be non-empty", c.directory)
    need(c.stride >= 1, "output.stride", "must be >= 1", c.stride)
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text, reporting all violations."""
    parser = configparser.ConfigParser(strict=True, interpolation=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    values: Dict[str, Any] = {}
    problems: List[str] = []
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"{section}: unknown section")
            continue
        for key, raw in parser.items(section):
            path = f"{section}.{key}"
            if key not in _SCHEMA[section]:
                problems.append(f"{path}: unknown key")
                continue
            attr, conv, _ = _SCHEMA[section][key]
            try:
                values[attr] = conv(raw)
            except (ValueError, TypeError):
                problems.append(f"{path}: cannot parse {raw!r}")
    if problems:
        raise ConfigError(problems)
    base = {f.name: f.default for f in fields(RunConfig)}
    base.update(values)
    return RunConfig(**base)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return parse_config(text)
