"""Experiment configuration: a flat set of keys, grouped into INI sections on disk."""

from __future__ import annotations

import configparser
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from elastinv.phantom import BumpSpec, PhantomSpec, preset


class ConfigError(ValueError):
    pass


SECTIONS = {
    "mesh": ("inverse_n", "data_n"),
    "model": ("operator", "bc", "c_p", "mu_floor", "smoothing_s", "omega1", "solver_tol"),
    "data": ("phantom", "phantom_background", "phantom_inclusions", "noise_level", "seed"),
    "inversion": ("method", "tau", "max_iters", "initial_lambda", "initial_mu"),
    "output": ("output_dir",),
}

METHODS = ("tpg", "landweber", "landweber-sd")


@dataclass
class ExperimentConfig:
    inverse_n: int = 32
    data_n: int = 64
    operator: str = "Fc"
    bc: str = "mixed"
    c_p: float = -1e-4
    mu_floor: float = 0.05
    smoothing_s: float = 2.0
    omega1: tuple = (0.05, 0.95, 0.05, 0.95)
    solver_tol: float = 1e-10
    phantom: str = "smooth"
    phantom_background: tuple = (2.0, 0.3)
    # JSON list of {"center": [x, y], "r1", "r2", "lambda", "mu"}; overrides the preset
    phantom_inclusions: str | None = None
    noise_level: float = 0.005
    seed: int = 0
    method: str = "tpg"
    tau: float = 1.0
    max_iters: int = 5000
    initial_lambda: float | None = None
    initial_mu: float | None = None
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.operator not in ("F", "Fc"):
            raise ConfigError(f"operator must be F or Fc, got {self.operator!r}")
        if self.bc not in ("mixed", "pure"):
            raise ConfigError(f"bc must be mixed or pure, got {self.bc!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.inverse_n < 1:
            raise ConfigError("inverse_n must be positive")
        if not self.data_n > self.inverse_n:
            raise ConfigError(
                f"data mesh (n={self.data_n}) must be finer than the inverse mesh "
                f"(n={self.inverse_n}) to avoid an inverse crime"
            )
        if self.tau < 1:
            raise ConfigError("tau must be at least 1")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be non-negative")
        if len(self.omega1) != 4:
            raise ConfigError("omega1 needs four numbers: xmin, xmax, ymin, ymax")
        numbers = [self.c_p, self.mu_floor, self.smoothing_s, self.solver_tol, self.noise_level,
                   self.tau, *self.omega1, *self.phantom_background]
        numbers += [v for v in (self.initial_lambda, self.initial_mu) if v is not None]
        if not all(math.isfinite(v) for v in numbers):
            raise ConfigError("all numeric settings must be finite")

    @property
    def initial_guess(self) -> tuple[float, float]:
        default = (2.0, 0.3) if self.operator == "F" else (0.0, 0.0)
        lam = default[0] if self.initial_lambda is None else self.initial_lambda
        mu = default[1] if self.initial_mu is None else self.initial_mu
        return lam, mu

    def phantom_spec(self) -> PhantomSpec:
        if self.phantom_inclusions is None:
            spec = preset(self.phantom)
            if tuple(self.phantom_background) == spec.background:
                return spec
            bg = tuple(self.phantom_background)
            return PhantomSpec(bg, tuple(
                (dataclasses.replace(bl, h2=bg[0]), dataclasses.replace(bm, h2=bg[1]))
                for bl, bm in spec.inclusions
            ))
        try:
            items = json.loads(self.phantom_inclusions)
            bg = tuple(self.phantom_background)
            inclusions = tuple(
                (
                    BumpSpec(tuple(it["center"]), it["r1"], it["r2"], it["lambda"], bg[0]),
                    BumpSpec(tuple(it["center"]), it["r1"], it["r2"], it["mu"], bg[1]),
                )
                for it in items
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot parse phantom_inclusions: {exc}") from exc
        return PhantomSpec(bg, inclusions)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        values = dataclasses.asdict(self)
        for key, raw in overrides.items():
            key = key.split(".")[-1]
            if key not in values:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _convert(key, raw)
        return ExperimentConfig(**values)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        values = dataclasses.asdict(self)
        for section, keys in SECTIONS.items():
            cp[section] = {}
            for key in keys:
                v = values[key]
                if v is None:
                    continue
                cp[section][key] = ", ".join(repr(float(t)) for t in v) if isinstance(v, (tuple, list)) else str(v)
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in cp[section].items())
            lines.append("")
        return "\n".join(lines)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key: str, raw):
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "float | None":
            return None if text.lower() in ("", "none") else float(text)
        if kind == "tuple":
            return tuple(float(t) for t in text.replace("(", "").replace(")", "").split(","))
        if kind == "str | None":
            return None if text.lower() in ("", "none") else text
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"{source}: key {key!r} does not belong in [{section}]")
            values[key] = _convert(key, raw)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))
