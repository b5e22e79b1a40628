"""INI run configuration with a closed key set.

Every key has a type and a default; unknown sections or keys are errors so a
typo cannot silently fall back to a default. Full key set::

    [run]      experiment, eps, T, stride, seed, ladder, dt_per_eps, dt,
               c_cfl, c_osc, samples, refinements
    [grid]     shape, extents, backend, eps_ref
    [profile]  name, rho0, amplitude, mode, axis, velocity, velocity_wave,
               width, center, images
    [rem]      scheme, filter_strength, filter_order, shock_threshold
    [output]   dir
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from ..wkb import PROFILES

EXPERIMENTS = (
    "sweep", "coercivity", "preparation", "conservation", "constraints", "gauge", "identities",
    "wkb-rates", "vlasov", "spectrum", "sandwich", "budget",
)


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "sweep"
    eps: tuple[float, ...] = (0.1, 0.05, 0.025)
    T: float = 0.5
    stride: int = 10
    seed: int = 0
    ladder: str = "matched"
    dt_per_eps: float = 0.05
    dt: float = 0.0
    c_cfl: float = 0.5
    c_osc: float = 0.2
    samples: int = 20
    refinements: int = 3
    shape: tuple[int, int, int] = (64, 1, 1)
    extents: tuple[float, float, float] = (1.0, 1.0, 1.0)
    backend: str = "spectral"
    eps_ref: float = 0.1
    profile: str = "sine-bump"
    profile_params: dict[str, Any] = field(default_factory=dict)
    rem_scheme: str = "spectral"
    filter_strength: float = 36.0
    filter_order: int = 36
    shock_threshold: float = 0.5
    out: str = "runs/out"

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ConfigError(f"eps values must be positive, got {self.eps}")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError(f"eps list must be strictly decreasing, got {self.eps}")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.ladder not in ("matched", "fixed"):
            raise ConfigError(f"ladder must be 'matched' or 'fixed', got {self.ladder!r}")
        if len(self.shape) != 3 or any(n < 1 for n in self.shape):
            raise ConfigError(f"shape must be three positive integers, got {self.shape}")
        if len(self.extents) != 3 or any(L <= 0 for L in self.extents):
            raise ConfigError(f"extents must be three positive reals, got {self.extents}")
        if self.backend not in ("spectral", "fd2", "fd4"):
            raise ConfigError(f"backend must be spectral, fd2 or fd4, got {self.backend!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if self.rem_scheme not in ("spectral", "upwind"):
            raise ConfigError(f"rem scheme must be spectral or upwind, got {self.rem_scheme!r}")

    def with_overrides(self, **kw: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


# section -> key -> (attribute, parser)
_SCHEMA: dict[str, dict[str, tuple[str, Callable[[str], Any]]]] = {
    "run": {
        "experiment": ("experiment", str.strip),
        "eps": ("eps", _floats),
        "t": ("T", float),
        "stride": ("stride", int),
        "seed": ("seed", int),
        "ladder": ("ladder", str.strip),
        "dt_per_eps": ("dt_per_eps", float),
        "dt": ("dt", float),
        "c_cfl": ("c_cfl", float),
        "c_osc": ("c_osc", float),
        "samples": ("samples", int),
        "refinements": ("refinements", int),
    },
    "grid": {
        "shape": ("shape", _ints),
        "extents": ("extents", _floats),
        "backend": ("backend", str.strip),
        "eps_ref": ("eps_ref", float),
    },
    "rem": {
        "scheme": ("rem_scheme", str.strip),
        "filter_strength": ("filter_strength", float),
        "filter_order": ("filter_order", int),
        "shock_threshold": ("shock_threshold", float),
    },
    "output": {"dir": ("out", str.strip)},
}

_PROFILE_KEYS: dict[str, Callable[[str], Any]] = {
    "rho0": float, "amplitude": float, "mode": int, "axis": int, "velocity": _floats,
    "velocity_wave": float, "width": float, "center": _floats, "images": int,
}


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_parser(cp, str(path))


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_string(text)
    return config_from_parser(cp, "<string>")


def config_from_parser(cp: configparser.ConfigParser, where: str) -> RunConfig:
    kw: dict[str, Any] = {}
    params: dict[str, Any] = {}
    for section in cp.sections():
        if section == "profile":
            for key, raw in cp.items(section):
                if key == "name":
                    kw["profile"] = raw.strip()
                elif key in _PROFILE_KEYS:
                    params[key] = _convert(_PROFILE_KEYS[key], raw, where, section, key)
                else:
                    raise ConfigError(f"{where}: unknown key [{section}] {key}")
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"{where}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{where}: unknown key [{section}] {key}")
            attr, conv = _SCHEMA[section][key]
            kw[attr] = _convert(conv, raw, where, section, key)
    if params:
        kw["profile_params"] = params
    return RunConfig(**kw)


def _convert(conv: Callable[[str], Any], raw: str, where: str, section: str, key: str) -> Any:
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for [{section}] {key} = {raw!r}: {exc}") from exc
