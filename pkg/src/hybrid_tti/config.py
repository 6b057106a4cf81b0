"""System configuration and its flat key-value file format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


BLOCK_MODES = ("rb", "user")


@dataclass(frozen=True)
class SystemConfig:
    """Full parameter set of one simulation cell.

    Defaults follow the reference deployment: 9 MHz split into 25 sub-bands of
    12 sub-carriers at 30 kHz, 14-symbol slots cut into 7 mini-slots of 2
    symbols, 25 eMBB users, 10% target BLER.
    """

    bandwidth_hz: float = 9e6
    n_s: int = 25
    n_ss: int = 12
    scs_hz: float = 30e3
    t_s: int = 14
    l_m: int = 2
    m: int = 7
    n_e: int = 25
    n_u: int = 1  # metadata only, packets carry no user id
    lam: float = 0.0
    epsilon: float = 0.10
    eta: float = 0.05
    mu: float = 50.0
    theta_max: float = 0.8
    tail_eps: float = 1e-12
    s_min: float = 1e-3
    snr_db_min: float = 5.0
    snr_db_max: float = 20.0
    mean_snr_db: Optional[tuple] = None
    fading: bool = True
    bits_per_symbol_cap: float = 8.0
    block_mode: str = "rb"
    seed: int = 0
    n_slots: int = 10000

    def __post_init__(self):
        for name in ("n_s", "n_ss", "t_s", "l_m", "m", "n_e", "n_u", "n_slots"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("bandwidth_hz", "scs_hz", "mu", "tail_eps", "s_min", "bits_per_symbol_cap"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
        if self.t_s != self.m * self.l_m:
            raise ConfigError(f"t_s={self.t_s} must equal m*l_m={self.m * self.l_m}")
        if not math.isclose(self.bandwidth_hz, self.n_s * self.n_ss * self.scs_hz, rel_tol=1e-9):
            raise ConfigError(
                f"bandwidth_hz={self.bandwidth_hz} must equal n_s*n_ss*scs_hz="
                f"{self.n_s * self.n_ss * self.scs_hz}"
            )
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ConfigError(f"lam must be finite and >= 0, got {self.lam!r}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not 0 < self.eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta!r}")
        if not 0 <= self.theta_max < 1:
            raise ConfigError(f"theta_max must lie in [0, 1), got {self.theta_max!r}")
        if self.tail_eps > 1e-6:
            raise ConfigError(f"tail_eps must be <= 1e-6, got {self.tail_eps!r}")
        if self.block_mode not in BLOCK_MODES:
            raise ConfigError(f"block_mode must be one of {BLOCK_MODES}, got {self.block_mode!r}")
        if self.mean_snr_db is not None:
            snr = tuple(float(x) for x in self.mean_snr_db)
            if len(snr) != self.n_e:
                raise ConfigError(f"mean_snr_db needs {self.n_e} entries, got {len(snr)}")
            object.__setattr__(self, "mean_snr_db", snr)
        elif self.snr_db_max < self.snr_db_min:
            raise ConfigError("snr_db_max must be >= snr_db_min")

    @property
    def slot_duration_s(self) -> float:
        # 14-symbol NR slot: 1 ms at 15 kHz, halved per numerology step
        return 1e-3 * 15e3 / self.scs_hz

    def user_mean_snr_db(self) -> np.ndarray:
        if self.mean_snr_db is not None:
            return np.asarray(self.mean_snr_db, dtype=float)
        return np.linspace(self.snr_db_min, self.snr_db_max, self.n_e)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}

# config-file spellings accepted in addition to the field names
_ALIASES = {"lambda": "lam", "W": "bandwidth_hz", "scs": "scs_hz", "slots": "n_slots"}


def _coerce(name: str, value: Any) -> Any:
    default = _FIELDS[name].default
    try:
        if name == "mean_snr_db":
            return None if value is None else tuple(float(v) for v in value)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValueError("expected true/false")
            return value
        if isinstance(default, int):
            as_float = float(value)
            if not as_float.is_integer():
                raise ValueError("expected an integer")
            return int(as_float)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}: {value!r} ({exc})") from exc
    return value


def config_from_mapping(data: dict[str, Any], base: Optional[SystemConfig] = None) -> SystemConfig:
    base = base or SystemConfig()
    changes = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        if name not in _FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
        if isinstance(value, (dict,)):
            raise ConfigError(f"configuration is flat; {key!r} holds a mapping")
        changes[name] = _coerce(name, value)
    try:
        return dataclasses.replace(base, **changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, base: Optional[SystemConfig] = None) -> SystemConfig:
    """Read a flat ``key: value`` YAML file into a :class:`SystemConfig`."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping of keys to values")
    return config_from_mapping(data, base)


def dump_config(cfg: SystemConfig) -> str:
    data = dataclasses.asdict(cfg)
    if data["mean_snr_db"] is not None:
        data["mean_snr_db"] = list(data["mean_snr_db"])
    return yaml.safe_dump(data, sort_keys=False)
