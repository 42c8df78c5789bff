"""Flat ``key = value`` trial configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Union

from .source_io import PATTERNS

CHAINS = ("digital", "analog", "baseline")
IMPORTANCE_MODES = ("htc", "mtc")
FADING = ("awgn", "rayleigh-block")
CODES = ("conv_k7",)

MAX_PAYLOAD_BITS = 4096


class ConfigError(ValueError):
    pass


@dataclass
class TrialConfig:
    source_path: Optional[str] = None
    source_pattern: str = "two-region"
    source_size: int = 64
    source_seed: int = 0
    labels_path: Optional[str] = None
    activation_path: Optional[str] = None
    importance_mode: str = "htc"
    importance_w: float = 0.5
    rate_r: float = 0.125
    snr_db: float = 1.0
    fading: str = "awgn"
    n_rb: int = 0
    n_re: int = 12
    chain: str = "digital"
    correction_enabled: bool = True
    alloc_tau: float = 0.5
    alloc_drop_quantile: float = 0.25
    alloc_n_min: int = 16
    side_info_max_frac: float = 0.25
    capacity_aligned: bool = False
    payload_bits: int = 256
    code: str = "conv_k7"
    flag_threshold: float = 0.1
    fallback_scale: float = 32.0
    seed: int = 0

    def validate(self) -> None:
        if self.source_path is None and self.source_pattern not in PATTERNS:
            raise ConfigError(f"unknown source.pattern {self.source_pattern!r};"
                              f" expected one of {PATTERNS}")
        if self.source_size < 8:
            raise ConfigError("source.size must be at least 8")
        if self.importance_mode not in IMPORTANCE_MODES:
            raise ConfigError(f"importance.mode must be one of"
                              f" {IMPORTANCE_MODES}")
        if self.importance_mode == "mtc" and self.activation_path is None:
            raise ConfigError("importance.mode mtc requires activation.path")
        if not 0.0 <= self.importance_w <= 1.0:
            raise ConfigError("importance.w must lie in [0, 1]")
        if self.rate_r <= 0.0:
            raise ConfigError("rate.R must be positive")
        if self.fading not in FADING:
            raise ConfigError(f"channel.fading must be one of {FADING}")
        if self.n_rb < 0:
            raise ConfigError("channel.n_rb must be >= 0 (0 = automatic)")
        if self.n_re < 1:
            raise ConfigError("channel.n_re must be >= 1")
        if self.chain not in CHAINS:
            raise ConfigError(f"chain must be one of {CHAINS}")
        if not 0.0 <= self.alloc_drop_quantile < 1.0:
            raise ConfigError("alloc.drop_quantile must lie in [0, 1)")
        if self.alloc_n_min < 1:
            raise ConfigError("alloc.n_min must be >= 1")
        if not 0.0 <= self.side_info_max_frac <= 1.0:
            raise ConfigError("alloc.side_info_max_frac must lie in [0, 1]")
        if not 1 <= self.payload_bits <= MAX_PAYLOAD_BITS:
            raise ConfigError(f"digital.payload_bits must lie in"
                              f" [1, {MAX_PAYLOAD_BITS}]")
        if self.code not in CODES:
            raise ConfigError(f"digital.code must be one of {CODES}")
        if self.flag_threshold < 0.0:
            raise ConfigError("analog.flag_threshold must be >= 0")
        if self.fallback_scale <= 0.0:
            raise ConfigError("analog.fallback_scale must be positive")


# key in the file -> (attribute, type)
_KEYS = {
    "source.path": ("source_path", str),
    "source.pattern": ("source_pattern", str),
    "source.size": ("source_size", int),
    "source.seed": ("source_seed", int),
    "labels.path": ("labels_path", str),
    "activation.path": ("activation_path", str),
    "importance.mode": ("importance_mode", str),
    "importance.w": ("importance_w", float),
    "rate.R": ("rate_r", float),
    "channel.snr_db": ("snr_db", float),
    "channel.fading": ("fading", str),
    "channel.n_rb": ("n_rb", int),
    "channel.n_re": ("n_re", int),
    "chain": ("chain", str),
    "correction.enabled": ("correction_enabled", bool),
    "alloc.tau": ("alloc_tau", float),
    "alloc.drop_quantile": ("alloc_drop_quantile", float),
    "alloc.n_min": ("alloc_n_min", int),
    "alloc.side_info_max_frac": ("side_info_max_frac", float),
    "assign.capacity_aligned": ("capacity_aligned", bool),
    "digital.payload_bits": ("payload_bits", int),
    "digital.code": ("code", str),
    "analog.flag_threshold": ("flag_threshold", float),
    "analog.fallback_scale": ("fallback_scale", float),
    "trial.seed": ("seed", int),
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(key: str, raw: str, typ: type) -> Union[str, int, float, bool]:
    if typ is bool:
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {typ.__name__}, got {raw!r}") \
            from None
    return raw


def parse_config_text(text: str) -> TrialConfig:
    cfg = TrialConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        attr, typ = _KEYS[key]
        setattr(cfg, attr, _convert(key, raw, typ))
    cfg.validate()
    return cfg


def load_config(path: Union[str, Path]) -> TrialConfig:
    return parse_config_text(Path(path).read_text())


def config_to_text(cfg: TrialConfig) -> str:
    by_attr = {attr: key for key, (attr, _) in _KEYS.items()}
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{by_attr[f.name]} = {value}")
    return "\n".join(lines) + "\n"
