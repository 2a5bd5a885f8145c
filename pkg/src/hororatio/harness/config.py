"""Experiment configuration read from flat ``key = value`` files."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..kvfile import parse_kv
from .functions import FunctionSpec, parse_function

__all__ = ["ConfigError", "ExperimentConfig", "load_config"]

MODES = ("ball", "exploratory-sphere")
FIXED_RANK = {"so3_sphere": 2, "sanov_plane": 2}


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    rank: int = 2
    n_max: int = 8
    samples: int = 100
    seed: int = 0
    action: str = "none"
    u: str = "ind:a1"
    v: str = "1"
    out: Optional[str] = None
    mode: str = "ball"
    # audit suite
    models: int = 1000
    max_points: int = 64
    eps_points: int = 20
    p_values: tuple[float, ...] = (1.5, 2.0, 4.0)
    property_points: int = 10
    besicovich_pairs: int = 1000
    property_n_max: int = 8
    skew_n_max: int = 6
    # counterexample
    pairs: int = 100
    moves: int = 20
    window: int = 6
    move_bound: int = 12
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ConfigError("rank must be at least 1")
        if self.n_max < 0:
            raise ConfigError("n_max must be non-negative")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        name = self.action_name
        if name in FIXED_RANK and self.rank != FIXED_RANK[name]:
            raise ConfigError(f"{name} acts through rank {FIXED_RANK[name]} only")
        if self.window < 0 or self.move_bound < 0:
            raise ConfigError("window and move_bound must be non-negative")
        try:
            v = self.v_spec
            self.u_spec
        except ValueError as exc:
            raise ConfigError(f"bad function spec: {exc}") from exc
        if not v.positive():
            raise ConfigError("v must be strictly positive")

    @property
    def action_name(self) -> str:
        return self.action.split(":", 1)[0]

    @property
    def action_arg(self) -> Optional[str]:
        _, _, arg = self.action.partition(":")
        return arg or None

    @property
    def u_spec(self) -> FunctionSpec:
        return parse_function(self.u, self.rank)

    @property
    def v_spec(self) -> FunctionSpec:
        return parse_function(self.v, self.rank)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def with_overrides(self, **kw) -> ExperimentConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def describe(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            if f.name in ("base_dir", "out"):
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = " ".join(format(x, "g") for x in val)
            out.append((f.name, str(val)))
        return out

    @classmethod
    def from_text(cls, text: str, base_dir: Path = Path(".")) -> ExperimentConfig:
        raw = parse_kv(text)
        known = {f.name: f for f in fields(cls) if f.name != "base_dir"}
        kw: dict = {}
        for key, val in raw.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            default = known[key].default
            if isinstance(default, bool):
                kw[key] = val.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kw[key] = int(val, 0)
            elif isinstance(default, tuple):
                kw[key] = _floats(val)
            else:
                kw[key] = val
        return cls(base_dir=base_dir, **kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return ExperimentConfig.from_text(text, base_dir=path.parent)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
