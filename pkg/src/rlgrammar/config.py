"""Run configuration and the flat ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class RunConfig:
    n_emb: int = 64
    context_atoms: int = 0
    alpha_anchor: float = 0.4
    alpha_subgrammar: float = 0.5
    lam: float = 0.8
    epsilon: float = 0.1
    beta: float = 0.5
    t_freq: float = 10000.0
    n_freq: float = 20.0
    theta_emb: float = 1.0
    lr_critic: float = 5e-4
    lr_actor: float = 5e-5
    epochs: int = 200
    round_size: int = 32
    buffer_capacity: int = 10000
    batch_size: int = 64
    n_blocks: int = 3
    seed: int = 0
    embedding_seed: int = 0

    @property
    def hidden_width(self) -> int:
        return 2 * self.n_emb

    @property
    def input_width(self) -> int:
        return (2 + 2 * self.context_atoms) * self.n_emb

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)


# Dataset-specific settings; everything else uses the RunConfig defaults.
PRESETS = {
    "simple-json": dict(round_size=32, t_freq=10000.0, alpha_anchor=0.4, alpha_subgrammar=0.5),
    "simple-json-stream": dict(round_size=16, t_freq=10000.0, alpha_anchor=0.4,
                               alpha_subgrammar=0.5),
    "pdf": dict(round_size=4, t_freq=50000.0, alpha_anchor=0.008, alpha_subgrammar=0.01,
                context_atoms=2),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown dataset preset {name!r}")
    return RunConfig(**{**PRESETS[name], **overrides})


def _coerce(field_type, text: str):
    t = field_type if isinstance(field_type, type) else {"int": int, "float": float}[field_type]
    if t is int:
        return int(text)
    return float(text)


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, unknown keys raise."""
    types = {f.name: f.type for f in fields(RunConfig)}
    values = (base or RunConfig()).to_dict()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = _coerce(types[key], value)
        except ValueError:
            raise ValueError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return RunConfig(**values)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_config_text(Path(path).read_text(), base)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())
