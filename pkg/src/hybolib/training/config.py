"""Training and run configuration.

Defaults follow the usual knowledge-graph settings (batch 1000, 4 negatives,
margin 8, max-norm 1.5, scale 2.5, lr 5e-3, gradient-norm 0.5) shrunk where a
toy dataset needs it. Entities start close to the origin (std 0.01). Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields

MODEL_KINDS = ("kg", "gcn", "toy-transformer")
PRECISIONS = ("f32", "f64")
SEED_ENV = "HYBOLIB_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 1000
    negatives: int = 4
    lr: float = 5e-3
    seed: int = 0
    margin: float = 8.0
    scale: float = 2.5
    max_norm: float | None = 1.5
    eval_every: int = 10
    patience: int | None = None
    grad_clip: float | None = 0.5
    dim: int = 16
    K: float = -1.0
    optimizer: str = "adam"
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.0
    init_std: float = 0.01
    learn_scale: bool = True
    relation_form: str = "general"
    dropout: float = 0.0
    # gcn
    task: str = "lp"
    layers: int = 2
    fd_r: float = 2.0
    fd_t: float = 1.0
    self_loops: bool = True
    # toy transformer
    heads: int = 2
    warmup: int = 0
    seq_len: int = 16
    vocab: int = 8
    n_sequences: int = 256
    mask_rate: float = 0.25

    _positive = ("epochs", "batch_size", "negatives", "lr", "eval_every", "dim", "heads",
                 "layers", "seq_len", "vocab", "n_sequences", "fd_t", "scale")

    def __post_init__(self):
        for name in self._positive:
            val = getattr(self, name)
            if name == "epochs":
                if val < 0:
                    raise ConfigError("epochs must be >= 0")
            elif val <= 0:
                raise ConfigError(f"{name} must be positive, got {val}")
        for name in ("max_norm", "grad_clip", "patience"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ConfigError(f"{name} must be positive or null, got {val}")
        if self.K >= 0:
            raise ConfigError("curvature K must be negative")
        if self.optimizer not in ("adam", "rsgd"):
            raise ConfigError(f"optimizer must be adam or rsgd, got {self.optimizer!r}")
        if self.task not in ("lp", "nc"):
            raise ConfigError(f"task must be lp or nc, got {self.task!r}")
        if self.relation_form not in ("general", "fx"):
            raise ConfigError(f"relation_form must be general or fx, got {self.relation_form!r}")
        if not 0.0 <= self.dropout < 1.0 or not 0.0 < self.mask_rate < 1.0:
            raise ConfigError("dropout must be in [0, 1) and mask_rate in (0, 1)")
        if self.warmup < 0:
            raise ConfigError("warmup must be >= 0")
        self.betas = tuple(self.betas)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["betas"] = list(self.betas)
        return out

    def replace(self, **changes):
        return self.from_dict({**self.to_dict(), **changes})


@dataclass
class RunConfig(TrainConfig):
    model: str = "kg"
    data: str | None = None
    out: str | None = None
    precision: str = "f64"

    def __post_init__(self):
        super().__post_init__()
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.precision not in PRECISIONS:
            raise ConfigError(f"precision must be f32 or f64, got {self.precision!r}")

    def train_config(self):
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in self.to_dict().items() if k in names})


# Per-model defaults layered under user settings.
MODEL_DEFAULTS = {
    "kg": {},
    "gcn": {"lr": 1e-2, "epochs": 300, "grad_clip": None, "max_norm": None, "eval_every": 10,
            "layers": 1},
    "toy-transformer": {"lr": 1e-2, "epochs": 60, "batch_size": 32, "grad_clip": 1.0,
                        "max_norm": None, "warmup": 5, "eval_every": 5, "init_std": 0.1},
}

# applied on top of MODEL_DEFAULTS for one task of a model
TASK_DEFAULTS = {
    ("gcn", "nc"): {"dropout": 0.5},
}


def default_seed(fallback=0):
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def load_run_config(path=None, model=None, overrides=None):
    """Merge model defaults, an optional JSON file and ``overrides`` into a RunConfig."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
    data = {**data, **(overrides or {})}
    kind = model or data.get("model", "kg")
    base = MODEL_DEFAULTS.get(kind, {})
    task = data.get("task", base.get("task", TrainConfig.task))
    merged = {**base, **TASK_DEFAULTS.get((kind, task), {}), **data, "model": kind}
    merged.setdefault("seed", default_seed())
    try:
        return RunConfig.from_dict(merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_override(text):
    """``key=value`` with the value parsed as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip(), val


def field_help():
    """One line per RunConfig field with its default, for --help."""
    lines = []
    for f in fields(RunConfig):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        lines.append(f"  {f.name} = {json.dumps(default if not isinstance(default, tuple) else list(default))}")
    return "\n".join(lines)


__all__ = ["TrainConfig", "RunConfig", "ConfigError", "MODEL_DEFAULTS", "load_run_config",
           "parse_override", "default_seed", "field_help", "SEED_ENV"]
