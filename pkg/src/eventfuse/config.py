"""Run configuration: one JSON file, overridable from the command line.

Every seed has an explicit default; nothing is drawn from the clock.
Unknown keys at any level are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .errors import ContractViolation, FormatError
from .fusion.model import FusionDims
from .fusion.optim import TrainConfig


@dataclass(frozen=True)
class Seeds:
    init: int = 0
    shuffle: int = 0
    data: int = 7
    lora: int = 0
    vision: int = 0
    dino: int = 1


@dataclass(frozen=True)
class DimsConfig:
    d_illu: int = 4
    d_ev: int = 8
    hidden_mult: int = 2


@dataclass(frozen=True)
class TrainSection:
    lr: float = 0.001
    epochs: int = 30
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "stub"
    patch: int = 8
    dim: int = 16
    dino_dim: int = 16
    feature_root: str | None = None

    def __post_init__(self):
        if self.kind not in ("stub", "file"):
            raise ContractViolation(f"encoder kind must be 'stub' or 'file', got {self.kind!r}")
        if self.kind == "file" and not self.feature_root:
            raise ContractViolation("encoder kind 'file' needs encoder.feature_root")


@dataclass(frozen=True)
class LoraConfig:
    rank: int = 2
    alpha: float = 4.0
    epochs: int = 1


@dataclass(frozen=True)
class Paths:
    manifest: str | None = None
    out: str | None = None


@dataclass(frozen=True)
class RunConfig:
    seeds: Seeds = field(default_factory=Seeds)
    dims: DimsConfig = field(default_factory=DimsConfig)
    train: TrainSection = field(default_factory=TrainSection)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lora: LoraConfig = field(default_factory=LoraConfig)
    paths: Paths = field(default_factory=Paths)
    illu_mode: str = "global"

    def train_config(self) -> TrainConfig:
        return TrainConfig(shuffle_seed=self.seeds.shuffle, **asdict(self.train))

    def fusion_dims(self, d: int, d_dino: int) -> FusionDims:
        return FusionDims(d=d, d_dino=d_dino, **asdict(self.dims))

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ContractViolation(f"config section {where or 'root'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ContractViolation(f"unknown config key(s) in {where or 'root'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ContractViolation(f"bad config section {where or 'root'}: {exc}") from None


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from None
    return config_from_dict(data)


def override(cfg: RunConfig, dotted: dict) -> RunConfig:
    """Apply ``{"section.key": value}`` overrides; ``None`` values are skipped."""
    for key, value in dotted.items():
        if value is None:
            continue
        section, _, name = key.rpartition(".")
        if section:
            sub = getattr(cfg, section)
            cfg = replace(cfg, **{section: replace(sub, **{name: value})})
        else:
            cfg = replace(cfg, **{name: value})
    return cfg
