"""Frozen encoder stand-ins: seeded patch encoders and replayed feature files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractViolation, FormatError
from .illumination import degrade, validate_image
from .numerics import Rng, matmul, mean_pool, read_evmf, write_evmf

SOURCE_TAGS = ("vision", "dino")


@dataclass(frozen=True)
class FeatureMap:
    tokens: np.ndarray
    source_tag: str = "vision"

    def __post_init__(self):
        t = np.asarray(self.tokens, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
            raise ContractViolation(f"feature map must be N x D with N, D >= 1, got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ContractViolation("feature map contains non-finite values")
        if self.source_tag not in SOURCE_TAGS:
            raise ContractViolation(f"unknown source tag {self.source_tag!r}")
        object.__setattr__(self, "tokens", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.tokens.shape


@dataclass(frozen=True)
class StubEncoderConfig:
    patch: int = 8
    dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.patch < 1 or self.dim < 1:
            raise ContractViolation(f"patch and dim must be >= 1, got {self.patch}, {self.dim}")


def patchify(img: np.ndarray, patch: int) -> np.ndarray:
    """Raster-ordered patches, each flattened in (row, col, channel) order."""
    h, w, c = img.shape
    if h % patch or w % patch:
        raise ContractViolation(
            f"image {h}x{w} is not divisible into {patch}x{patch} patches")
    gh, gw = h // patch, w // patch
    p = img.reshape(gh, patch, gw, patch, c).transpose(0, 2, 1, 3, 4)
    return p.reshape(gh * gw, patch * patch * c)


@dataclass
class StubEncoder:
    """tanh(W x + b) per patch with W, b ~ N(0, 1/fan_in) from ``cfg.seed``."""

    cfg: StubEncoderConfig
    source_tag: str = "vision"
    _weights: dict = field(default_factory=dict, repr=False)

    def weights(self, channels: int) -> tuple[np.ndarray, np.ndarray]:
        if channels not in self._weights:
            fan_in = self.cfg.patch * self.cfg.patch * channels
            std = 1.0 / math.sqrt(fan_in)
            rng = Rng(self.cfg.seed)
            w = rng.gaussian((self.cfg.dim, fan_in), std)
            b = rng.gaussian((self.cfg.dim,), std)
            self._weights[channels] = (w, b)
        return self._weights[channels]

    def encode(self, img) -> FeatureMap:
        a = validate_image(img)
        w, b = self.weights(a.shape[2])
        x = patchify(a, self.cfg.patch)
        return FeatureMap(np.tanh(matmul(x, w.T) + b[None, :]), self.source_tag)


def encode_stub(img, cfg: StubEncoderConfig, source_tag: str = "vision") -> FeatureMap:
    return StubEncoder(cfg, source_tag).encode(img)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_features(path, fm: FeatureMap, model_name: str = "stub") -> None:
    write_evmf(path, fm.tokens)
    n, d = fm.shape
    meta = {"model_name": model_name, "N": n, "D": d, "source_tag": fm.source_tag}
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def encode_from_file(path) -> FeatureMap:
    """Replay an EVMF rank-2 feature file (sidecar JSON, if any, sets the tag)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"feature file not found: {path}")
    tokens = read_evmf(path)
    if tokens.ndim != 2:
        raise FormatError(f"{path}: feature file must be rank 2, got rank {tokens.ndim}")
    tag = "vision"
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        tag = meta.get("source_tag", tag)
        if (meta.get("N"), meta.get("D")) not in ((None, None), tokens.shape):
            raise FormatError(f"{side}: N/D disagree with tensor shape {tokens.shape}")
    return FeatureMap(tokens, tag)


def pool_global(f: FeatureMap) -> np.ndarray:
    return mean_pool(f.tokens)


def reconcile_tokens(f: FeatureMap, n_target: int) -> FeatureMap:
    """Average-pool a square token grid onto a coarser square grid of ``n_target``."""
    n = f.shape[0]
    if n == n_target:
        return f
    g, gt = math.isqrt(n), math.isqrt(n_target)
    if g * g != n or gt * gt != n_target or g % gt:
        raise ContractViolation(
            f"cannot pool a {n}-token grid onto {n_target} tokens")
    k = g // gt
    grid = f.tokens.reshape(gt, k, gt, k, -1).transpose(0, 2, 1, 3, 4)
    blocks = grid.reshape(n_target, k * k, -1)
    pooled = np.stack([mean_pool(blk) for blk in blocks])
    return FeatureMap(pooled, f.source_tag)


# --- feature sources used by training and evaluation ---------------------------

class StubFeatureSource:
    """Computes every branch on the fly from a sample's images (memoized).

    A sample needs ``id``, ``original`` (HxWx3) and ``event_image`` (HxWx3).
    """

    def __init__(self, vision: StubEncoderConfig, dino: StubEncoderConfig):
        self.vision = StubEncoder(vision, "vision")
        self.dino_encoder = StubEncoder(dino, "dino")
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def original(self, sample) -> FeatureMap:
        return self._memo((sample.id, "original"), lambda: self.vision.encode(sample.original))

    def extreme(self, sample, ratio: float) -> FeatureMap:
        return self._memo((sample.id, "extreme", ratio),
                          lambda: self.vision.encode(degrade(sample.original, ratio)))

    def dino(self, sample, ratio: float) -> FeatureMap:
        return self._memo((sample.id, "dino", ratio),
                          lambda: self.dino_encoder.encode(degrade(sample.original, ratio)))

    def event(self, sample) -> FeatureMap:
        return self._memo((sample.id, "event"), lambda: self.vision.encode(sample.event_image))

    def encode_vision(self, img) -> FeatureMap:
        return self.vision.encode(img)


def feature_file_name(kind: str, ratio: float | None = None) -> str:
    return f"{kind}.evmf" if ratio is None else f"{kind}_{ratio:g}.evmf"


class FileFeatureSource:
    """Reads ``<root>/<sample_id>/<kind>[_<ratio>].evmf`` files.

    Kinds: ``original``, ``event``, ``extreme_<r>``, ``dino_<r>`` and, for
    the pixel-level baseline, ``prefused_<r>``.
    """

    def __init__(self, root):
        self.root = Path(root)

    def _load(self, sample, kind, ratio=None) -> FeatureMap:
        return encode_from_file(self.root / str(sample.id) / feature_file_name(kind, ratio))

    def original(self, sample) -> FeatureMap:
        return self._load(sample, "original")

    def extreme(self, sample, ratio: float) -> FeatureMap:
        return self._load(sample, "extreme", ratio)

    def dino(self, sample, ratio: float) -> FeatureMap:
        return FeatureMap(self._load(sample, "dino", ratio).tokens, "dino")

    def event(self, sample) -> FeatureMap:
        return self._load(sample, "event")

    def prefused(self, sample, ratio: float) -> FeatureMap:
        return self._load(sample, "prefused", ratio)
