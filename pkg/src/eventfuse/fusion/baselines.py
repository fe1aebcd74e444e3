"""Pixel-level and feature-level fusion baselines, plus a trainable head."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..encoders import FeatureMap
from ..errors import ContractViolation
from ..illumination import validate_image
from ..numerics import Rng, seqsum
from .mlp import Layer, Mlp, init_mlp, mlp_backward, mlp_forward_cached


def baseline_prefusion(x_extreme, event_vis) -> np.ndarray:
    """clamp(x + (event_vis - 0.5)); a gray event view leaves the image unchanged."""
    a, e = validate_image(x_extreme), validate_image(event_vis)
    if a.shape != e.shape or a.shape[2] != 3:
        raise ContractViolation(f"pre-fusion needs equal HxWx3 inputs, got {a.shape} and {e.shape}")
    return np.clip(a + (e - 0.5), 0.0, 1.0)


def baseline_postfusion(f_extreme: FeatureMap, f_event: FeatureMap) -> FeatureMap:
    if f_extreme.shape != f_event.shape:
        raise ContractViolation(
            f"post-fusion needs equal feature shapes, got {f_extreme.shape} and {f_event.shape}")
    return FeatureMap(f_extreme.tokens + f_event.tokens, f_extreme.source_tag)


@dataclass(frozen=True)
class HeadSample:
    x: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class HeadModel:
    """One per-token MLP mapping a single fused feature map to the target space."""

    mlp: Mlp

    @classmethod
    def init(cls, d: int, seed: int, hidden_mult: int = 2) -> "HeadModel":
        return cls(init_mlp([d, hidden_mult * d, d], Rng(seed)))

    def params(self) -> dict:
        out = {}
        for i, layer in enumerate(self.mlp.layers):
            out[f"head.{i}.weight"] = layer.weight
            out[f"head.{i}.bias"] = layer.bias
        return out

    def with_params(self, params: dict) -> "HeadModel":
        return HeadModel(Mlp(tuple(
            Layer(np.asarray(params[f"head.{i}.weight"]), np.asarray(params[f"head.{i}.bias"]))
            for i in range(len(self.mlp.layers)))))

    def apply(self, x) -> np.ndarray:
        return mlp_forward_cached(self.mlp, x)[0]

    def _run(self, batch: Sequence[HeadSample]):
        if not batch:
            raise ContractViolation("empty batch")
        x = np.concatenate([np.asarray(s.x, dtype=np.float64) for s in batch])
        t = np.concatenate([np.asarray(s.target, dtype=np.float64) for s in batch])
        if x.shape != t.shape:
            raise ContractViolation(f"head input {x.shape} and target {t.shape} differ")
        out, cache = mlp_forward_cached(self.mlp, x)
        diff = out - t
        rows = diff.reshape(len(batch), -1)
        losses = np.array([float(seqsum(r * r)) / r.size for r in rows])
        return losses, diff, cache

    def losses(self, batch) -> np.ndarray:
        return self._run(batch)[0]

    def loss_and_grads(self, batch):
        losses, diff, cache = self._run(batch)
        n_el = diff.size // len(batch)
        _, g = mlp_backward(self.mlp, cache, 2.0 * diff / (n_el * len(batch)), need_dx=False)
        grads = {}
        for i, (dw, db) in enumerate(g):
            grads[f"head.{i}.weight"] = dw
            grads[f"head.{i}.bias"] = db
        return losses, grads


__all__ = ["baseline_prefusion", "baseline_postfusion", "HeadModel", "HeadSample"]
