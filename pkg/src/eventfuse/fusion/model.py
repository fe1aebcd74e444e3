"""Illumination-indicator fusion network and its loss/gradient.

Forward pass for one sample::

    illu   = mlp_a(mean_pool(dino_tokens))      broadcast to all N tokens
    event  = mlp_b(event_tokens)
    fused  = mlp_fusion([extreme | illu | event])   per-token concat, that order

The loss is the element mean of squared error against the normal-light
features. Batches are stacked along the token axis; each output row depends
only on its own input row, so stacking does not change any value.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..encoders import FeatureMap, reconcile_tokens
from ..errors import ContractViolation
from ..numerics import Rng, mean_pool, seqsum
from .mlp import Layer, Mlp, init_mlp, mlp_backward, mlp_forward_cached

ILLU_MODES = ("global", "per_token")


@dataclass(frozen=True)
class FusionDims:
    d: int = 16
    d_illu: int = 4
    d_ev: int = 8
    d_dino: int = 16
    hidden_mult: int = 2

    def widths(self) -> dict[str, list[int]]:
        m = self.hidden_mult
        cat = self.d + self.d_illu + self.d_ev
        return {
            "a": [self.d_dino, m * self.d_illu, self.d_illu],
            "b": [self.d, m * self.d_ev, self.d_ev],
            "fusion": [cat, m * self.d, self.d],
        }


@dataclass(frozen=True)
class Triplet:
    """Frozen-encoder features for one (sample, ratio) training example."""

    f_extreme: np.ndarray
    f_dino: np.ndarray
    f_event: np.ndarray
    f_original: np.ndarray
    sample_id: str = ""
    ratio: float = 0.0


def _tokens(x) -> np.ndarray:
    return x.tokens if isinstance(x, FeatureMap) else np.asarray(x, dtype=np.float64)


def loss_ic(f_fusion, f_original) -> float:
    """Element-mean squared error between fused and normal-light features."""
    a, b = _tokens(f_fusion), _tokens(f_original)
    if a.shape != b.shape:
        raise ContractViolation(f"loss shapes differ: {a.shape} vs {b.shape}")
    diff = (a - b).ravel()
    return float(seqsum(diff * diff)) / diff.size


@dataclass(frozen=True)
class FusionModel:
    mlp_a: Mlp
    mlp_b: Mlp
    mlp_fusion: Mlp
    dims: FusionDims
    init_seed: int = 0
    illu_mode: str = "global"
    meta: dict = field(default_factory=dict, compare=False)

    def mlps(self) -> dict[str, Mlp]:
        return {"a": self.mlp_a, "b": self.mlp_b, "fusion": self.mlp_fusion}

    def params(self) -> dict[str, np.ndarray]:
        """Parameters in checkpoint order: a, b, fusion; per layer weight then bias."""
        out = {}
        for name, mlp in self.mlps().items():
            for i, layer in enumerate(mlp.layers):
                out[f"{name}.{i}.weight"] = layer.weight
                out[f"{name}.{i}.bias"] = layer.bias
        return out

    def with_params(self, params: dict[str, np.ndarray]) -> "FusionModel":
        new = {}
        for name, mlp in self.mlps().items():
            new[name] = Mlp(tuple(
                Layer(np.asarray(params[f"{name}.{i}.weight"], dtype=np.float64),
                      np.asarray(params[f"{name}.{i}.bias"], dtype=np.float64))
                for i in range(len(mlp.layers))))
        return replace(self, mlp_a=new["a"], mlp_b=new["b"], mlp_fusion=new["fusion"])

    def forward_batch(self, batch: Sequence[Triplet]):
        return _forward(self, batch)

    def losses(self, batch: Sequence[Triplet]) -> np.ndarray:
        out, (n, *_) = _forward(self, batch)
        return _item_losses(out, _targets(batch, out.shape), len(batch))

    def loss_and_grads(self, batch: Sequence[Triplet]):
        """Per-item losses and gradients of their mean, keyed like ``params()``."""
        return _loss_and_grads(self, batch)


def init_fusion_model(dims: FusionDims, init_seed: int, illu_mode: str = "global") -> FusionModel:
    if illu_mode not in ILLU_MODES:
        raise ContractViolation(f"illu_mode must be one of {ILLU_MODES}, got {illu_mode!r}")
    rng = Rng(init_seed)
    w = dims.widths()
    return FusionModel(init_mlp(w["a"], rng), init_mlp(w["b"], rng), init_mlp(w["fusion"], rng),
                       dims, init_seed, illu_mode)


def _stack_inputs(model: FusionModel, batch: Sequence[Triplet]):
    if not batch:
        raise ContractViolation("empty batch")
    d = model.dims
    n = np.asarray(batch[0].f_extreme).shape[0]
    for item in batch:
        ext, ev = np.asarray(item.f_extreme), np.asarray(item.f_event)
        if ext.shape != (n, d.d) or ev.shape != (n, d.d):
            raise ContractViolation(
                f"extreme/event features must both be {n} x {d.d}, got {ext.shape} and {ev.shape}")
        dino = np.asarray(item.f_dino)
        if dino.ndim != 2 or dino.shape[1] != d.d_dino:
            raise ContractViolation(f"dino features must be N' x {d.d_dino}, got {dino.shape}")
    ext = np.concatenate([np.asarray(t.f_extreme, dtype=np.float64) for t in batch])
    ev = np.concatenate([np.asarray(t.f_event, dtype=np.float64) for t in batch])
    if model.illu_mode == "global":
        dino_in = np.stack([mean_pool(t.f_dino) for t in batch])
    else:
        dino_in = np.concatenate([
            reconcile_tokens(FeatureMap(t.f_dino, "dino"), n).tokens for t in batch])
    return n, ext, ev, dino_in


def _forward(model: FusionModel, batch):
    n, ext, ev, dino_in = _stack_inputs(model, batch)
    illu, cache_a = mlp_forward_cached(model.mlp_a, dino_in)
    illu_rows = np.repeat(illu, n, axis=0) if model.illu_mode == "global" else illu
    fev, cache_b = mlp_forward_cached(model.mlp_b, ev)
    cat = np.concatenate([ext, illu_rows, fev], axis=1)
    out, cache_f = mlp_forward_cached(model.mlp_fusion, cat)
    return out, (n, cache_a, cache_b, cache_f)


def fusion_forward(model: FusionModel, f_extreme, f_dino_raw, f_event_raw) -> FeatureMap:
    ext, ev = _tokens(f_extreme), _tokens(f_event_raw)
    if ext.ndim != 2 or ev.ndim != 2 or ext.shape[0] != ev.shape[0]:
        raise ContractViolation(
            f"extreme and event token counts differ: {ext.shape} vs {ev.shape}")
    item = Triplet(ext, _tokens(f_dino_raw), ev, ext)
    out, _ = _forward(model, [item])
    return FeatureMap(out, "vision")


def _targets(batch, shape) -> np.ndarray:
    targets = np.concatenate([np.asarray(t.f_original, dtype=np.float64) for t in batch])
    if targets.shape != shape:
        raise ContractViolation(f"target shape {targets.shape} != output shape {shape}")
    return targets


def _item_losses(out: np.ndarray, targets: np.ndarray, b: int) -> np.ndarray:
    diff = (out - targets).reshape(b, -1)
    return np.array([float(seqsum(r * r)) / r.size for r in diff])


def _loss_and_grads(model: FusionModel, batch):
    out, (n, cache_a, cache_b, cache_f) = _forward(model, batch)
    targets = _targets(batch, out.shape)
    b, d = len(batch), model.dims
    losses = _item_losses(out, targets, b)

    dout = 2.0 * (out - targets) / (n * d.d * b)
    dcat, g_f = mlp_backward(model.mlp_fusion, cache_f, dout)
    d_illu_rows = dcat[:, d.d:d.d + d.d_illu]
    d_fev = dcat[:, d.d + d.d_illu:]
    _, g_b = mlp_backward(model.mlp_b, cache_b, d_fev, need_dx=False)
    if model.illu_mode == "global":
        d_illu = seqsum(d_illu_rows.reshape(b, n, d.d_illu), axis=1)
    else:
        d_illu = d_illu_rows
    _, g_a = mlp_backward(model.mlp_a, cache_a, d_illu, need_dx=False)

    grads = {}
    for name, g in (("a", g_a), ("b", g_b), ("fusion", g_f)):
        for i, (dw, db) in enumerate(g):
            grads[f"{name}.{i}.weight"] = dw
            grads[f"{name}.{i}.bias"] = db
    return losses, grads


def batch_loss(model, batch) -> float:
    """Mean of per-item losses, summed in item order."""
    losses = model.losses(batch)
    return float(seqsum(losses)) / len(losses)
