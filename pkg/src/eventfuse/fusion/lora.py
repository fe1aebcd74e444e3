"""Low-rank adapters over every linear layer of a fusion model.

Each adapted layer computes with ``W + (alpha / rank) * B @ A``; ``B``
starts at zero so a fresh adapter leaves the model unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ContractViolation
from ..numerics import Rng, matmul
from .model import FusionModel


@dataclass(frozen=True)
class LoraAdapter:
    a: np.ndarray  # rank x in
    b: np.ndarray  # out x rank
    alpha: float

    @property
    def rank(self) -> int:
        return self.a.shape[0]

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    def delta(self) -> np.ndarray:
        return self.scale * matmul(self.b, self.a)


def _weight_names(model: FusionModel) -> list[str]:
    return [k[: -len(".weight")] for k in model.params() if k.endswith(".weight")]


@dataclass(frozen=True)
class AdaptedModel:
    """A frozen base model plus trainable adapters keyed by layer name (``a.0``...)."""

    base: FusionModel
    adapters: dict

    def merged(self) -> FusionModel:
        params = dict(self.base.params())
        for name, ad in self.adapters.items():
            params[f"{name}.weight"] = params[f"{name}.weight"] + ad.delta()
        return self.base.with_params(params)

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for name, ad in self.adapters.items():
            out[f"{name}.lora_a"] = ad.a
            out[f"{name}.lora_b"] = ad.b
        return out

    def with_params(self, params: dict) -> "AdaptedModel":
        new = {name: replace(ad, a=np.asarray(params[f"{name}.lora_a"], dtype=np.float64),
                             b=np.asarray(params[f"{name}.lora_b"], dtype=np.float64))
               for name, ad in self.adapters.items()}
        return replace(self, adapters=new)

    def forward_batch(self, batch):
        return self.merged().forward_batch(batch)

    def losses(self, batch) -> np.ndarray:
        return self.merged().losses(batch)

    def loss_and_grads(self, batch):
        losses, g = self.merged().loss_and_grads(batch)
        grads = {}
        for name, ad in self.adapters.items():
            gw = g[f"{name}.weight"]
            grads[f"{name}.lora_a"] = ad.scale * matmul(ad.b.T, gw)
            grads[f"{name}.lora_b"] = ad.scale * matmul(gw, ad.a.T)
        return losses, grads


def lora_attach(model: FusionModel, rank: int = 2, alpha: float = 4.0, seed: int = 0) -> AdaptedModel:
    """Adapters on every layer: A ~ N(0, 1/in) from ``seed``, B = 0."""
    if rank < 1:
        raise ContractViolation(f"LoRA rank must be >= 1, got {rank}")
    params = model.params()
    rng = Rng(seed)
    adapters = {}
    for name in _weight_names(model):
        out_dim, in_dim = params[f"{name}.weight"].shape
        if rank > min(out_dim, in_dim):
            raise ContractViolation(
                f"LoRA rank {rank} exceeds min(out, in) = {min(out_dim, in_dim)} for layer {name}")
        a = rng.gaussian((rank, in_dim), 1.0 / math.sqrt(in_dim))
        adapters[name] = LoraAdapter(a, np.zeros((out_dim, rank)), float(alpha))
    return AdaptedModel(model, adapters)


def lora_merge(adapted: AdaptedModel) -> FusionModel:
    return adapted.merged()
