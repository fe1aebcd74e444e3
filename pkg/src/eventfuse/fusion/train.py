"""Mini-batch Adam training loops for the fusion network and its adapters."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from ..numerics import Rng, seqsum
from .lora import AdaptedModel, lora_attach
from .model import FusionDims, FusionModel, Triplet, init_fusion_model
from .optim import AdamState, TrainConfig, adam_step

log = logging.getLogger(__name__)


def fit(model, corpus: Sequence, cfg: TrainConfig, epochs: int | None = None):
    """Train any model exposing params/with_params/loss_and_grads.

    Each epoch draws a fresh Fisher-Yates permutation from one
    ``Rng(cfg.shuffle_seed)`` stream; the last partial batch is kept.
    The recorded epoch loss is the mean of per-item losses (as seen at the
    item's own step) summed in corpus order.
    """
    if not corpus:
        raise ContractViolation("training corpus is empty")
    epochs = cfg.epochs if epochs is None else epochs
    n = len(corpus)
    rng = Rng(cfg.shuffle_seed)
    state = AdamState.fresh(model.params(), cfg)
    history: list[float] = []
    for epoch in range(epochs):
        perm = rng.permutation(n)
        seen = np.empty(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            losses, grads = model.loss_and_grads([corpus[i] for i in idx])
            seen[idx] = losses
            params, state = adam_step(state, model.params(), grads)
            model = model.with_params(params)
        history.append(float(seqsum(seen)) / n)
        log.debug("epoch %d mean loss %.6f", epoch + 1, history[-1])
    return model, history


def corpus_loss(model, corpus: Sequence, chunk: int = 64) -> float:
    """Mean per-item loss over the whole corpus, in corpus order."""
    parts = [model.losses(list(corpus[i:i + chunk])) for i in range(0, len(corpus), chunk)]
    losses = np.concatenate(parts)
    return float(seqsum(losses)) / len(losses)


def infer_dims(corpus: Sequence[Triplet], d_illu: int = 4, d_ev: int = 8,
               hidden_mult: int = 2) -> FusionDims:
    if not corpus:
        raise ContractViolation("training corpus is empty")
    first = corpus[0]
    return FusionDims(d=np.shape(first.f_extreme)[1], d_illu=d_illu, d_ev=d_ev,
                      d_dino=np.shape(first.f_dino)[1], hidden_mult=hidden_mult)


def train_stage1(corpus: Sequence[Triplet], cfg: TrainConfig = TrainConfig(), init_seed: int = 0,
                 dims: FusionDims | None = None, illu_mode: str = "global"):
    """Fit the three fusion MLPs on the correction loss. Returns (model, history)."""
    dims = dims or infer_dims(corpus)
    model = init_fusion_model(dims, init_seed, illu_mode)
    model, history = fit(model, corpus, cfg)
    return replace(model, meta={**model.meta, "stage": 1}), history


def train_stage2_lora(model: FusionModel, corpus: Sequence[Triplet], cfg: TrainConfig = TrainConfig(),
                      rank: int = 2, alpha: float = 4.0, seed: int = 0, epochs: int = 1):
    """Adapter-only tuning on a frozen stage-1 model.

    ``epochs`` (default one) overrides ``cfg.epochs``. Returns
    ``(adapted_model, history)``; ``adapted_model.adapters`` is the adapter set.
    """
    adapted = lora_attach(model, rank, alpha, seed)
    adapted, history = fit(adapted, corpus, cfg, epochs=epochs)
    assert adapted.base is model
    return adapted, history


__all__ = ["fit", "corpus_loss", "train_stage1", "train_stage2_lora", "AdaptedModel", "infer_dims"]
