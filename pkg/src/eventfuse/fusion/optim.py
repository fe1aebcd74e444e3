"""Adam with bias correction over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ContractViolation


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    epochs: int = 30
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ContractViolation(
                f"need lr >= 0, epochs >= 0, batch_size >= 1; got {self.lr}, {self.epochs}, {self.batch_size}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ContractViolation("Adam needs 0 <= beta < 1 and eps > 0")


@dataclass(frozen=True)
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def fresh(cls, params: dict, cfg: TrainConfig | None = None) -> "AdamState":
        cfg = cfg or TrainConfig()
        zeros = {k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()}
        return cls(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, 0,
                   zeros, {k: z.copy() for k, z in zeros.items()})


def adam_step(state: AdamState, params: dict, grads: dict):
    """One bias-corrected update. Returns ``(new_params, new_state)``."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1**t, 1.0 - b2**t
    new_params, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != np.shape(p):
            raise ContractViolation(f"gradient for {k} has shape {g.shape}, param {np.shape(p)}")
        m = b1 * state.m[k] + (1.0 - b1) * g
        v = b2 * state.v[k] + (1.0 - b2) * g * g
        new_params[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[k], new_v[k] = m, v
    return new_params, replace(state, t=t, m=new_m, v=new_v)
