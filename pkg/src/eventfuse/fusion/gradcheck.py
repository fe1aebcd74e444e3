"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..errors import ContractViolation
from ..numerics import seqsum


def gradcheck(loss_fn: Callable[[dict], float], params: dict, grads: dict, h: float = 1e-6,
              detail: bool = False):
    """Max over all scalar parameters of |g - fd| / max(1, |g|).

    ``loss_fn`` maps a full parameter dict to a scalar; ``grads`` holds the
    analytic gradient at ``params``.
    """
    if not h > 0:
        raise ContractViolation(f"step h must be > 0, got {h}")
    worst, where = 0.0, None
    work = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    for name, arr in work.items():
        flat = arr.reshape(-1)
        g = np.asarray(grads[name], dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(work)
            flat[i] = orig - h
            down = loss_fn(work)
            flat[i] = orig
            fd = (up - down) / (2.0 * h)
            err = abs(g[i] - fd) / max(1.0, abs(g[i]))
            if err > worst:
                worst, where = err, (name, i, float(g[i]), fd)
    return (worst, where) if detail else worst


def fd_gradcheck(model, batch, h: float = 1e-6, detail: bool = False):
    """Check ``model.loss_and_grads`` on ``batch`` against finite differences."""
    _, grads = model.loss_and_grads(batch)

    def loss_fn(p):
        losses = model.with_params(p).losses(batch)
        return float(seqsum(losses)) / len(losses)

    return gradcheck(loss_fn, model.params(), grads, h, detail)
