"""Per-token MLPs with tanh between layers and a linear head."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..numerics import Rng, matmul, seqsum


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # out x in
    bias: np.ndarray    # out

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape


@dataclass(frozen=True)
class Mlp:
    layers: tuple[Layer, ...]

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].shape[1]] + [l.shape[0] for l in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].shape[0]


def init_mlp(widths: list[int], rng: Rng) -> Mlp:
    """Weights ~ N(0, 1/fan_in) drawn layer by layer; biases zero."""
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.gaussian((fan_out, fan_in), 1.0 / math.sqrt(fan_in))
        layers.append(Layer(w, np.zeros(fan_out)))
    return Mlp(tuple(layers))


def mlp_from_weights(weights, biases=None) -> Mlp:
    biases = biases or [np.zeros(np.asarray(w).shape[0]) for w in weights]
    layers = tuple(Layer(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
                   for w, b in zip(weights, biases))
    for prev, nxt in zip(layers[:-1], layers[1:]):
        if prev.shape[0] != nxt.shape[1]:
            raise ContractViolation(f"layer widths do not chain: {prev.shape} -> {nxt.shape}")
    return Mlp(layers)


def _check_input(mlp: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != mlp.in_dim:
        raise ContractViolation(
            f"MLP expects N x {mlp.in_dim} input, got shape {x.shape}")
    return x


def mlp_forward(mlp: Mlp, x) -> np.ndarray:
    return mlp_forward_cached(mlp, x)[0]


def mlp_forward_cached(mlp: Mlp, x):
    """Forward pass returning ``(y, inputs)`` where ``inputs[i]`` fed layer i."""
    h = _check_input(mlp, x)
    inputs = []
    last = len(mlp.layers) - 1
    for i, layer in enumerate(mlp.layers):
        inputs.append(h)
        z = matmul(h, layer.weight.T) + layer.bias[None, :]
        h = z if i == last else np.tanh(z)
    return h, inputs


def mlp_backward(mlp: Mlp, inputs, dy, need_dx: bool = True):
    """Chain rule through the cached pass.

    Returns ``(dx, grads)`` with ``grads[i] = (dW_i, db_i)``. Hidden inputs
    are tanh outputs, so tanh' is recovered as ``1 - h**2``.
    """
    grads = [None] * len(mlp.layers)
    delta = np.asarray(dy, dtype=np.float64)
    dx = None
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        h_in = inputs[i]
        grads[i] = (matmul(delta.T, h_in), seqsum(delta, axis=0))
        if i > 0 or need_dx:
            dh = matmul(delta, layer.weight)
            if i > 0:
                delta = dh * (1.0 - h_in * h_in)
            else:
                dx = dh
    return dx, grads
