"""Checkpoint files: one JSON header line, then one EVMF blob per parameter.

The header lists ``params`` as ``[name, shape]`` pairs in blob order: the
base model's ``a``, ``b``, ``fusion`` layers (weight then bias per layer),
followed by ``<layer>.lora_a`` / ``<layer>.lora_b`` pairs when adapters are
stored.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..numerics import dump_evmf, read_evmf_stream
from .lora import AdaptedModel, LoraAdapter
from .model import FusionDims, FusionModel, init_fusion_model

CHECKPOINT_FORMAT = "eventfuse-checkpoint"


def save_checkpoint(path, model, seeds: dict | None = None, stage: int | None = None) -> None:
    adapted = model if isinstance(model, AdaptedModel) else None
    base = adapted.base if adapted else model
    params = dict(base.params())
    lora = None
    if adapted:
        params.update(adapted.params())
        any_ad = next(iter(adapted.adapters.values()))
        lora = {"rank": any_ad.rank, "alpha": any_ad.alpha, "layers": list(adapted.adapters)}
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "stage": stage if stage is not None else (2 if adapted else base.meta.get("stage", 1)),
        "dims": asdict(base.dims),
        "layer_widths": {k: m.widths for k, m in base.mlps().items()},
        "illu_mode": base.illu_mode,
        "seeds": {"init": base.init_seed, **(seeds or {})},
        "lora": lora,
        "params": [[k, list(np.shape(v))] for k, v in params.items()],
    }
    blob = io.BytesIO()
    blob.write(json.dumps(header, sort_keys=True).encode() + b"\n")
    for v in params.values():
        blob.write(dump_evmf(v))
    Path(path).write_bytes(blob.getvalue())


def load_checkpoint(path):
    """Return a FusionModel, or an AdaptedModel when adapters are stored."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing checkpoint header")
    try:
        header = json.loads(data[:nl])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: bad checkpoint header ({exc})") from None
    if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != 1:
        raise FormatError(f"{path}: not a version-1 {CHECKPOINT_FORMAT} file")
    fh = io.BytesIO(data[nl + 1:])
    params = {}
    for name, shape in header["params"]:
        arr = read_evmf_stream(fh)
        if list(arr.shape) != shape:
            raise FormatError(f"{path}: parameter {name} has shape {arr.shape}, header says {shape}")
        params[name] = arr
    dims = FusionDims(**header["dims"])
    skeleton = init_fusion_model(dims, header["seeds"]["init"], header["illu_mode"])
    base = skeleton.with_params(params)
    base = replace(base, meta={"stage": header["stage"], "seeds": header["seeds"]})
    if not header.get("lora"):
        return base
    alpha = float(header["lora"]["alpha"])
    adapters = {name: LoraAdapter(params[f"{name}.lora_a"], params[f"{name}.lora_b"], alpha)
                for name in header["lora"]["layers"]}
    return AdaptedModel(base, adapters)


def write_loss_history(path, history) -> None:
    lines = ["epoch,mean_loss"] + [f"{i},{v:.17g}" for i, v in enumerate(history, start=1)]
    Path(path).write_text("\n".join(lines) + "\n")
