"""Fusion-strategy ablation: pixel-level sum, feature-level sum, and the full model.

Both baselines get a per-token MLP head trained with the same optimizer
settings, shuffle seed and epoch budget as the full model, so the comparison
is about where the event signal enters rather than about capacity to train.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from ..fusion.baselines import HeadModel, HeadSample, baseline_postfusion, baseline_prefusion
from ..fusion.optim import TrainConfig
from ..fusion.train import fit, train_stage1
from ..illumination import RATIO_LADDER, degrade
from ..numerics import seqsum
from .features import build_triplets, fused_features, pooled_cosine

STRATEGIES = ("pre_fusion", "post_fusion", "ours")
EXTREME_RATIOS = (0.05, 0.1, 10.0, 20.0)


def prefused_features(source, sample, ratio: float) -> np.ndarray:
    if hasattr(source, "prefused"):
        return source.prefused(sample, ratio).tokens
    img = baseline_prefusion(degrade(sample.original, ratio), sample.event_image)
    return source.encode_vision(img).tokens


def _mean_alignment(pred_fn, source, samples, ratios) -> float:
    per_ratio = []
    for r in ratios:
        vals = [pooled_cosine(pred_fn(s, r), source.original(s).tokens) for s in samples]
        per_ratio.append(float(seqsum(vals)) / len(vals))
    return float(seqsum(per_ratio)) / len(per_ratio)


def run_ablation(samples, source, cfg: TrainConfig = TrainConfig(), init_seed: int = 0,
                 train_ratios: Sequence[float] = RATIO_LADDER,
                 eval_ratios: Sequence[float] = EXTREME_RATIOS) -> list[tuple[str, float]]:
    """Rows ``(strategy, alignment)`` in the fixed order of ``STRATEGIES``."""
    samples = sorted(samples, key=lambda s: s.id)
    if not samples:
        raise ContractViolation("ablation needs at least one sample")
    d = source.original(samples[0]).shape[1]

    def head_corpus(feat_fn):
        return [HeadSample(feat_fn(s, r), source.original(s).tokens)
                for s in samples for r in train_ratios]

    def pre(s, r):
        return prefused_features(source, s, r)

    def post(s, r):
        return baseline_postfusion(source.extreme(s, r), source.event(s)).tokens

    scores = {}
    for name, feat_fn in (("pre_fusion", pre), ("post_fusion", post)):
        head, _ = fit(HeadModel.init(d, init_seed), head_corpus(feat_fn), cfg)
        scores[name] = _mean_alignment(lambda s, r: head.apply(feat_fn(s, r)),
                                       source, samples, eval_ratios)

    model, _ = train_stage1(build_triplets(samples, source, train_ratios), cfg, init_seed)
    scores["ours"] = _mean_alignment(lambda s, r: fused_features(model, source, s, r),
                                     source, samples, eval_ratios)
    return [(name, scores[name]) for name in STRATEGIES]
