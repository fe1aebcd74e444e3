"""Feature-space evaluation: triplet building, cosine tables, PCA export."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import ContractViolation
from ..fusion.model import Triplet, fusion_forward
from ..illumination import RATIO_LADDER
from ..numerics import cosine_similarity, mean_pool, pca_embed, seqsum
from .report import SimilarityTable, fmt


def _by_id(samples):
    return sorted(samples, key=lambda s: s.id)


def build_triplets(samples, source, ratios: Sequence[float] = RATIO_LADDER) -> list[Triplet]:
    """One training triplet per (sample, ratio), in sample-id then ratio order."""
    out = []
    for s in _by_id(samples):
        f_orig, f_ev = source.original(s).tokens, source.event(s).tokens
        for r in ratios:
            out.append(Triplet(source.extreme(s, r).tokens, source.dino(s, r).tokens,
                               f_ev, f_orig, s.id, float(r)))
    return out


def fused_features(model, source, sample, ratio: float) -> np.ndarray:
    fm = model if not hasattr(model, "merged") else model.merged()
    return fusion_forward(fm, source.extreme(sample, ratio), source.dino(sample, ratio),
                          source.event(sample)).tokens


def pooled_cosine(candidate: np.ndarray, reference: np.ndarray) -> float:
    return cosine_similarity(mean_pool(candidate), mean_pool(reference))


def cosine_table(source, model, samples, ladder: Sequence[float] = RATIO_LADDER,
                 metadata: dict | None = None) -> SimilarityTable:
    """Mean pooled cosine to the normal-light features for each ratio.

    Column ``no_fusion`` compares raw degraded-image features; column
    ``fusion`` (only when ``model`` is given) compares the fused output.
    """
    samples = _by_id(samples)
    if not samples:
        raise ContractViolation("cosine_table needs at least one sample")
    model = model.merged() if hasattr(model, "merged") else model
    cols = {"no_fusion": []}
    if model is not None:
        cols["fusion"] = []
    for r in ladder:
        raw, fused = [], []
        for s in samples:
            ref = source.original(s).tokens
            raw.append(pooled_cosine(source.extreme(s, r).tokens, ref))
            if model is not None:
                fused.append(pooled_cosine(fused_features(model, source, s, r), ref))
        cols["no_fusion"].append(float(seqsum(raw)) / len(samples))
        if model is not None:
            cols["fusion"].append(float(seqsum(fused)) / len(samples))
    return SimilarityTable(tuple(float(r) for r in ladder),
                           {k: tuple(v) for k, v in cols.items()}, metadata or {})


def collect_pca_inputs(source, model, samples, ratios: Sequence[float]) -> list[tuple]:
    """Labelled pooled vectors: each original, plus extreme/fused at every ratio."""
    model = model.merged() if hasattr(model, "merged") else model
    rows = []
    for s in _by_id(samples):
        rows.append(("original", 1.0, mean_pool(source.original(s).tokens)))
        for r in ratios:
            rows.append(("extreme", float(r), mean_pool(source.extreme(s, r).tokens)))
            if model is not None:
                rows.append(("fusion", float(r), mean_pool(fused_features(model, source, s, r))))
    return rows


def pca_export(rows: Sequence[tuple], path=None) -> list[tuple]:
    """2-D PCA coordinates for ``(label, ratio, vector)`` rows.

    Vectors of rank 2 are mean-pooled first. Returns ``(label, ratio, x, y)``
    rows and, if ``path`` is given, writes them as CSV ``label,ratio,x,y``.
    """
    if len(rows) < 2:
        raise ContractViolation(f"pca_export needs >= 2 feature vectors, got {len(rows)}")
    vecs = []
    for _, _, v in rows:
        v = np.asarray(v, dtype=np.float64)
        vecs.append(mean_pool(v) if v.ndim == 2 else v.ravel())
    _, proj, _ = pca_embed(np.vstack(vecs), 2)
    out = [(label, float(r), float(p[0]), float(p[1])) for (label, r, _), p in zip(rows, proj)]
    if path is not None:
        lines = ["label,ratio,x,y"] + [f"{l},{fmt(r)},{fmt(x)},{fmt(y)}" for l, r, x, y in out]
        Path(path).write_text("\n".join(lines) + "\n")
    return out
