"""Benchmark harness: manifests, answer scoring, reports and feature evaluation."""

from .ablation import EXTREME_RATIOS, STRATEGIES, run_ablation
from .features import build_triplets, collect_pca_inputs, cosine_table, pca_export, pooled_cosine
from .manifest import (ModelResponse, QaItem, Sample, TripletSample, load_manifest, load_responses,
                       load_sample, load_samples)
from .report import (EvalReport, ReportRow, SimilarityTable, build_eval_report, config_hash,
                     read_report, write_ablation_table, write_report, write_similarity_table)
from .scoring import parse_choice_answer, parse_count_answer, score_counting, score_multichoice

__all__ = [
    "EXTREME_RATIOS", "STRATEGIES", "run_ablation", "build_triplets", "collect_pca_inputs",
    "cosine_table", "pca_export", "pooled_cosine", "ModelResponse", "QaItem", "Sample",
    "TripletSample", "load_manifest", "load_responses", "load_sample", "load_samples",
    "EvalReport", "ReportRow", "SimilarityTable", "build_eval_report", "config_hash",
    "read_report", "write_ablation_table", "write_report", "write_similarity_table",
    "parse_choice_answer", "parse_count_answer", "score_counting", "score_multichoice",
]
