"""Per-ratio benchmark reports and their CSV/JSON serialization.

CSV floats use 6 fixed decimals; JSON keeps full precision (shortest repr)
so it round-trips exactly. Both are byte-deterministic for equal inputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import DataError, FormatError
from ..illumination import COLOR_SPACE, RATIO_LADDER
from ..numerics import seqsum
from .manifest import ModelResponse, TripletSample
from .scoring import parse_choice_answer, parse_count_answer, score_counting, score_multichoice

METRICS = ("mc_accuracy", "mc_micro_f1", "cnt_accuracy", "cnt_mae", "n_items")
REPORT_NOTES = {
    "f1_averaging": "micro (option decisions pooled across questions)",
    "ratio_averaging": "unweighted mean over the 17 ratio rows",
    "brightness_space": COLOR_SPACE,
    "unparsed_answers": "scored as wrong (empty set / count 0)",
    "counting_match": "exact",
}


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def fmt(x: float) -> str:
    return f"{x:.6f}"


@dataclass(frozen=True)
class ReportRow:
    ratio: float
    mc_accuracy: float
    mc_micro_f1: float
    cnt_accuracy: float
    cnt_mae: float
    n_items: float

    def values(self) -> list[float]:
        return [getattr(self, m) for m in METRICS]


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ratios = tuple(r.ratio for r in self.rows)
        if ratios != RATIO_LADDER:
            raise DataError(f"report rows must cover the 17-ratio ladder in order, got {ratios}")

    @property
    def average(self) -> dict:
        n = len(self.rows)
        return {m: float(seqsum([getattr(r, m) for r in self.rows])) / n for m in METRICS}

    def to_json(self) -> dict:
        return {"metadata": self.metadata,
                "rows": [asdict(r) for r in self.rows],
                "average": self.average}

    @classmethod
    def from_json(cls, d: dict) -> "EvalReport":
        rows = tuple(ReportRow(**r) for r in d["rows"])
        rep = cls(rows, d.get("metadata", {}))
        if "average" in d and d["average"] != rep.average:
            raise FormatError("report average row does not match its ratio rows")
        return rep


def build_eval_report(entries: Sequence[TripletSample], responses: Sequence[ModelResponse],
                      metadata: dict | None = None) -> EvalReport:
    """Score responses against manifest QA, one row per brightness ratio.

    A missing response counts as an unparsed (wrong) answer.
    """
    qa_index = {}
    for e in sorted(entries, key=lambda e: e.id):
        for q in e.qa:
            qa_index[(e.id, q.id)] = q
    if not qa_index:
        raise DataError("manifest contains no QA items")
    answers = {}
    for r in responses:
        key = (r.sample_id, r.qa_id, r.ratio)
        if (r.sample_id, r.qa_id) not in qa_index:
            raise DataError(f"response for unknown sample/qa {r.sample_id}/{r.qa_id}")
        if key in answers:
            raise DataError(f"duplicate response for {key}")
        answers[key] = r.answer_text

    rows, unparsed, missing = [], {}, 0
    for ratio in RATIO_LADDER:
        mc, cnt, bad = [], [], 0
        for (sid, qid), q in qa_index.items():
            text = answers.get((sid, qid, ratio))
            if text is None:
                missing += 1
                text = ""
            if q.task == "multi_choice":
                pred, ok = parse_choice_answer(text, q.options)
                mc.append((pred, q.gt_set, len(q.options)))
            else:
                pred, ok = parse_count_answer(text)
                cnt.append((pred, q.gt_count))
            bad += not ok
        if not mc or not cnt:
            raise DataError("need both multi_choice and counting items to build a report")
        acc, f1 = score_multichoice(mc)
        cacc, mae = score_counting(cnt)
        rows.append(ReportRow(ratio, acc, f1, cacc, mae, len(mc) + len(cnt)))
        unparsed[f"{ratio:g}"] = bad
    meta = {"notes": REPORT_NOTES, "unparsed_per_ratio": unparsed, "missing_responses": missing}
    meta.update(metadata or {})
    return EvalReport(tuple(rows), meta)


def _write(out_dir, stem, csv_lines, obj) -> tuple[Path, Path]:
    out = Path(out_dir)
    if not out.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out}")
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    csv_path.write_text("\n".join(csv_lines) + "\n")
    json_path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return csv_path, json_path


def write_report(report: EvalReport, out_dir, stem: str = "report") -> tuple[Path, Path]:
    lines = ["ratio," + ",".join(METRICS)]
    for r in report.rows:
        lines.append(",".join([fmt(r.ratio)] + [fmt(v) for v in r.values()]))
    avg = report.average
    lines.append(",".join(["avg"] + [fmt(avg[m]) for m in METRICS]))
    return _write(out_dir, stem, lines, report.to_json())


def read_report(path) -> EvalReport:
    return EvalReport.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SimilarityTable:
    """Mean pooled cosine similarity to normal-light features, per ratio and column."""

    ratios: tuple
    columns: dict
    metadata: dict = field(default_factory=dict)

    def average(self, name: str) -> float:
        vals = self.columns[name]
        return float(seqsum(list(vals))) / len(vals)

    def value(self, name: str, ratio: float) -> float:
        return self.columns[name][self.ratios.index(ratio)]

    def to_json(self) -> dict:
        return {"metadata": self.metadata, "ratios": list(self.ratios),
                "columns": {k: list(v) for k, v in self.columns.items()},
                "average": {k: self.average(k) for k in self.columns}}

    @classmethod
    def from_json(cls, d: dict) -> "SimilarityTable":
        return cls(tuple(d["ratios"]), {k: tuple(v) for k, v in d["columns"].items()},
                   d.get("metadata", {}))


def write_similarity_table(table: SimilarityTable, out_dir, stem: str = "similarity"):
    names = list(table.columns)
    lines = ["ratio," + ",".join(names)]
    for i, r in enumerate(table.ratios):
        lines.append(",".join([fmt(r)] + [_fmt_or_nan(table.columns[n][i]) for n in names]))
    lines.append(",".join(["avg"] + [_fmt_or_nan(table.average(n)) for n in names]))
    return _write(out_dir, stem, lines, table.to_json())


def _fmt_or_nan(x: float) -> str:
    return "nan" if math.isnan(x) else fmt(x)


def write_ablation_table(rows: Sequence[tuple[str, float]], out_dir, metadata: dict | None = None,
                         stem: str = "ablation"):
    lines = ["strategy,alignment"] + [f"{name},{fmt(v)}" for name, v in rows]
    obj = {"metadata": metadata or {}, "rows": [{"strategy": n, "alignment": v} for n, v in rows]}
    return _write(out_dir, stem, lines, obj)
