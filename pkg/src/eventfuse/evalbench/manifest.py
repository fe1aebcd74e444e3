"""Manifest and response files (JSON lines) and the in-memory sample type."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractViolation, DataError, FormatError
from ..events import EventFrame, EventStream, accumulate, parse_event_csv, render_event_frame
from ..illumination import RATIO_LADDER, read_image

TASKS = ("multi_choice", "counting")
OPTION_LETTERS = "ABCDEFGH"


@dataclass(frozen=True)
class QaItem:
    id: str
    task: str
    question: str
    options: dict = field(default_factory=dict)
    gt_set: frozenset = frozenset()
    gt_count: int | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ContractViolation(f"qa {self.id}: unknown task {self.task!r}")
        if self.task == "multi_choice":
            letters = list(self.options)
            if not letters or len(letters) > 8 or any(l not in OPTION_LETTERS for l in letters):
                raise ContractViolation(f"qa {self.id}: options must be 1-8 letters from A-H")
            if not set(self.gt_set) <= set(letters):
                raise ContractViolation(f"qa {self.id}: ground truth {sorted(self.gt_set)} not among options")
            object.__setattr__(self, "gt_set", frozenset(self.gt_set))
        elif self.gt_count is None or self.gt_count < 0:
            raise ContractViolation(f"qa {self.id}: counting item needs gt_count >= 0")

    def to_json(self) -> dict:
        d = {"id": self.id, "task": self.task, "question": self.question}
        if self.task == "multi_choice":
            d["options"] = dict(self.options)
            d["gt_set"] = sorted(self.gt_set)
        else:
            d["gt_count"] = self.gt_count
        return d

    @classmethod
    def from_json(cls, d: dict) -> "QaItem":
        return cls(id=str(d["id"]), task=d["task"], question=d.get("question", ""),
                   options=dict(d.get("options", {})), gt_set=frozenset(d.get("gt_set", ())),
                   gt_count=d.get("gt_count"))


@dataclass(frozen=True)
class TripletSample:
    """One manifest entry; paths are resolved against the manifest directory."""

    id: str
    original: Path
    events: Path
    qa: tuple = ()

    def to_json(self, base: Path | None = None) -> dict:
        def rel(p):
            return str(p.relative_to(base)) if base else str(p)
        return {"id": self.id, "original": rel(self.original), "events": rel(self.events),
                "qa": [q.to_json() for q in self.qa]}


@dataclass(frozen=True)
class Sample:
    """A manifest entry with its images and events loaded."""

    id: str
    original: np.ndarray
    stream: EventStream
    frame: EventFrame
    event_image: np.ndarray
    qa: tuple = ()


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    return rows


def write_jsonl(path, rows) -> None:
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


def load_manifest(path) -> list[TripletSample]:
    path = Path(path)
    base = path.parent
    out, seen = [], set()
    for row in read_jsonl(path):
        try:
            sid = str(row["id"])
            s = TripletSample(sid, base / row["original"], base / row["events"],
                              tuple(QaItem.from_json(q) for q in row.get("qa", [])))
        except KeyError as exc:
            raise FormatError(f"{path}: manifest entry missing key {exc}") from None
        if sid in seen:
            raise DataError(f"{path}: duplicate sample id {sid!r}")
        seen.add(sid)
        for p in (s.original, s.events):
            if not p.exists():
                raise FileNotFoundError(f"sample {sid}: file not found: {p}")
        out.append(s)
    return out


def load_sample(entry: TripletSample) -> Sample:
    img = read_image(entry.original)
    if img.shape[2] == 1:
        img = np.repeat(img, 3, axis=2)
    h, w = img.shape[:2]
    stream = parse_event_csv(entry.events.read_text(), w, h)
    frame = accumulate(stream, 0, None)
    return Sample(entry.id, img, stream, frame, render_event_frame(frame), entry.qa)


def load_samples(manifest_path) -> list[Sample]:
    return [load_sample(e) for e in load_manifest(manifest_path)]


@dataclass(frozen=True)
class ModelResponse:
    sample_id: str
    qa_id: str
    ratio: float
    answer_text: str

    def __post_init__(self):
        if self.ratio not in RATIO_LADDER:
            raise DataError(f"response ratio {self.ratio} is not on the brightness ladder")

    def to_json(self) -> dict:
        return {"sample_id": self.sample_id, "qa_id": self.qa_id, "ratio": self.ratio,
                "answer_text": self.answer_text}


def load_responses(path) -> list[ModelResponse]:
    out = []
    for row in read_jsonl(path):
        try:
            out.append(ModelResponse(str(row["sample_id"]), str(row["qa_id"]),
                                     float(row["ratio"]), str(row["answer_text"])))
        except KeyError as exc:
            raise FormatError(f"{path}: response missing key {exc}") from None
    return out
