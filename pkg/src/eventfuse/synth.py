"""Seeded procedural triplet corpus with exact QA ground truth.

Each scene is a 32x32 RGB image: a dim colored background with a few
non-overlapping squares, discs and bars in saturated palette colors. The
event stream comes from the scene's luminance under a small horizontal
camera shift. Every question is answerable from the placement record, so
ground truth is exact by construction.

Layout written by ``generate_corpus``::

    <out>/manifest.jsonl
    <out>/images/<id>.ppm
    <out>/events/<id>.csv
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolation
from .evalbench.manifest import OPTION_LETTERS, ModelResponse, QaItem, write_jsonl
from .events import simulate_events
from .illumination import RATIO_LADDER, luminance, quantize8, write_image
from .numerics import Rng

SIZE = 32
KINDS = ("square", "disc", "bar")
PALETTE = {
    "red": (0.92, 0.12, 0.10),
    "green": (0.10, 0.78, 0.22),
    "blue": (0.16, 0.26, 0.94),
    "yellow": (0.95, 0.85, 0.12),
    "magenta": (0.86, 0.16, 0.80),
    "cyan": (0.12, 0.82, 0.88),
    "white": (0.96, 0.96, 0.96),
}
EVENT_THRESHOLD = 0.2
# log-uniform intensity ranges: scenes span low and high radiance so that
# both ends of the ratio ladder clip away real detail
BG_LEVEL = (0.02, 0.2)
OBJECT_GAIN = (0.1, 0.9)


@dataclass(frozen=True)
class Shape:
    kind: str
    color: str
    y: int
    x: int
    h: int
    w: int


@dataclass(frozen=True)
class Scene:
    id: str
    image: np.ndarray
    shapes: tuple
    background: str
    shift_px: int


class _Draw:
    """Integer and choice helpers over one Rng stream."""

    def __init__(self, seed: int):
        self.rng = Rng(seed)

    def uniform(self) -> float:
        return float(self.rng.uniform(1)[0])

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]


def _log_uniform(draw: _Draw, lo: float, hi: float) -> float:
    return lo * (hi / lo) ** draw.uniform()


def _mask(shape: Shape) -> np.ndarray:
    m = np.zeros((SIZE, SIZE), dtype=bool)
    if shape.kind == "disc":
        yy, xx = np.mgrid[0:shape.h, 0:shape.w]
        cy, cx = (shape.h - 1) / 2.0, (shape.w - 1) / 2.0
        r = shape.h / 2.0
        m[shape.y:shape.y + shape.h, shape.x:shape.x + shape.w] = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    else:
        m[shape.y:shape.y + shape.h, shape.x:shape.x + shape.w] = True
    return m


def _place(draw: _Draw, kind: str, occupied: np.ndarray, tries: int = 200) -> Shape | None:
    for _ in range(tries):
        if kind == "bar":
            long_, short = draw.randint(10, 16), draw.randint(3, 4)
            h, w = (long_, short) if draw.uniform() < 0.5 else (short, long_)
        else:
            h = w = draw.randint(5, 8)
        y, x = draw.randint(0, SIZE - h), draw.randint(0, SIZE - w)
        s = Shape(kind, draw.choice(tuple(PALETTE)), y, x, h, w)
        # one-pixel gap keeps shapes countable
        box = occupied[max(0, y - 1):y + h + 1, max(0, x - 1):x + w + 1]
        if not box.any():
            return s
    return None


def make_scene(seed: int, sid: str) -> Scene:
    draw = _Draw(seed)
    bg_name = draw.choice(("red", "green", "blue", "yellow", "magenta", "cyan"))
    level = _log_uniform(draw, *BG_LEVEL)
    img = np.empty((SIZE, SIZE, 3))
    img[:] = np.asarray(PALETTE[bg_name]) * level
    occupied = np.zeros((SIZE, SIZE), dtype=bool)
    shapes = []
    for _ in range(draw.randint(2, 6)):
        s = _place(draw, draw.choice(KINDS), occupied)
        if s is None:
            continue
        m = _mask(s)
        occupied |= m
        gain = _log_uniform(draw, *OBJECT_GAIN)
        img[m] = np.asarray(PALETTE[s.color]) * gain
        shapes.append(s)
    shift = draw.randint(1, 2)
    return Scene(sid, quantize8(img), tuple(shapes), bg_name, shift)


def _plural(kind: str) -> str:
    return kind + "s"


def _statements(scene: Scene) -> list[tuple[str, bool]]:
    counts = {k: sum(s.kind == k for s in scene.shapes) for k in KINDS}
    colors = {s.color for s in scene.shapes}
    out = []
    for k in KINDS:
        out.append((f"There is at least one {k}.", counts[k] > 0))
        out.append((f"There are exactly {counts[k] + 1} {_plural(k)}.", False))
        out.append((f"There are exactly {counts[k]} {_plural(k)}.", True))
    for c in PALETTE:
        out.append((f"Some object is {c}.", c in colors))
    out.append((f"The background is {scene.background}.", True))
    return out


def make_qa(scene: Scene, seed: int) -> tuple[QaItem, ...]:
    draw = _Draw(seed)
    pool = _statements(scene)
    picked = []
    while len(picked) < 4:
        cand = draw.choice(pool)
        if cand[0] not in [p[0] for p in picked]:
            picked.append(cand)
    if not any(t for _, t in picked):
        trues = [p for p in pool if p[1]]
        picked[draw.randint(0, 3)] = draw.choice(trues)
    letters = OPTION_LETTERS[:4]
    mc = QaItem(f"{scene.id}-mc", "multi_choice", "Which statements about the scene are true?",
                options={l: text for l, (text, _) in zip(letters, picked)},
                gt_set=frozenset(l for l, (_, t) in zip(letters, picked) if t))
    kind = draw.choice(KINDS)
    cnt = QaItem(f"{scene.id}-cnt", "counting", f"How many {_plural(kind)} are in the scene?",
                 gt_count=sum(s.kind == kind for s in scene.shapes))
    return (mc, cnt)


def generate_corpus(out_dir, n: int = 64, seed: int = 7) -> Path:
    """Write ``n`` scenes under ``out_dir``; returns the manifest path."""
    if n < 1:
        raise ContractViolation(f"corpus size must be >= 1, got {n}")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "events").mkdir(parents=True, exist_ok=True)
    master = Rng(seed)
    rows = []
    for i in range(n):
        sid = f"s{i:03d}"
        scene_seed, qa_seed = (int(v) for v in master.next_u64(2))
        scene = make_scene(scene_seed, sid)
        stream = simulate_events(luminance(scene.image), scene.shift_px, EVENT_THRESHOLD)
        write_image(out / "images" / f"{sid}.ppm", scene.image)
        (out / "events" / f"{sid}.csv").write_text(stream.to_csv(header=True))
        qa = make_qa(scene, qa_seed)
        rows.append({"id": sid, "original": f"images/{sid}.ppm", "events": f"events/{sid}.csv",
                     "qa": [q.to_json() for q in qa]})
    manifest = out / "manifest.jsonl"
    write_jsonl(manifest, rows)
    return manifest


def synthetic_responses(entries, seed: int = 0) -> list[ModelResponse]:
    """Answers from a mock model whose reliability falls off with |log2 ratio|.

    Useful for exercising the scoring pipeline; carries no claim about any
    real model.
    """
    draw = _Draw(seed)
    out = []
    for e in sorted(entries, key=lambda e: e.id):
        for q in e.qa:
            for r in RATIO_LADDER:
                p_ok = 0.9 / (1.0 + 0.35 * abs(float(np.log2(r))))
                good = draw.uniform() < p_ok
                if q.task == "multi_choice":
                    ans = set(q.gt_set)
                    if not good:
                        ans ^= {draw.choice(tuple(q.options))}
                    text = ("The answer is " + " and ".join(sorted(ans)) + ".") if ans else "I cannot tell."
                else:
                    val = q.gt_count if good else max(0, q.gt_count + draw.choice((-2, -1, 1, 2)))
                    text = f"There are {val}."
                out.append(ModelResponse(e.id, q.id, r, text))
    return out
