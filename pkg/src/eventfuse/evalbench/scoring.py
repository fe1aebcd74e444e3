"""Answer extraction and the multi-choice / counting metrics."""

from __future__ import annotations

import re
from typing import Iterable

from ..errors import ContractViolation

_LETTER = re.compile(r"(?<![A-Za-z0-9])([A-H])(?![A-Za-z0-9])")
_INT = re.compile(r"(?<![A-Za-z0-9.])(\d+)(?![A-Za-z0-9]|\.\d)")
NUMBER_WORDS = {
    w: i for i, w in enumerate(
        "zero one two three four five six seven eight nine ten eleven twelve thirteen "
        "fourteen fifteen sixteen seventeen eighteen nineteen twenty".split())
}
_WORD = re.compile(r"\b(" + "|".join(NUMBER_WORDS) + r"|no(?=\s+[A-Za-z]))\b", re.IGNORECASE)


def parse_choice_answer(text: str, options) -> tuple[frozenset, bool]:
    """Standalone capitals A-H that name an option; ``(set(), False)`` if none."""
    opts = set(options)
    if not opts:
        raise ContractViolation("options must be non-empty")
    hits = frozenset(m for m in _LETTER.findall(text or "") if m in opts)
    return hits, bool(hits)


def parse_count_answer(text: str) -> tuple[int, bool]:
    """First integer; else first number word (``no <noun>`` reads as 0)."""
    text = text or ""
    m = _INT.search(text)
    if m:
        return int(m.group(1)), True
    m = _WORD.search(text)
    if m:
        return NUMBER_WORDS.get(m.group(1).lower(), 0), True
    return 0, False


def score_multichoice(pairs: Iterable) -> tuple[float, float]:
    """``pairs`` of (pred_set, gt_set, n_options) -> (exact-set accuracy, micro F1)."""
    pairs = list(pairs)
    if not pairs:
        raise ContractViolation("score_multichoice needs at least one pair")
    exact = tp = fp = fn = 0
    for pred, gt, _n_options in pairs:
        pred, gt = set(pred), set(gt)
        exact += pred == gt
        tp += len(pred & gt)
        fp += len(pred - gt)
        fn += len(gt - pred)
    denom = 2 * tp + fp + fn
    f1 = 1.0 if denom == 0 else 2 * tp / denom
    return exact / len(pairs), f1


def score_counting(pairs: Iterable) -> tuple[float, float]:
    """``pairs`` of (pred, gt) -> (exact-match accuracy, mean absolute error)."""
    pairs = list(pairs)
    if not pairs:
        raise ContractViolation("score_counting needs at least one pair")
    hits = sum(int(p) == int(g) for p, g in pairs)
    err = sum(abs(int(p) - int(g)) for p, g in pairs)
    return hits / len(pairs), err / len(pairs)
