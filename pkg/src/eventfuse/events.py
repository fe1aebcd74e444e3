"""Event streams: CSV ingest, frame-pair simulation, accumulation, rendering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import BoundsError, ContractViolation, ParseError

# log offset so black pixels stay finite
LOG_EPS = 1e-3
# nominal duration of one simulated frame pair, microseconds
SIM_WINDOW_US = 1000


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class EventStream:
    """Events sorted by (t, y, x, p), stored column-wise."""

    width: int
    height: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    @classmethod
    def from_arrays(cls, width, height, t, x, y, p) -> "EventStream":
        t, x, y, p = (np.asarray(a, dtype=np.int64).ravel() for a in (t, x, y, p))
        if not (len(t) == len(x) == len(y) == len(p)):
            raise ContractViolation("event columns must have equal length")
        if width < 1 or height < 1:
            raise ContractViolation(f"sensor size must be positive, got {width}x{height}")
        bad = (~np.isin(p, (-1, 1))) | (t < 0) | (x < 0) | (x >= width) | (y < 0) | (y >= height)
        if bad.any():
            i = int(np.argmax(bad))
            _check_event(Event(int(t[i]), int(x[i]), int(y[i]), int(p[i])), width, height)
        order = np.lexsort((p, x, y, t))
        return cls(int(width), int(height), t[order], x[order], y[order], p[order])

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        return cls.from_arrays(width, height, [], [], [], [])

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self.t)):
            yield Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def to_csv(self, header: bool = True) -> str:
        lines = ["t,x,y,p"] if header else []
        lines += [f"{e.t},{e.x},{e.y},{e.p}" for e in self]
        return "\n".join(lines) + "\n"


def _check_event(ev: Event, width: int, height: int, line: int | None = None) -> None:
    if ev.p not in (-1, 1):
        raise ParseError(f"polarity must be -1 or 1, got {ev.p}", line)
    if ev.t < 0:
        raise ParseError(f"negative timestamp {ev.t}", line)
    if not (0 <= ev.x < width and 0 <= ev.y < height):
        raise BoundsError(
            f"event {tuple(ev)} outside {width}x{height} sensor"
            + (f" (line {line})" if line is not None else ""))


def parse_event_csv(text: str, width: int, height: int) -> EventStream:
    """Parse ``t_us,x,y,p`` lines; an initial ``t,x,y,p`` header is optional."""
    cols: list[list[int]] = [[], [], [], []]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.replace(" ", "") == "t,x,y,p":
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}: {line!r}", lineno)
        try:
            ev = Event(*(int(f.strip()) for f in parts))
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", lineno) from None
        _check_event(ev, width, height, lineno)
        for c, v in zip(cols, ev):
            c.append(v)
    return EventStream.from_arrays(width, height, *cols)


def shift_horizontal(frame: np.ndarray, shift_px: int) -> np.ndarray:
    """Sample each row ``shift_px`` columns to the right, replicating edges."""
    w = frame.shape[1]
    cols = np.clip(np.arange(w) + int(shift_px), 0, w - 1)
    return frame[:, cols]


def _as_gray(frame) -> np.ndarray:
    f = np.asarray(frame, dtype=np.float64)
    if f.ndim == 3 and f.shape[2] == 1:
        f = f[:, :, 0]
    if f.ndim != 2:
        raise ContractViolation(f"simulate_events needs a grayscale frame, got shape {f.shape}")
    if f.size and (f.min() < 0.0 or f.max() > 1.0):
        raise ContractViolation("frame values must lie in [0, 1]")
    return f


def log_delta(frame, shift_px: int) -> np.ndarray:
    f = _as_gray(frame)
    return np.log(shift_horizontal(f, shift_px) + LOG_EPS) - np.log(f + LOG_EPS)


def simulate_events(frame, shift_px: int, threshold: float) -> EventStream:
    """Events for a horizontal camera translation of ``shift_px`` pixels.

    Each pixel fires ``floor(|dlog| / threshold)`` events of polarity
    ``sign(dlog)``; the k-th of n events at a pixel is stamped
    ``(k + 1) * 1000 // (n + 1)`` microseconds.
    """
    if not threshold > 0:
        raise ContractViolation(f"contrast threshold must be > 0, got {threshold}")
    f = _as_gray(frame)
    h, w = f.shape
    delta = log_delta(f, shift_px)
    counts = np.floor(np.abs(delta) / threshold).astype(np.int64)
    ts, xs, ys, ps = [], [], [], []
    for yy, xx in zip(*np.nonzero(counts)):  # raster order
        n = int(counts[yy, xx])
        pol = 1 if delta[yy, xx] > 0 else -1
        for k in range(n):
            ts.append((k + 1) * SIM_WINDOW_US // (n + 1))
            xs.append(xx)
            ys.append(yy)
            ps.append(pol)
    t = np.asarray(ts, dtype=np.int64)
    x = np.asarray(xs, dtype=np.int64)
    y = np.asarray(ys, dtype=np.int64)
    p = np.asarray(ps, dtype=np.int64)
    order = np.lexsort((p, x, y, t))
    return EventStream(w, h, t[order], x[order], y[order], p[order])


@dataclass(frozen=True)
class EventFrame:
    """H x W x 2 polarity histogram; channel 0 positive, channel 1 negative."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "EventFrame") -> "EventFrame":
        return EventFrame(self.counts + other.counts)


def accumulate(stream: EventStream, t0: int = 0, t1: int | None = None) -> EventFrame:
    """Count events with ``t0 <= t < t1`` per pixel and polarity."""
    if t1 is None:
        t1 = int(stream.t.max()) + 1 if len(stream) else t0
    if t0 > t1:
        raise ContractViolation(f"window start {t0} after end {t1}")
    counts = np.zeros((stream.height, stream.width, 2), dtype=np.int64)
    sel = (stream.t >= t0) & (stream.t < t1)
    chan = np.where(stream.p[sel] > 0, 0, 1)
    np.add.at(counts, (stream.y[sel], stream.x[sel], chan), 1)
    return EventFrame(counts)


def render_event_frame(ef: EventFrame) -> np.ndarray:
    """Gray-background RGB view: red grows with positive counts, blue with negative."""
    c = np.asarray(ef.counts, dtype=np.float64)
    img = np.full(c.shape[:2] + (3,), 0.5)
    img[:, :, 0] = 0.5 + 0.5 * np.tanh(c[:, :, 0] / 2.0)
    img[:, :, 2] = 0.5 + 0.5 * np.tanh(c[:, :, 1] / 2.0)
    return np.clip(img, 0.0, 1.0)

