"""Uniformly sampled luminance traces and the primitives built on them.

A :class:`Waveform` is the common currency of the toolkit: display models
emit them, the blur simulation convolves them and the virtual rig thresholds
them. Luminance is relative (dimensionless) everywhere except at ingestion.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Literal, Mapping

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidReferenceError,
    NoCrossingError,
    NonUniformGridError,
    WindowTooLongError,
)

__all__ = [
    "Waveform",
    "CrossingEvent",
    "normalize",
    "moving_average_filter",
    "box_taps",
    "threshold_crossings",
    "width_between",
    "resample",
    "read_waveform_csv",
    "write_waveform_csv",
    "CSV_HEADER",
]

CSV_HEADER = ("time_s", "luminance")
GRID_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Waveform:
    """Luminance samples on a uniform time grid.

    Sample ``i`` sits at ``start_time + i / sample_rate``. ``meta`` carries
    free-form annotations (for instance the switch instant of a response
    curve) and is ignored by every numeric operation.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        y = np.array(self.samples, dtype=float)
        if y.ndim != 1 or y.size < 2:
            raise InsufficientDataError("a waveform needs at least 2 samples")
        if not np.all(np.isfinite(y)):
            raise DataError("waveform samples must be finite")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate!r}")
        y.setflags(write=False)
        object.__setattr__(self, "samples", y)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self) -> float:
        """Time from the first to the last sample."""
        return (self.samples.size - 1) / self.sample_rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    def replace(self, samples=None, *, start_time=None, meta=None) -> Waveform:
        return Waveform(
            self.samples if samples is None else samples,
            self.sample_rate,
            self.start_time if start_time is None else start_time,
            self.meta if meta is None else meta,
        )

    def slice_time(self, t0: float, t1: float) -> Waveform:
        """Samples with ``t0 <= t <= t1`` (grid-snapped)."""
        i0 = max(0, math.ceil((t0 - self.start_time) * self.sample_rate - 1e-9))
        i1 = min(self.samples.size - 1, math.floor((t1 - self.start_time) * self.sample_rate + 1e-9))
        return Waveform(
            self.samples[i0 : i1 + 1],
            self.sample_rate,
            self.start_time + i0 / self.sample_rate,
            self.meta,
        )


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    direction: Literal["rising", "falling"]
    level: float


def normalize(w: Waveform, low_ref: float, high_ref: float) -> Waveform:
    """Map ``low_ref`` to 0 and ``high_ref`` to 1."""
    if not high_ref > low_ref:
        raise InvalidReferenceError(
            f"high_ref ({high_ref!r}) must exceed low_ref ({low_ref!r})"
        )
    return w.replace((w.samples - low_ref) / (high_ref - low_ref))


def box_taps(window: float, sample_rate: float) -> int:
    """Number of samples in a box window of ``window`` seconds."""
    return int(round(window * sample_rate))


def moving_average_filter(w: Waveform, window: float) -> Waveform:
    """Centered moving average over ``window`` seconds.

    The output keeps only fully supported samples, so it is shorter than the
    input by ``taps - 1`` samples. Each output sample is time-stamped at the
    center of its window; for an even tap count that lands half a sample off
    the input grid, which keeps the filter free of phase shift.
    """
    if not window > 0:
        raise ConfigError(f"filter window must be positive, got {window!r}")
    if window > w.duration + 0.5 / w.sample_rate:
        raise WindowTooLongError(
            f"filter window {window:g} s exceeds trace duration {w.duration:g} s"
        )
    taps = box_taps(window, w.sample_rate)
    if taps < 1:
        raise ConfigError(f"filter window {window:g} s is shorter than one sample")
    if w.samples.size - taps + 1 < 2:
        raise WindowTooLongError("filter window leaves fewer than 2 output samples")
    out = np.convolve(w.samples, np.full(taps, 1.0 / taps), mode="valid")
    return w.replace(out, start_time=w.start_time + (taps - 1) / (2.0 * w.sample_rate))


def threshold_crossings(w: Waveform, level: float) -> list[CrossingEvent]:
    """Every crossing of ``level``, linearly interpolated, in time order.

    Samples exactly at ``level`` are not crossings by themselves. A run of
    them counts once, at the run's midpoint, and only when the samples on
    either side of the run straddle the level.
    """
    y = w.samples
    sign = np.sign(y - level)
    nz = np.flatnonzero(sign)
    if nz.size < 2:
        return []
    s = sign[nz]
    change = np.flatnonzero(s[1:] != s[:-1])
    i = nz[change]
    j = nz[change + 1]
    adjacent = j == i + 1
    frac = np.where(
        adjacent,
        (level - y[i]) / np.where(adjacent, y[j] - y[i], 1.0),
        0.0,
    )
    pos = np.where(adjacent, i + frac, (i + j) / 2.0)
    times = w.start_time + pos / w.sample_rate
    rising = s[change + 1] > 0
    return [
        CrossingEvent(float(t), "rising" if r else "falling", float(level))
        for t, r in zip(times, rising)
    ]


def _times(events: Iterable[CrossingEvent], direction: str) -> list[float]:
    return [e.time for e in events if e.direction == direction]


def width_between(
    w: Waveform,
    low_level: float,
    high_level: float | None = None,
    *,
    mode: Literal["edge", "envelope"] = "edge",
) -> float:
    """Duration between threshold crossings.

    ``edge`` mode times one monotone transition between ``low_level`` and
    ``high_level``: for a rising edge, from the last rising crossing of the
    low level preceding the first rising crossing of the high level; for a
    falling edge, the mirror image. Whichever transition completes first is
    used.

    ``envelope`` mode ignores ``high_level`` and returns the span from the
    first rising crossing of ``low_level`` to the last falling crossing after
    it, which makes it insensitive to ripple inside the pulse.
    """
    low_events = threshold_crossings(w, low_level)
    if mode == "envelope":
        rises = _times(low_events, "rising")
        if not rises:
            raise NoCrossingError(low_level, "rising crossing of level")
        falls = [t for t in _times(low_events, "falling") if t > rises[0]]
        if not falls:
            raise NoCrossingError(low_level, "falling crossing of level")
        return falls[-1] - rises[0]
    if mode != "edge":
        raise ConfigError(f"unknown mode {mode!r}")
    if high_level is None or not high_level > low_level:
        raise ConfigError("edge mode needs high_level > low_level")
    high_events = threshold_crossings(w, high_level)
    if not low_events:
        raise NoCrossingError(low_level, "low level")
    if not high_events:
        raise NoCrossingError(high_level, "high level")

    candidates = []
    high_up = _times(high_events, "rising")
    for th in high_up:
        before = [t for t in _times(low_events, "rising") if t <= th]
        if before:
            candidates.append((th, th - before[-1]))
            break
    low_down = _times(low_events, "falling")
    for tl in low_down:
        before = [t for t in _times(high_events, "falling") if t <= tl]
        if before:
            candidates.append((tl, tl - before[-1]))
            break
    if not candidates:
        raise NoCrossingError(high_level, "transition through level")
    return min(candidates)[1]


def resample(w: Waveform, new_rate: float) -> Waveform:
    """Linear interpolation onto a ``new_rate`` grid over the same span.

    The new grid starts at the same instant and keeps every point that does
    not run past the original last sample.
    """
    if not new_rate > 0:
        raise ConfigError(f"new_rate must be positive, got {new_rate!r}")
    n = math.floor(w.duration * new_rate + 1e-9) + 1
    if n < 2:
        raise InsufficientDataError("resampled trace would have fewer than 2 samples")
    k = np.arange(n)
    t_new = k / new_rate
    t_old = np.arange(w.samples.size) / w.sample_rate
    return Waveform(np.interp(t_new, t_old, w.samples), new_rate, w.start_time, w.meta)


def read_waveform_csv(source: str | os.PathLike | IO[str]) -> Waveform:
    """Parse a ``time_s,luminance`` CSV.

    Raises:
        NonUniformGridError: a time step deviates from the median step by more
            than 1 ppm, or time does not increase. ``row`` is the 1-based
            line number in the file (the header is line 1).
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_waveform_csv(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise InsufficientDataError("empty waveform file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise DataError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}")
    times, values, lines = [], [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 2:
            raise DataError(f"expected 2 columns at row {line_no}")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
            lines.append(line_no)
        except ValueError:
            raise DataError(f"non-numeric value at row {line_no}") from None
    if len(times) < 2:
        raise InsufficientDataError("a waveform file needs at least 2 rows")
    t = np.asarray(times)
    step = np.diff(t)
    ref = float(np.median(step))
    bad = np.flatnonzero((step <= 0) | (np.abs(step - ref) > GRID_TOLERANCE * abs(ref)))
    if bad.size:
        raise NonUniformGridError(lines[int(bad[0]) + 1])
    mean_step = (t[-1] - t[0]) / (t.size - 1)
    return Waveform(np.asarray(values), 1.0 / mean_step, float(t[0]))


def write_waveform_csv(w: Waveform, dest: str | os.PathLike | IO[str]) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            write_waveform_csv(w, fh)
        return
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    for t, y in zip(w.times.tolist(), w.samples.tolist()):
        buf.write(f"{t!r},{y!r}\n")
    dest.write(buf.getvalue())
