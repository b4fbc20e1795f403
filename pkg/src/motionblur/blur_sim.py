"""Simulated retinal blur of a tracked moving edge.

Two routes to the same perceived profile:

* :func:`retinal_profile` integrates each screen pixel's light along the
  smooth-pursuit trajectory, one ``T / v`` slice per pixel, and works for
  displays whose pixels do not behave identically (raster scan delay).
* :func:`mprc` takes the single-pixel response curve and slides a one-frame
  box over it, which is exact when every pixel behaves the same.

:func:`metrics_from_mprc` reduces a moving-picture response curve to the
blurred edge width / time chain and :func:`mprt` averages the edge time over
gray-level transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .display_models import DisplayModel, lcrc, render_pixels, scrolling_levels, settle_frames
from .errors import (
    ConfigError,
    InsufficientDataError,
    NoCrossingError,
    NoEdgeError,
    ResolutionError,
)
from .waveform import Waveform, moving_average_filter, width_between

__all__ = [
    "MotionMetrics",
    "MprtResult",
    "RetinalProfile",
    "DEFAULT_TRANSITIONS",
    "frame_samples",
    "mprc",
    "settled_levels",
    "metrics_from_mprc",
    "retinal_profile",
    "mprt",
]

DEFAULT_TRANSITIONS = ((0.0, 1.0), (1.0, 0.0))
MIN_FRAME_SAMPLES = 10
EDGE_LOW = 0.1
EDGE_HIGH = 0.9


def _short_mantissa(x: float, bits: int = 40) -> float:
    """``x`` rounded to ``bits`` significant bits.

    Multiplying such a value by an integer below ``2**(53 - bits)`` is exact,
    so the product divides back to ``x`` exactly.
    """
    m, e = math.frexp(x)
    return math.ldexp(round(math.ldexp(m, bits)), e - bits)


@dataclass(frozen=True)
class MotionMetrics:
    """Blurred edge width in pixels, frames and seconds."""

    bew_px: float
    n_bew_frames: float
    n_bet_s: float
    velocity_ppf: int

    @classmethod
    def from_edge_time(cls, edge_time: float, velocity_ppf: int, frame_period: float) -> MotionMetrics:
        # 40-bit N-BEW keeps bew / v == N-BEW exact for v < 8192, so N-BET
        # does not depend on the velocity used
        n_bew = _short_mantissa(edge_time / frame_period)
        bew = n_bew * velocity_ppf
        return cls(bew, bew / velocity_ppf, (bew / velocity_ppf) * frame_period, velocity_ppf)

    @property
    def n_bet_ms(self) -> float:
        return self.n_bet_s * 1e3


@dataclass(frozen=True)
class MprtResult:
    mprt_s: float
    per_transition: Mapping[tuple[float, float], MotionMetrics] = field(default_factory=dict)

    @property
    def mprt_ms(self) -> float:
        return self.mprt_s * 1e3


@dataclass(frozen=True, eq=False)
class RetinalProfile:
    """Perceived luminance against retinal position (whole pixels).

    Position 0 is the first pixel ahead of the block's leading edge; the
    block itself covers ``[-block_width_px, 0)``.
    """

    positions: np.ndarray
    values: np.ndarray
    velocity_ppf: int
    block_width_px: int


def frame_samples(sample_rate: float, frame_period: float) -> int:
    return int(round(sample_rate * frame_period))


def mprc(lcrc_trace: Waveform, frame_period: float) -> Waveform:
    """Slide a one-frame box forward over a response curve.

    Output sample ``k`` is the mean of input samples ``k .. k+N-1`` with
    ``N = round(sample_rate * frame_period)`` and keeps the time stamp of
    input sample ``k``. A unit step therefore becomes a ramp lasting exactly
    ``N`` samples.
    """
    n = frame_samples(lcrc_trace.sample_rate, frame_period)
    if n < MIN_FRAME_SAMPLES:
        raise ResolutionError(
            f"only {n} samples per frame; need at least {MIN_FRAME_SAMPLES}"
        )
    if lcrc_trace.samples.size < 3 * n:
        raise InsufficientDataError(
            f"response curve spans {lcrc_trace.samples.size} samples; need 3 frames ({3 * n})"
        )
    out = np.convolve(lcrc_trace.samples, np.full(n, 1.0 / n), mode="valid")
    return lcrc_trace.replace(out, meta={**lcrc_trace.meta, "frame_period": frame_period})


def settled_levels(w: Waveform, frame_period: float) -> tuple[float, float]:
    """Medians of the first and of the last frame of a trace."""
    n = max(1, frame_samples(w.sample_rate, frame_period))
    return float(np.median(w.samples[:n])), float(np.median(w.samples[-n:]))


def metrics_from_mprc(
    curve: Waveform,
    velocity_ppf: int,
    frame_period: float,
    *,
    low: float = EDGE_LOW,
    high: float = EDGE_HIGH,
) -> MotionMetrics:
    """Blurred edge width, N-BEW and N-BET of a moving-picture response curve.

    The curve is rescaled so its first settled frame maps to 0 and its last
    to 1 (falling edges become rising ones), the ``low``-``high`` edge time
    is measured and converted to pixels at ``velocity_ppf``.
    """
    if int(velocity_ppf) != velocity_ppf or velocity_ppf < 1:
        raise ConfigError(f"velocity must be a positive integer, got {velocity_ppf!r}")
    start, end = settled_levels(curve, frame_period)
    span = end - start
    if abs(span) <= 1e-12 * max(1.0, abs(start), abs(end)):
        raise NoEdgeError("response curve has no transition between its settled levels")
    rel = curve.replace((curve.samples - start) / span)
    try:
        edge = width_between(rel, low, high, mode="edge")
    except NoCrossingError as exc:
        raise NoEdgeError(f"no {low:g}-{high:g} edge: {exc}") from None
    return MotionMetrics.from_edge_time(edge, int(velocity_ppf), frame_period)


def mprt(
    model: DisplayModel,
    transitions: Iterable[tuple[float, float]] = DEFAULT_TRANSITIONS,
    velocity_ppf: int = 10,
    sample_rate: float = 20_000.0,
    *,
    prefilter_window: float | None = None,
) -> MprtResult:
    """Average N-BET over gray-level transitions.

    ``prefilter_window`` applies a centered moving average to every
    response curve before the one-frame box (the improved-curve route for
    modulated backlights); its length is usually the modulation period.
    """
    pairs = sorted({(float(a), float(b)) for a, b in transitions})
    if not pairs:
        raise ConfigError("at least one gray-level transition is required")
    per = {}
    for pair in pairs:
        curve = lcrc(model, pair[0], pair[1], sample_rate)
        if prefilter_window is not None:
            curve = moving_average_filter(curve, prefilter_window)
        try:
            per[pair] = metrics_from_mprc(mprc(curve, model.frame_period), velocity_ppf, model.frame_period)
        except NoEdgeError as exc:
            raise NoEdgeError(f"transition {pair[0]:g}->{pair[1]:g}: {exc}") from None
    mean = sum(m.n_bet_s for m in per.values()) / len(per)
    return MprtResult(mean, per)


def retinal_profile(
    model: DisplayModel,
    block_width_px: int,
    velocity_ppf: int,
    sample_rate: float = 20_000.0,
    *,
    from_level: float = 0.0,
    to_level: float = 1.0,
    margin_px: int | None = None,
    screen_width_px: int = 1024,
) -> RetinalProfile:
    """Perceived profile of a block tracked by the eye for one frame.

    The block scrolls right by ``velocity_ppf`` pixels per frame long enough
    for every pixel in view to settle. During the integration frame the
    eye's retinal position ``x`` looks at screen pixel ``x + m`` for the
    ``m``-th slice ``[m T / v, (m+1) T / v)``; each slice's integral is the
    mean of its samples. Pixels are rendered individually, so raster scan
    delay (positions taken modulo ``screen_width_px``) is honoured.
    """
    v = int(velocity_ppf)
    if v != velocity_ppf or v < 1:
        raise ConfigError(f"velocity must be a positive integer, got {velocity_ppf!r}")
    if block_width_px < 1:
        raise ConfigError("block width must be at least one pixel")
    period = model.frame_period
    if sample_rate * period / v < 2:
        raise ResolutionError(
            f"{sample_rate * period / v:.2f} samples per pursuit slice; need at least 2"
        )
    settle = settle_frames(model)
    if margin_px is None:
        margin_px = v * (settle + 3)
    n0 = math.ceil((block_width_px + margin_px) / v) + settle + 4

    positions = np.arange(-block_width_px - margin_px, margin_px)
    lo = n0 * v + positions[0]
    pixels = np.arange(lo, n0 * v + positions[-1] + v)
    width = int(pixels[-1]) + block_width_px + 2 * v + 1
    levels = scrolling_levels(
        block_width_px, width, v, n0 + 1, pixels, from_level, to_level
    )
    delays = model.scan_offset(np.mod(pixels, screen_width_px), screen_width_px)

    i0 = math.ceil(n0 * period * sample_rate - 1e-9)
    i1 = math.ceil((n0 + 1) * period * sample_rate - 1e-9)
    t = np.arange(i0, i1) / sample_rate
    y = render_pixels(model, levels, sample_rate, t=t, delays=delays)

    slice_idx = np.floor((t - n0 * period) * v / period + 1e-9).astype(int)
    slice_idx = np.clip(slice_idx, 0, v - 1)
    slice_means = np.stack([y[:, slice_idx == m].mean(axis=1) for m in range(v)], axis=1)

    rows = (positions - positions[0])[:, None] + np.arange(v)[None, :]
    values = slice_means[rows, np.arange(v)[None, :]].mean(axis=1)
    return RetinalProfile(positions, values, v, block_width_px)
