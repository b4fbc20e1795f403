"""Virtual moving-block-width (MBW) measurement rig.

A block scrolls horizontally across a simulated screen while a stationary
detector with a uniform aperture averages the light of the pixels under it.
The time the detector reading stays above a relative threshold, multiplied
by the velocity, is the apparent width of the moving block.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from typing import Iterable, Literal, Mapping

import numpy as np

from . import kvconfig
from .analysis import RegressionFit, linear_fit
from .display_models import (
    BUILTIN_MODELS,
    DisplayModel,
    n_samples,
    render_pixels,
    scrolling_levels,
    settle_frames,
)
from .errors import ConfigError, MotionBlurError, NoPassageError
from .waveform import Waveform, moving_average_filter, threshold_crossings

__all__ = [
    "RigConfig",
    "MbwPoint",
    "MbwSweep",
    "simulate_scroll",
    "calibration_levels",
    "measure_mbw",
    "sweep",
    "rig_from_config",
    "load_rig_config",
    "DEFAULT_VELOCITIES",
    "SWEEP_CSV_HEADER",
]

DEFAULT_VELOCITIES = tuple(range(5, 21))
SWEEP_CSV_HEADER = (
    "velocity_ppf",
    "crossing_time_s",
    "crossing_time_frames",
    "mbw_px",
    "delta_mbw_px",
    "delta_mbw_debiased_px",
)
POLARITIES = ("bright-block-on-dark", "dark-block-on-bright")
_PIXEL_CHUNK = 64


@dataclass(frozen=True)
class RigConfig:
    screen_width_px: int = 1024
    frame_rate: float = 60.0
    block_width_px: int = 512
    aperture_px: int = 500
    aperture_profile: str = "uniform"
    lmd_sample_rate: float = 20_000.0
    threshold: float = 0.10
    polarity: Literal["bright-block-on-dark", "dark-block-on-bright"] = "bright-block-on-dark"

    def __post_init__(self):
        if not 0 < self.block_width_px < self.screen_width_px:
            raise ConfigError("block_width_px must be positive and below screen_width_px")
        if not 1 <= self.aperture_px <= self.screen_width_px:
            raise ConfigError("aperture_px must lie in [1, screen_width_px]")
        if self.aperture_profile != "uniform":
            raise ConfigError(f"unsupported aperture_profile {self.aperture_profile!r}")
        if not 0 < self.threshold < 0.5:
            raise ConfigError(f"threshold must lie in (0, 0.5), got {self.threshold!r}")
        if self.polarity not in POLARITIES:
            raise ConfigError(f"polarity must be one of {', '.join(POLARITIES)}")
        if not self.frame_rate > 0 or not self.lmd_sample_rate > 0:
            raise ConfigError("frame_rate and lmd_sample_rate must be positive")

    @property
    def frame_period(self) -> float:
        return 1.0 / self.frame_rate

    @property
    def aperture_start(self) -> int:
        """First pixel under the aperture, which is centered on the screen."""
        return self.screen_width_px // 2 - self.aperture_px // 2

    @property
    def aperture_pixels(self) -> np.ndarray:
        return np.arange(self.aperture_start, self.aperture_start + self.aperture_px)

    @property
    def aperture_bias_px(self) -> float:
        """Width added by thresholding a uniform aperture's linear ramps."""
        return (1.0 - 2.0 * self.threshold) * (self.aperture_px - 1)


@dataclass(frozen=True)
class MbwPoint:
    velocity_ppf: int
    crossing_time_s: float
    crossing_time_frames: float
    mbw_px: float
    delta_mbw_px: float
    delta_mbw_debiased_px: float

    @classmethod
    def from_crossing_time(cls, crossing_time_s: float, rig: RigConfig, velocity_ppf: int) -> MbwPoint:
        frames = crossing_time_s * rig.frame_rate
        mbw = frames * velocity_ppf
        delta = mbw - rig.block_width_px
        return cls(
            int(velocity_ppf),
            crossing_time_s,
            frames,
            mbw,
            delta,
            delta - rig.aperture_bias_px,
        )

    def as_row(self) -> tuple:
        return (
            self.velocity_ppf,
            self.crossing_time_s,
            self.crossing_time_frames,
            self.mbw_px,
            self.delta_mbw_px,
            self.delta_mbw_debiased_px,
        )


@dataclass(frozen=True)
class MbwSweep:
    rig: RigConfig
    model_id: str
    points: tuple[MbwPoint, ...]

    def __post_init__(self):
        vs = [p.velocity_ppf for p in self.points]
        if not vs or any(b <= a for a, b in zip(vs, vs[1:])):
            raise ConfigError("sweep points must have strictly increasing velocities")

    @property
    def velocities(self) -> list[int]:
        return [p.velocity_ppf for p in self.points]

    def fit(self) -> RegressionFit:
        """Least-squares line of MBW against velocity."""
        return linear_fit([(p.velocity_ppf, p.mbw_px) for p in self.points])


def model_id(model: DisplayModel) -> str:
    for name, builtin in BUILTIN_MODELS.items():
        if builtin == model:
            return name
    return model.kind


def _check_velocity(rig: RigConfig, velocity_ppf) -> int:
    v = int(velocity_ppf) if float(velocity_ppf).is_integer() else None
    if v is None or not 1 <= v < rig.block_width_px:
        raise ConfigError(
            f"velocity {velocity_ppf!r} PPF outside [1, {rig.block_width_px}) or not an integer"
        )
    return v


def scroll_frames(rig: RigConfig, model: DisplayModel, velocity_ppf: int) -> int:
    """Frames to simulate so one complete passage over the aperture is seen.

    The block starts with its leading edge at pixel 0. If it already
    overlaps the aperture there, the first complete passage is the one
    entering on the next lap.
    """
    v = velocity_ppf
    w, a0, a = rig.block_width_px, rig.aperture_start, rig.aperture_px
    lap = rig.screen_width_px
    first_in = a0 + lap if lap - w < a0 + a else a0
    exit_lead = first_in + a + w
    margin = settle_frames(model) + 4
    return max(math.ceil(exit_lead / v), math.ceil(lap / v)) + margin


def _detector_trace(rig: RigConfig, model: DisplayModel, levels: np.ndarray, meta: dict) -> Waveform:
    """Unweighted aperture mean of per-pixel responses to ``levels``.

    Pixels with identical drive and delay are rendered once.
    """
    pixels = rig.aperture_pixels
    delays = model.scan_offset(pixels, rig.screen_width_px)
    keyed = np.concatenate([levels, delays[:, None]], axis=1)
    unique, counts = np.unique(keyed, axis=0, return_counts=True)
    n_frames = levels.shape[1]
    t = np.arange(n_samples(n_frames, rig.frame_rate, rig.lmd_sample_rate)) / rig.lmd_sample_rate
    total = np.zeros_like(t)
    for i in range(0, unique.shape[0], _PIXEL_CHUNK):
        block = unique[i : i + _PIXEL_CHUNK]
        y = render_pixels(model, block[:, :-1], rig.lmd_sample_rate, t=t, delays=block[:, -1])
        total += counts[i : i + _PIXEL_CHUNK] @ y
    return Waveform(total / rig.aperture_px, rig.lmd_sample_rate, 0.0, meta)


def _check_model(rig: RigConfig, model: DisplayModel) -> None:
    if model.frame_rate != rig.frame_rate:
        raise ConfigError(
            f"model frame rate {model.frame_rate:g} Hz differs from rig {rig.frame_rate:g} Hz"
        )


def _block_levels(rig: RigConfig) -> tuple[float, float]:
    """Background and block drive levels."""
    return (1.0, 0.0) if rig.polarity == "dark-block-on-bright" else (0.0, 1.0)


def simulate_scroll(
    rig: RigConfig,
    model: DisplayModel,
    velocity_ppf: int,
    *,
    n_frames: int | None = None,
) -> Waveform:
    """Detector trace while the block scrolls at ``velocity_ppf``.

    Each aperture pixel is driven by :func:`scrolling_levels` and rendered by
    its display model; the reading is the unweighted mean over the aperture.
    """
    v = _check_velocity(rig, velocity_ppf)
    _check_model(rig, model)
    if n_frames is None:
        n_frames = scroll_frames(rig, model, v)
    lo, hi = _block_levels(rig)
    levels = scrolling_levels(rig.block_width_px, rig.screen_width_px, v, n_frames, rig.aperture_pixels, lo, hi)
    return _detector_trace(rig, model, levels, {"velocity_ppf": v, "n_frames": n_frames})


def calibration_levels(
    rig: RigConfig, model: DisplayModel, *, filter_window: float | None = None
) -> tuple[float, float]:
    """Floor and plateau read off static full-background and full-block screens.

    Each static screen is rendered through the same detector (and optional
    filter) as the scroll. Levels are medians of the per-frame peak envelope
    over the settled frames, in the orientation :func:`measure_mbw` uses.
    """
    _check_model(rig, model)
    settle = settle_frames(model) + 2
    n_frames = settle + 4
    n = int(round(rig.lmd_sample_rate / rig.frame_rate))
    sign = -1.0 if rig.polarity == "dark-block-on-bright" else 1.0
    refs = []
    for level in _block_levels(rig):
        levels = np.full((rig.aperture_px, n_frames), level)
        trace = _detector_trace(rig, model, levels, {})
        if filter_window is not None:
            trace = moving_average_filter(trace, filter_window)
        settled = trace.samples[trace.samples.size - 3 * n :]
        refs.append(float(np.median(_frame_envelope(sign * settled, n))))
    return min(refs), max(refs)


def _frame_envelope(y: np.ndarray, n: int) -> np.ndarray:
    """Maximum of each consecutive ``n``-sample chunk (last chunk may be short)."""
    n = max(1, n)
    pad = (-y.size) % n
    padded = np.concatenate([y, np.full(pad, -np.inf)]) if pad else y
    return padded.reshape(-1, n).max(axis=1)


def reference_levels(
    trace: Waveform, frame_rate: float, tolerance: float = 0.02
) -> tuple[float, float]:
    """Floor and plateau of a passage.

    The per-frame peak envelope is used so pulsed or blinking light is
    referenced to its peaks. The plateau is the median envelope over frames
    within ``tolerance`` of the highest frame (the sustained interval); the
    floor is the median over frames within ``tolerance`` of the lowest.
    """
    env = _frame_envelope(trace.samples, int(round(trace.sample_rate / frame_rate)))
    top, bottom = env.max(), env.min()
    band = tolerance * (top - bottom)
    plateau = float(np.median(env[env >= top - band]))
    floor = float(np.median(env[env <= bottom + band]))
    return floor, plateau


def measure_mbw(
    trace: Waveform,
    rig: RigConfig,
    velocity_ppf: int,
    *,
    levels: tuple[float, float] | None = None,
) -> MbwPoint:
    """Moving block width from one complete passage in a detector trace.

    The threshold sits at ``rig.threshold`` of the way from floor to plateau
    (for a dark block, at the complementary level measured down from the
    background). ``levels`` gives ``(floor, plateau)`` from a calibration
    such as :func:`calibration_levels`; by default both are estimated from
    the trace itself. Above-threshold stretches separated by less than one frame
    period are merged, so ripple from a modulated backlight or an impulse
    display cannot split a passage. The first stretch that starts and ends
    inside the trace is the passage; its first rising to last falling
    crossing is the crossing time.
    """
    v = _check_velocity(rig, velocity_ppf)
    samples = trace.samples
    if rig.polarity == "dark-block-on-bright":
        samples = -samples
    signal = trace.replace(samples)
    floor, plateau = levels if levels is not None else reference_levels(signal, rig.frame_rate)
    if not plateau > floor:
        raise NoPassageError(f"v={v}: trace has no luminance contrast")
    level = floor + rig.threshold * (plateau - floor)

    t_in, t_out = _first_complete_passage(signal, level, rig.frame_period)
    return MbwPoint.from_crossing_time(t_out - t_in, rig, v)


def _first_complete_passage(signal: Waveform, level: float, frame_period: float) -> tuple[float, float]:
    events = threshold_crossings(signal, level)
    t_begin, t_end = signal.start_time, signal.end_time
    # above-threshold stretches as [rise, fall]; None marks an open end
    stretches: list[list[float | None]] = []
    if signal.samples[0] > level:
        stretches.append([None, None])
    for e in events:
        if e.direction == "rising":
            stretches.append([e.time, None])
        elif stretches:
            stretches[-1][1] = e.time
    max_gap = frame_period + 2.0 / signal.sample_rate
    merged: list[list[float | None]] = []
    for s in stretches:
        if merged and merged[-1][1] is not None and s[0] - merged[-1][1] <= max_gap:
            merged[-1][1] = s[1]
        else:
            merged.append(list(s))
    for s in merged:
        rise, fall = s
        if rise is None or fall is None:
            continue
        if rise - t_begin > max_gap and t_end - fall > max_gap:
            return rise, fall
    raise NoPassageError("no complete passage above threshold")


def sweep(
    rig: RigConfig,
    model: DisplayModel,
    velocities: Iterable[int] = DEFAULT_VELOCITIES,
    *,
    filter_window: float | None = None,
    name: str | None = None,
) -> MbwSweep:
    """MBW at each velocity, optionally after a centered moving average of
    ``filter_window`` seconds on the detector trace."""
    vs = sorted(set(velocities))
    if not vs:
        raise ConfigError("at least one velocity is required")
    levels = calibration_levels(rig, model, filter_window=filter_window)
    points = []
    for v in vs:
        try:
            trace = simulate_scroll(rig, model, v)
            if filter_window is not None:
                trace = moving_average_filter(trace, filter_window)
            points.append(measure_mbw(trace, rig, v, levels=levels))
        except MotionBlurError as exc:
            exc.args = (f"v={v}: {exc}",)
            raise
    return MbwSweep(rig, name or model_id(model), tuple(points))


_RIG_TYPES = {f.name: f.type for f in fields(RigConfig)}


def rig_from_config(values: Mapping[str, str], source: str | None = None) -> RigConfig:
    kvconfig.check_keys(values, _RIG_TYPES, source)
    kwargs: dict[str, object] = {}
    for key in ("screen_width_px", "block_width_px", "aperture_px"):
        if key in values:
            kwargs[key] = kvconfig.as_int(values, key)
    for key in ("frame_rate", "lmd_sample_rate", "threshold"):
        if key in values:
            kwargs[key] = kvconfig.as_float(values, key)
    for key in ("aperture_profile", "polarity"):
        if key in values:
            kwargs[key] = values[key].strip()
    return RigConfig(**kwargs)


def load_rig_config(path: str | os.PathLike) -> RigConfig:
    return rig_from_config(kvconfig.read_kv(path), os.fspath(path))
