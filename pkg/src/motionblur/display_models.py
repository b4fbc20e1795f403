"""Temporal light-output models for hold-type and impulse-type displays.

Every model turns a per-frame drive sequence (relative gray levels in
[0, 1]) into a luminance trace sampled at the detector rate. Gray maps to
luminance one-to-one; no gamma is applied.

The liquid-crystal kinds share a first-order response: within a segment of
constant target level ``L`` the luminance relaxes as
``L + (y0 - L) * exp(-t / tau)``, with ``tau_rise`` when moving up and
``tau_fall`` when moving down. State carries over frame boundaries.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Mapping, Sequence

import numpy as np

from . import kvconfig
from .errors import BoundsError, ConfigError, ResolutionError
from .waveform import Waveform

__all__ = [
    "DisplayModel",
    "IdealHold",
    "ExponentialLC",
    "Impulse",
    "BacklightBlink",
    "BlackFrameInsertion",
    "PixelDrive",
    "from_8bit",
    "pixel_response",
    "render_pixels",
    "lcrc",
    "scrolling_drive",
    "scrolling_levels",
    "settle_frames",
    "model_from_config",
    "model_to_config",
    "load_model_config",
    "BUILTIN_MODELS",
    "MIN_SAMPLES_PER_FRAME",
]

MIN_SAMPLES_PER_FRAME = 10
_EPS = 1e-9


def from_8bit(value: int) -> float:
    """Gray level of an 8-bit code value (0-255)."""
    if not 0 <= value <= 255:
        raise BoundsError(f"8-bit gray value out of range: {value!r}")
    return value / 255.0


@dataclass(frozen=True)
class DisplayModel:
    """Base class; use one of the concrete kinds below."""

    frame_rate: float = 60.0
    scan_delay: bool = False

    kind: ClassVar[str] = ""

    def __post_init__(self):
        if not self.frame_rate > 0:
            raise ConfigError(f"frame_rate must be positive, got {self.frame_rate!r}")

    @property
    def frame_period(self) -> float:
        return 1.0 / self.frame_rate

    def modulation_period(self) -> float | None:
        """Period of the light modulation the display adds on top of its
        content, or None for displays whose output is flat between updates."""
        return None

    def scan_offset(self, pixel_x, screen_width_px: int):
        """Switching delay of column ``pixel_x`` under raster scanning."""
        if not self.scan_delay:
            return np.zeros_like(np.asarray(pixel_x, dtype=float))
        return np.asarray(pixel_x, dtype=float) / screen_width_px * self.frame_period

    def _render(self, levels: np.ndarray, delays: np.ndarray, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _check_tau(**taus):
    for name, value in taus.items():
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value!r}")


def _frame_position(model: DisplayModel, delays, t, n_frames):
    """Frame index (with -1 shifted to 0) and time into that frame.

    Frame ``-1`` covers the interval before a delayed pixel's first update
    and shows the first drive level.
    """
    phase = (t[None, :] - delays[:, None]) * model.frame_rate + 1.0
    idx = np.clip(np.floor(phase + _EPS), 0, n_frames).astype(np.intp)
    into = np.maximum(phase - idx, 0.0) * model.frame_period
    return idx, into


def _with_lead_frame(levels: np.ndarray) -> np.ndarray:
    return np.concatenate([levels[:, :1], levels], axis=1)


@dataclass(frozen=True)
class IdealHold(DisplayModel):
    """Instantaneous switching, light held for the whole frame."""

    kind: ClassVar[str] = "ideal_hold"

    def _render(self, levels, delays, t):
        idx, _ = _frame_position(self, delays, t, levels.shape[1])
        return np.take_along_axis(_with_lead_frame(levels), idx, axis=1)


def _first_order(levels, delays, t, model, tau_rise, tau_fall, offsets, black):
    """First-order LC response driven by a piecewise-constant target.

    ``offsets`` are the segment starts within a frame; segment ``j > 0``
    is driven to 0 when ``black`` (black-data insertion).
    """
    n_pix, n_frames = levels.shape
    period = model.frame_period
    offsets = np.asarray(offsets, dtype=float)
    n_sub = offsets.size
    seg_len = np.diff(np.append(offsets, period))

    ext = _with_lead_frame(levels)
    targets = np.repeat(ext, n_sub, axis=1)
    if black:
        targets = targets.copy()
        for j in range(1, n_sub):
            targets[:, j::n_sub] = 0.0
    n_seg = targets.shape[1]

    y0 = np.empty((n_pix, n_seg))
    y = ext[:, 0].astype(float)
    for s in range(n_seg):
        y0[:, s] = y
        target = targets[:, s]
        tau = np.where(target > y, tau_rise, tau_fall)
        y = target + (y - target) * np.exp(-seg_len[s % n_sub] / tau)

    idx, into = _frame_position(model, delays, t, n_frames)
    sub = np.searchsorted(offsets, into + _EPS * period, side="right") - 1
    sub = np.clip(sub, 0, n_sub - 1)
    seg = idx * n_sub + sub
    elapsed = np.maximum(into - offsets[sub], 0.0)
    start = np.take_along_axis(y0, seg, axis=1)
    target = np.take_along_axis(targets, seg, axis=1)
    tau = np.where(target > start, tau_rise, tau_fall)
    return target + (start - target) * np.exp(-elapsed / tau)


@dataclass(frozen=True)
class ExponentialLC(DisplayModel):
    """Hold-type LCD with first-order liquid-crystal switching."""

    tau_rise: float = 4e-3
    tau_fall: float = 4e-3

    kind: ClassVar[str] = "exponential_lc"

    def __post_init__(self):
        super().__post_init__()
        _check_tau(tau_rise=self.tau_rise, tau_fall=self.tau_fall)

    def _render(self, levels, delays, t):
        return _first_order(levels, delays, t, self, self.tau_rise, self.tau_fall, [0.0], False)


@dataclass(frozen=True)
class Impulse(DisplayModel):
    """CRT-like flash: a rectangular excitation of ``pulse_width`` at the
    start of every frame, then exponential phosphor decay."""

    pulse_width: float = 1e-4
    decay_tau: float = 1e-3

    kind: ClassVar[str] = "impulse"

    def __post_init__(self):
        super().__post_init__()
        _check_tau(pulse_width=self.pulse_width, decay_tau=self.decay_tau)
        if self.pulse_width >= self.frame_period:
            raise ConfigError("pulse_width must be shorter than the frame period")

    def modulation_period(self):
        return self.frame_period

    def _render(self, levels, delays, t):
        n_pix, n_frames = levels.shape
        ext = _with_lead_frame(levels).astype(float)
        pw, tau = self.pulse_width, self.decay_tau
        carry = np.zeros_like(ext)
        peak = np.zeros_like(ext)
        c = np.zeros(n_pix)
        for n in range(ext.shape[1]):
            carry[:, n] = c
            peak[:, n] = np.maximum(ext[:, n], c * math.exp(-pw / tau))
            c = peak[:, n] * math.exp(-(self.frame_period - pw) / tau)
        idx, into = _frame_position(self, delays, t, n_frames)
        level = np.take_along_axis(ext, idx, axis=1)
        c0 = np.take_along_axis(carry, idx, axis=1)
        p = np.take_along_axis(peak, idx, axis=1)
        during = np.maximum(level, c0 * np.exp(-into / tau))
        after = p * np.exp(-np.maximum(into - pw, 0.0) / tau)
        return np.where(into < pw, during, after)


@dataclass(frozen=True)
class BacklightBlink(DisplayModel):
    """LC panel lit by a square-wave backlight.

    The backlight is on while ``frac(t * blink_freq - phase) < duty``; it is
    global, so it is not delayed by raster scanning.
    """

    tau_rise: float = 4e-3
    tau_fall: float = 4e-3
    blink_freq: float = 180.0
    duty: float = 0.5
    phase: float = 0.0

    kind: ClassVar[str] = "backlight_blink"

    def __post_init__(self):
        super().__post_init__()
        _check_tau(tau_rise=self.tau_rise, tau_fall=self.tau_fall, blink_freq=self.blink_freq)
        if not 0 < self.duty <= 1:
            raise ConfigError(f"duty must be in (0, 1], got {self.duty!r}")
        if not 0 <= self.phase < 1:
            raise ConfigError(f"phase must be in [0, 1), got {self.phase!r}")

    @property
    def base(self) -> ExponentialLC:
        return ExponentialLC(self.frame_rate, self.scan_delay, self.tau_rise, self.tau_fall)

    def modulation_period(self):
        return 1.0 / self.blink_freq

    def backlight(self, t: np.ndarray) -> np.ndarray:
        if self.duty >= 1:
            return np.ones_like(t, dtype=float)
        frac = np.mod(t * self.blink_freq - self.phase + _EPS, 1.0)
        return (frac < self.duty).astype(float)

    def _render(self, levels, delays, t):
        return self.base._render(levels, delays, t) * self.backlight(t)[None, :]


@dataclass(frozen=True)
class BlackFrameInsertion(DisplayModel):
    """LC panel driven to black for the trailing ``black_fraction`` of
    every frame."""

    tau_rise: float = 4e-3
    tau_fall: float = 4e-3
    black_fraction: float = 0.5

    kind: ClassVar[str] = "black_frame_insertion"

    def __post_init__(self):
        super().__post_init__()
        _check_tau(tau_rise=self.tau_rise, tau_fall=self.tau_fall)
        if not 0 <= self.black_fraction < 1:
            raise ConfigError(f"black_fraction must be in [0, 1), got {self.black_fraction!r}")

    @property
    def base(self) -> ExponentialLC:
        return ExponentialLC(self.frame_rate, self.scan_delay, self.tau_rise, self.tau_fall)

    def modulation_period(self):
        return self.frame_period if self.black_fraction > 0 else None

    def _render(self, levels, delays, t):
        if self.black_fraction == 0:
            return self.base._render(levels, delays, t)
        offsets = [0.0, (1.0 - self.black_fraction) * self.frame_period]
        return _first_order(levels, delays, t, self, self.tau_rise, self.tau_fall, offsets, True)


@dataclass(frozen=True)
class PixelDrive:
    """Gray level shown by one pixel in each successive frame."""

    levels: tuple[float, ...]
    frame_rate: float = 60.0

    def __post_init__(self):
        levels = tuple(float(v) for v in np.atleast_1d(self.levels))
        if not levels:
            raise ConfigError("a pixel drive needs at least one frame")
        if any(not 0 <= v <= 1 for v in levels):
            raise BoundsError("gray levels must lie in [0, 1]")
        object.__setattr__(self, "levels", levels)

    def __len__(self):
        return len(self.levels)


def _check_rate(model: DisplayModel, sample_rate: float) -> None:
    if sample_rate < MIN_SAMPLES_PER_FRAME * model.frame_rate:
        raise ResolutionError(
            f"sample_rate {sample_rate:g} Hz is below {MIN_SAMPLES_PER_FRAME} x "
            f"frame_rate ({MIN_SAMPLES_PER_FRAME * model.frame_rate:g} Hz)"
        )


def n_samples(n_frames: int, frame_rate: float, sample_rate: float) -> int:
    return math.ceil(n_frames * sample_rate / frame_rate - _EPS)


def render_pixels(
    model: DisplayModel,
    levels: np.ndarray,
    sample_rate: float,
    t: np.ndarray | None = None,
    delays: np.ndarray | None = None,
) -> np.ndarray:
    """Luminance of several pixels at once.

    Args:
        levels: (pixels, frames) gray levels.
        t: sample instants; defaults to the full drive duration at
            ``sample_rate`` starting from 0.
        delays: per-pixel switching delay in seconds.

    Returns:
        (pixels, samples) array.
    """
    _check_rate(model, sample_rate)
    levels = np.atleast_2d(np.asarray(levels, dtype=float))
    if t is None:
        t = np.arange(n_samples(levels.shape[1], model.frame_rate, sample_rate)) / sample_rate
    if delays is None:
        delays = np.zeros(levels.shape[0])
    return model._render(levels, np.asarray(delays, dtype=float), np.asarray(t, dtype=float))


def pixel_response(
    model: DisplayModel,
    drive: PixelDrive,
    sample_rate: float,
    *,
    delay: float = 0.0,
) -> Waveform:
    """Luminance trace of one pixel over its whole drive sequence.

    ``delay`` shifts the pixel's frame boundaries (raster scan); see
    :meth:`DisplayModel.scan_offset`.
    """
    if drive.frame_rate != model.frame_rate:
        raise ConfigError(
            f"drive frame rate {drive.frame_rate:g} Hz does not match model {model.frame_rate:g} Hz"
        )
    y = render_pixels(model, np.asarray(drive.levels)[None, :], sample_rate, delays=np.array([delay]))
    return Waveform(y[0], sample_rate, 0.0)


def settle_frames(model: DisplayModel, residual: float = 1e-4) -> int:
    """Frames needed for a transition to settle within ``residual``."""
    if isinstance(model, Impulse):
        tau = model.decay_tau
    elif isinstance(model, (ExponentialLC, BacklightBlink, BlackFrameInsertion)):
        tau = max(model.tau_rise, model.tau_fall)
    else:
        return 0
    return math.ceil(-math.log(residual) * tau * model.frame_rate)


def lcrc(
    model: DisplayModel,
    from_level: float,
    to_level: float,
    sample_rate: float,
    *,
    settled_frames: int = 3,
) -> Waveform:
    """Response curve for a single gray-to-gray switch.

    The drive holds ``from_level`` long enough to settle plus
    ``settled_frames``, switches, then holds ``to_level`` the same way.
    ``meta['switch_time']`` records the switch instant.
    """
    for v in (from_level, to_level):
        if not 0 <= v <= 1:
            raise BoundsError(f"gray level {v!r} outside [0, 1]")
    n_side = settled_frames + settle_frames(model)
    drive = PixelDrive((from_level,) * n_side + (to_level,) * n_side, model.frame_rate)
    w = pixel_response(model, drive, sample_rate)
    return w.replace(
        meta={
            "switch_time": n_side * model.frame_period,
            "from_level": from_level,
            "to_level": to_level,
            "frame_rate": model.frame_rate,
        }
    )


def scrolling_levels(
    pattern_width_px: int,
    screen_width_px: int,
    velocity: int,
    n_frames: int,
    pixels,
    from_level: float = 0.0,
    to_level: float = 1.0,
) -> np.ndarray:
    """Drive levels of many pixels as a block scrolls right and wraps.

    At frame ``n`` the block's leading (right) edge sits at
    ``(n * velocity) mod screen_width_px`` and it covers the
    ``pattern_width_px`` pixels to the left of that edge.
    """
    if int(velocity) != velocity or velocity < 1:
        raise ConfigError(f"velocity must be a positive integer (PPF), got {velocity!r}")
    if not 0 < pattern_width_px < screen_width_px:
        raise ConfigError("pattern width must be positive and narrower than the screen")
    x = np.atleast_1d(np.asarray(pixels))
    if np.any((x < 0) | (x >= screen_width_px)):
        raise BoundsError(f"pixel outside screen [0, {screen_width_px})")
    lead = (np.arange(n_frames, dtype=np.int64) * int(velocity)) % screen_width_px
    inside = np.mod(lead[None, :] - 1 - x[:, None], screen_width_px) < pattern_width_px
    return np.where(inside, to_level, from_level)


def scrolling_drive(
    pattern_width_px: int,
    screen_width_px: int,
    velocity: int,
    n_frames: int,
    pixel_x: int,
    from_level: float = 0.0,
    to_level: float = 1.0,
    frame_rate: float = 60.0,
) -> PixelDrive:
    """What one pixel shows while the block scrolls past it."""
    levels = scrolling_levels(
        pattern_width_px, screen_width_px, velocity, n_frames, [pixel_x], from_level, to_level
    )
    return PixelDrive(tuple(levels[0]), frame_rate)


# -- configuration files ----------------------------------------------------

_KINDS = {
    cls.kind: cls
    for cls in (IdealHold, ExponentialLC, Impulse, BacklightBlink, BlackFrameInsertion)
}

# config key -> (field name, scale to SI)
_KEYS = {
    "frame_rate_hz": ("frame_rate", 1.0),
    "tau_rise_ms": ("tau_rise", 1e-3),
    "tau_fall_ms": ("tau_fall", 1e-3),
    "pulse_width_ms": ("pulse_width", 1e-3),
    "decay_tau_ms": ("decay_tau", 1e-3),
    "blink_freq_hz": ("blink_freq", 1.0),
    "duty": ("duty", 1.0),
    "phase": ("phase", 1.0),
    "black_fraction": ("black_fraction", 1.0),
}
CONFIG_KEYS = ("kind", *_KEYS, "scan_delay")


def model_from_config(values: Mapping[str, str], source: str | None = None) -> DisplayModel:
    kvconfig.check_keys(values, CONFIG_KEYS, source)
    if "kind" not in values:
        raise ConfigError("missing required key 'kind'")
    kind = values["kind"].strip().lower()
    if kind not in _KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(sorted(_KINDS))}")
    cls = _KINDS[kind]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, (name, scale) in _KEYS.items():
        if key not in values:
            continue
        if name not in names:
            raise ConfigError(f"key {key!r} does not apply to kind {kind!r}")
        kwargs[name] = kvconfig.as_float(values, key) * scale
    kwargs["scan_delay"] = kvconfig.as_bool(values, "scan_delay")
    return cls(**kwargs)


def model_to_config(model: DisplayModel) -> dict[str, str]:
    out = {"kind": model.kind}
    params = asdict(model)
    for key, (name, scale) in _KEYS.items():
        if name in params:
            out[key] = repr(params[name] / scale)
    out["scan_delay"] = "true" if model.scan_delay else "false"
    return out


def load_model_config(path: str | os.PathLike) -> DisplayModel:
    return model_from_config(kvconfig.read_kv(path), os.fspath(path))


BUILTIN_MODELS: dict[str, DisplayModel] = {
    "ideal-hold": IdealHold(),
    "lcd-fast": ExponentialLC(tau_rise=2e-3, tau_fall=2e-3),
    "lcd-slow": ExponentialLC(tau_rise=8e-3, tau_fall=8e-3),
    "lcd-blink": BacklightBlink(tau_rise=4e-3, tau_fall=4e-3, blink_freq=180.0, duty=0.5),
    "lcd-bfi": BlackFrameInsertion(tau_rise=4e-3, tau_fall=4e-3, black_fraction=0.5),
    "crt": Impulse(pulse_width=1e-4, decay_tau=1e-3),
}
