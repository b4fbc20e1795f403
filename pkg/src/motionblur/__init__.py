"""Display temporal response and motion-blur metrics.

Simulated pixel responses, moving-picture response curves and MPRT, a virtual
moving-block-width rig, and cross-method z-score comparison.
"""

from .analysis import MethodScores, RegressionFit, compare, linear_fit, orient, zscores
from .blur_sim import MotionMetrics, MprtResult, metrics_from_mprc, mprc, mprt, retinal_profile
from .display_models import (
    BUILTIN_MODELS,
    BacklightBlink,
    BlackFrameInsertion,
    DisplayModel,
    ExponentialLC,
    IdealHold,
    Impulse,
    PixelDrive,
    lcrc,
    pixel_response,
)
from .errors import ConfigError, DataError, MotionBlurError, NumericError
from .virtual_rig import MbwPoint, MbwSweep, RigConfig, measure_mbw, simulate_scroll, sweep
from .waveform import Waveform, moving_average_filter, threshold_crossings, width_between

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODELS",
    "BacklightBlink",
    "BlackFrameInsertion",
    "ConfigError",
    "DataError",
    "DisplayModel",
    "ExponentialLC",
    "IdealHold",
    "Impulse",
    "MbwPoint",
    "MbwSweep",
    "MethodScores",
    "MotionBlurError",
    "MotionMetrics",
    "MprtResult",
    "NumericError",
    "PixelDrive",
    "RegressionFit",
    "RigConfig",
    "Waveform",
    "compare",
    "lcrc",
    "linear_fit",
    "measure_mbw",
    "metrics_from_mprc",
    "moving_average_filter",
    "mprc",
    "mprt",
    "orient",
    "pixel_response",
    "retinal_profile",
    "simulate_scroll",
    "sweep",
    "threshold_crossings",
    "width_between",
    "zscores",
]
