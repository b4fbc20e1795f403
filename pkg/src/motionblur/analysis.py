"""Regression, standardization and cross-method ranking.

Scores from different methods (simulated edge time, perception
questionnaires, MBW slopes) live on different scales and point in different
directions. :func:`compare` orients every method so that higher means less
motion blur, converts each to z-scores and ranks the devices.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateRegressionError,
    DeviceSetMismatchError,
    ZeroVarianceError,
)

__all__ = [
    "RegressionFit",
    "MethodScores",
    "ComparisonTable",
    "linear_fit",
    "zscores",
    "orient",
    "compare",
    "spearman",
    "read_method_scores",
    "write_method_scores",
    "write_comparison_csv",
]

Orientation = Literal["higher", "lower"]
_ORIENTATION_ALIASES = {
    "higher": "higher",
    "higher-is-better": "higher",
    "lower": "lower",
    "lower-is-better": "lower",
}


@dataclass(frozen=True)
class RegressionFit:
    """``y = intercept_a + slope_b * x``."""

    intercept_a: float
    slope_b: float
    r_squared: float
    n_points: int

    def predict(self, x):
        return self.intercept_a + self.slope_b * np.asarray(x, dtype=float)


def linear_fit(points: Iterable[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares through ``(x, y)`` pairs.

    ``r_squared`` is ``1 - SS_res / SS_tot``; constant ``y`` data that the
    line reproduces exactly counts as a perfect fit.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DegenerateRegressionError("need at least 2 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if not np.all(np.isfinite(pts)):
        raise DataError("regression points must be finite")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateRegressionError("all x values are identical")
    b = float(dx @ (y - ym)) / sxx
    a = float(ym - b * xm)
    resid = y - (a + b * x)
    ss_res = float(resid @ resid)
    ss_tot = float((y - ym) @ (y - ym))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RegressionFit(a, b, r2, int(x.size))


def zscores(values: Sequence[float]) -> np.ndarray:
    """Standardize with the population (divide-by-n) standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ZeroVarianceError("need at least 2 values to standardize")
    d = x - x.mean()
    std = math.sqrt(float(d @ d) / x.size)
    if std == 0.0 or not np.all(np.isfinite(x)):
        raise ZeroVarianceError("values have zero variance")
    z = d / std
    return z - z.mean()


@dataclass(frozen=True)
class MethodScores:
    """Raw per-device values of one blur-assessment method."""

    method: str
    devices: tuple[str, ...]
    values: tuple[float, ...]
    orientation: Orientation

    def __post_init__(self):
        orientation = _ORIENTATION_ALIASES.get(str(self.orientation).lower())
        if orientation is None:
            raise ConfigError(
                f"method {self.method!r}: orientation must be higher or lower, got {self.orientation!r}"
            )
        devices = tuple(str(d) for d in self.devices)
        values = tuple(float(v) for v in self.values)
        if len(devices) != len(values):
            raise DataError(f"method {self.method!r}: {len(devices)} devices but {len(values)} values")
        if len(devices) < 2:
            raise DataError(f"method {self.method!r}: need at least 2 devices")
        if len(set(devices)) != len(devices):
            raise DataError(f"method {self.method!r}: duplicate device identifiers")
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"method {self.method!r}: values must be finite")
        object.__setattr__(self, "orientation", orientation)
        object.__setattr__(self, "devices", devices)
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.devices, self.values))

    def subset(self, devices: Iterable[str]) -> MethodScores:
        lookup = self.as_dict()
        keep = [d for d in self.devices if d in set(devices)]
        return MethodScores(self.method, tuple(keep), tuple(lookup[d] for d in keep), self.orientation)


def orient(scores: MethodScores) -> MethodScores:
    """Negate lower-is-better values so higher always means less blur."""
    if scores.orientation == "higher":
        return scores
    return MethodScores(scores.method, scores.devices, tuple(-v for v in scores.values), "higher")


def spearman(rank_a: Sequence[int], rank_b: Sequence[int]) -> float:
    """Spearman correlation of two untied rankings (permutations of 1..n)."""
    a = np.asarray(rank_a, dtype=float)
    b = np.asarray(rank_b, dtype=float)
    n = a.size
    if n < 2:
        raise DataError("need at least 2 ranked devices")
    return 1.0 - 6.0 * float(((a - b) ** 2).sum()) / (n * (n * n - 1))


@dataclass(frozen=True)
class ComparisonTable:
    """Oriented z-scores and ranks (1 = least blur) for every method.

    Columns are keyed by method name; row order follows ``devices``, which
    is sorted. ``ties`` lists groups of devices sharing a value within a
    method; their order within the group falls back to device identifier.
    """

    devices: tuple[str, ...]
    methods: tuple[str, ...]
    z: Mapping[str, tuple[float, ...]]
    ranks: Mapping[str, tuple[int, ...]]
    ties: Mapping[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict)
    excluded: tuple[str, ...] = ()

    def rank_order(self, method: str) -> list[str]:
        """Devices from least to most blurred according to ``method``."""
        return [d for _, d in sorted(zip(self.ranks[method], self.devices))]

    def spearman(self) -> dict[tuple[str, str], float]:
        return {
            (a, b): spearman(self.ranks[a], self.ranks[b])
            for a, b in itertools.combinations(self.methods, 2)
        }


def _rank(devices: Sequence[str], values: Sequence[float]):
    order = sorted(range(len(devices)), key=lambda i: (-values[i], devices[i]))
    ranks = [0] * len(devices)
    for r, i in enumerate(order, start=1):
        ranks[i] = r
    ties = []
    for _, group in itertools.groupby(order, key=lambda i: values[i]):
        members = tuple(devices[i] for i in group)
        if len(members) > 1:
            ties.append(members)
    return tuple(ranks), tuple(ties)


def compare(methods: Sequence[MethodScores], *, common_only: bool = False) -> ComparisonTable:
    """Orient, standardize and rank every method over a shared device set.

    With ``common_only`` the devices present in every method are used and
    the rest are reported in ``excluded``; otherwise any mismatch is an
    error naming the devices not shared by all methods.
    """
    if not methods:
        raise ConfigError("at least one method is required")
    names = [m.method for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError("method names must be unique")
    sets = [set(m.devices) for m in methods]
    union = set().union(*sets)
    common = set.intersection(*sets)
    if common != union:
        if not common_only:
            raise DeviceSetMismatchError(union - common)
        if len(common) < 2:
            raise DataError("fewer than 2 devices are shared by every method")
    devices = tuple(sorted(common))
    z, ranks, ties = {}, {}, {}
    for m in sorted(methods, key=lambda m: m.method):
        lookup = orient(m).as_dict()
        vals = [lookup[d] for d in devices]
        z[m.method] = tuple(float(v) for v in zscores(vals))
        ranks[m.method], ties[m.method] = _rank(devices, vals)
    return ComparisonTable(
        devices, tuple(sorted(names)), z, ranks, ties, tuple(sorted(union - common))
    )


_HEADER_RE = re.compile(r"^#\s*method\s*=\s*(?P<method>\S+)\s+orientation\s*=\s*(?P<orientation>\S+)\s*$")


def read_method_scores(source: str | os.PathLike | IO[str]) -> MethodScores:
    """Parse a scores file::

        # method=<name> orientation=<higher|lower>
        device,value
        LCD01,12.5
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_method_scores(fh)
    lines = source.read().splitlines()
    if not lines:
        raise DataError("empty scores file")
    m = _HEADER_RE.match(lines[0].strip())
    if not m:
        raise DataError("scores file must start with '# method=<name> orientation=<higher|lower>'")
    rows = list(csv.reader(lines[1:]))
    if not rows or [c.strip() for c in rows[0]] != ["device", "value"]:
        raise DataError("expected header 'device,value' on line 2")
    devices, values = [], []
    for line_no, row in enumerate(rows[1:], start=3):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise DataError(f"expected 2 columns at row {line_no}")
        try:
            values.append(float(row[1]))
        except ValueError:
            raise DataError(f"non-numeric value at row {line_no}") from None
        devices.append(row[0].strip())
    return MethodScores(m["method"], tuple(devices), tuple(values), m["orientation"])


def write_method_scores(scores: MethodScores, dest: str | os.PathLike | IO[str]) -> None:
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            write_method_scores(scores, fh)
        return
    dest.write(f"# method={scores.method} orientation={scores.orientation}\n")
    dest.write("device,value\n")
    for d, v in zip(scores.devices, scores.values):
        dest.write(f"{d},{v!r}\n")


def write_comparison_csv(table: ComparisonTable, dest: str | os.PathLike | IO[str]) -> None:
    """``device,<m>_z...,<m>_rank...`` followed by ``#`` lines for ties,
    Spearman correlations and excluded devices."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="") as fh:
            write_comparison_csv(table, fh)
        return
    buf = io.StringIO()
    cols = [f"{m}_z" for m in table.methods] + [f"{m}_rank" for m in table.methods]
    buf.write(",".join(["device", *cols]) + "\n")
    for i, d in enumerate(table.devices):
        zs = [repr(table.z[m][i]) for m in table.methods]
        rs = [str(table.ranks[m][i]) for m in table.methods]
        buf.write(",".join([d, *zs, *rs]) + "\n")
    for m in table.methods:
        for group in table.ties.get(m, ()):
            buf.write(f"# tie {m}: {';'.join(group)}\n")
    for (a, b), rho in table.spearman().items():
        buf.write(f"# spearman {a},{b}={rho!r}\n")
    if table.excluded:
        buf.write(f"# excluded={';'.join(table.excluded)}\n")
    dest.write(buf.getvalue())
