"""Command-line front end.

Subcommands ``lcrc``, ``mprt``, ``mbw-sweep``, ``compare`` and ``ingest``
each write one CSV table, to ``--out`` or to stdout. With ``--out`` a
``<out>.manifest.json`` sidecar records the inputs and resolved parameters.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numeric error (no edge, no passage, zero variance).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import itertools
import json
import os
import sys
from dataclasses import asdict
from typing import Callable, Sequence

from . import __version__
from .analysis import compare, read_method_scores, write_comparison_csv
from .blur_sim import DEFAULT_TRANSITIONS, metrics_from_mprc, mprc, mprt, settled_levels
from .display_models import BUILTIN_MODELS, DisplayModel, lcrc, load_model_config, model_to_config
from .errors import ConfigError, DataError, MotionBlurError
from .virtual_rig import SWEEP_CSV_HEADER, RigConfig, load_rig_config, sweep
from .waveform import moving_average_filter, normalize, read_waveform_csv, write_waveform_csv

MPRT_CSV_HEADER = ("from_gray", "to_gray", "velocity_ppf", "bew_px", "n_bew_frames", "n_bet_ms")
GTG_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0)
BUILTIN_PREFIX = "builtin:"


def parse_transitions(text: str) -> list[tuple[float, float]]:
    """``"0:1,1:0"`` (``->`` also accepted) or ``all`` for the 5-level GtG set."""
    text = text.strip()
    if text.lower() == "all":
        return [(a, b) for a, b in itertools.product(GTG_LEVELS, repeat=2) if a != b]
    pairs = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.replace("->", ":").split(":")
        if len(parts) != 2:
            raise ConfigError(f"bad transition {item!r}; expected FROM:TO")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"bad transition {item!r}; levels must be numbers") from None
        if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
            raise ConfigError(f"transition {item!r}: levels must lie in [0, 1]")
        pairs.append((a, b))
    if not pairs:
        raise ConfigError("transition list is empty")
    return pairs


def parse_velocities(text: str) -> list[int]:
    """``"5-20"``, ``"5,10,20"`` or a mix such as ``"5-8,12"``."""
    out: set[int] = set()
    for item in filter(None, (s.strip() for s in text.split(","))):
        lo, sep, hi = item.partition("-")
        try:
            a = int(lo)
            b = int(hi) if sep else a
        except ValueError:
            raise ConfigError(f"bad velocity {item!r}; expected an integer or a range A-B") from None
        if b < a:
            raise ConfigError(f"empty velocity range {item!r}")
        out.update(range(a, b + 1))
    if not out:
        raise ConfigError("velocity list is empty")
    return sorted(out)


def resolve_model(text: str) -> DisplayModel:
    if text.startswith(BUILTIN_PREFIX):
        name = text[len(BUILTIN_PREFIX) :]
        if name not in BUILTIN_MODELS:
            raise ConfigError(f"unknown built-in model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
        return BUILTIN_MODELS[name]
    return load_model_config(text)


def _read_input(reader: Callable, path: str):
    try:
        return reader(path)
    except OSError as exc:
        raise DataError(f"cannot read {path!r}: {exc.strerror}") from None


def _csv_line(values) -> str:
    return ",".join(v if isinstance(v, str) else repr(v) for v in values) + "\n"


class Output:
    """Single-writer sink for one command's table and its manifest."""

    def __init__(self, args: argparse.Namespace):
        self.path = args.out
        self.quiet = args.quiet
        self.buf = io.StringIO()
        self.inputs: list[str] = []
        self.params: dict[str, object] = {}

    def summary(self, line: str) -> None:
        if self.quiet:
            return
        print(line, file=sys.stdout if self.path else sys.stderr)

    def finish(self, command: str) -> None:
        text = self.buf.getvalue()
        if self.path is None:
            sys.stdout.write(text)
            return
        with open(self.path, "w", newline="") as fh:
            fh.write(text)
        manifest = {
            "command": command,
            "config_paths": self.inputs,
            "parameters": self.params,
            "toolkit_version": __version__,
            "seed": "n/a",
            "output": os.path.basename(self.path),
            "output_sha256": hashlib.sha256(text.encode()).hexdigest(),
        }
        with open(f"{self.path}.manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _model_params(text: str, model: DisplayModel, out: Output) -> None:
    if not text.startswith(BUILTIN_PREFIX):
        out.inputs.append(text)
    out.params["model"] = {"source": text, **model_to_config(model)}


def cmd_lcrc(args, out: Output) -> None:
    model = resolve_model(args.model)
    _model_params(args.model, model, out)
    out.params.update(from_gray=args.from_gray, to_gray=args.to_gray, sample_rate_hz=args.sample_rate)
    write_waveform_csv(lcrc(model, args.from_gray, args.to_gray, args.sample_rate), out.buf)


def cmd_mprt(args, out: Output) -> None:
    v = args.velocity
    out.params.update(velocity_ppf=v)
    if args.lcrc:
        if args.frame_rate is None:
            raise ConfigError("--lcrc needs --frame-rate")
        curve = _read_input(read_waveform_csv, args.lcrc)
        out.inputs.append(args.lcrc)
        out.params.update(frame_rate_hz=args.frame_rate, prefilter_window_ms=args.prefilter_window_ms)
        if args.prefilter_window_ms is not None:
            curve = moving_average_filter(curve, args.prefilter_window_ms * 1e-3)
        period = 1.0 / args.frame_rate
        m = metrics_from_mprc(mprc(curve, period), v, period)
        start, end = settled_levels(curve, period)
        rows = [((start, end), m)]
        mprt_ms = m.n_bet_ms
    else:
        if args.model is None:
            raise ConfigError("give a model or --lcrc")
        model = resolve_model(args.model)
        _model_params(args.model, model, out)
        pairs = parse_transitions(args.transitions) if args.transitions is not None else list(DEFAULT_TRANSITIONS)
        window = None if args.prefilter_window_ms is None else args.prefilter_window_ms * 1e-3
        out.params.update(
            transitions=[list(p) for p in sorted(pairs)],
            sample_rate_hz=args.sample_rate,
            prefilter_window_ms=args.prefilter_window_ms,
        )
        result = mprt(model, pairs, v, args.sample_rate, prefilter_window=window)
        rows = sorted(result.per_transition.items())
        mprt_ms = result.mprt_ms
    out.buf.write(",".join(MPRT_CSV_HEADER) + "\n")
    for (a, b), m in rows:
        out.buf.write(_csv_line([float(a), float(b), m.velocity_ppf, m.bew_px, m.n_bew_frames, m.n_bet_ms]))
    out.summary(f"mprt_ms={mprt_ms!r}")


def cmd_mbw_sweep(args, out: Output) -> None:
    model = resolve_model(args.model)
    _model_params(args.model, model, out)
    if args.rig:
        rig = load_rig_config(args.rig)
        out.inputs.append(args.rig)
    else:
        rig = RigConfig(frame_rate=model.frame_rate)
    velocities = parse_velocities(args.velocities)
    if args.matched_filter and args.filter_window_ms is not None:
        raise ConfigError("--matched-filter and --filter-window-ms are exclusive")
    window = args.filter_window_ms * 1e-3 if args.filter_window_ms is not None else None
    if args.matched_filter:
        window = model.modulation_period()
    out.params.update(rig=asdict(rig), velocities=velocities, filter_window_s=window)
    result = sweep(rig, model, velocities, filter_window=window)
    fit = result.fit()
    out.buf.write(",".join(SWEEP_CSV_HEADER) + "\n")
    for p in result.points:
        out.buf.write(_csv_line(p.as_row()))
    out.buf.write(f"# model={result.model_id}\n")
    out.buf.write(f"# a={fit.intercept_a!r} b={fit.slope_b!r} r2={fit.r_squared!r}\n")
    out.summary(f"a={fit.intercept_a:.6g} b={fit.slope_b:.6g} r2={fit.r_squared:.6g}")


def cmd_compare(args, out: Output) -> None:
    methods = [_read_input(read_method_scores, path) for path in args.scores]
    out.inputs.extend(args.scores)
    out.params.update(common_only=args.common_only)
    table = compare(methods, common_only=args.common_only)
    write_comparison_csv(table, out.buf)
    for (a, b), rho in table.spearman().items():
        out.summary(f"spearman {a},{b}={rho:.6g}")


def cmd_ingest(args, out: Output) -> None:
    w = _read_input(read_waveform_csv, args.waveform)
    out.inputs.append(args.waveform)
    out.params.update(filter_window_ms=args.filter_window_ms)
    if args.filter_window_ms is not None:
        w = moving_average_filter(w, args.filter_window_ms * 1e-3)
    write_waveform_csv(normalize(w, float(w.samples.min()), float(w.samples.max())), out.buf)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output CSV path (default: stdout)")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="suppress summaries")

    parser = argparse.ArgumentParser(prog="motionblur", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    parser.add_argument("--quiet", action="store_true", default=False, help="suppress summaries")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    model_help = "display model config file or builtin:NAME"

    p = sub.add_parser("lcrc", parents=[common], help="pixel response to one gray transition")
    p.add_argument("model", help=model_help)
    p.add_argument("--from", dest="from_gray", type=float, default=0.0)
    p.add_argument("--to", dest="to_gray", type=float, default=1.0)
    p.add_argument("--sample-rate", type=float, default=20_000.0)
    p.set_defaults(func=cmd_lcrc)

    p = sub.add_parser("mprt", parents=[common], help="MPRC metrics and MPRT")
    p.add_argument("model", nargs="?", help=model_help)
    p.add_argument("--transitions", help="FROM:TO pairs separated by commas, or 'all'")
    p.add_argument("--velocity", type=int, default=10, help="pixels per frame")
    p.add_argument("--sample-rate", type=float, default=20_000.0)
    p.add_argument("--prefilter-window-ms", type=float)
    p.add_argument("--lcrc", help="use a response curve CSV instead of a model")
    p.add_argument("--frame-rate", type=float, help="frame rate of the --lcrc curve")
    p.set_defaults(func=cmd_mprt)

    p = sub.add_parser("mbw-sweep", parents=[common], help="virtual rig MBW over velocities")
    p.add_argument("model", help=model_help)
    p.add_argument("--rig", help="rig config file")
    p.add_argument("--velocities", default="5-20")
    p.add_argument("--filter-window-ms", type=float)
    p.add_argument("--matched-filter", action="store_true", help="filter at the model's modulation period")
    p.set_defaults(func=cmd_mbw_sweep)

    p = sub.add_parser("compare", parents=[common], help="z-score and rank method score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--common-only", action="store_true", help="drop devices missing from any method")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("ingest", parents=[common], help="normalize (and filter) a waveform CSV")
    p.add_argument("waveform")
    p.add_argument("--filter-window-ms", type=float)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(args)
    try:
        args.func(args, out)
        out.finish(args.command)
    except MotionBlurError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
