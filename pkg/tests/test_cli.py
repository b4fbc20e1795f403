import csv
import io
import json
import math

import numpy as np
import pytest

from motionblur.cli import main, parse_transitions, parse_velocities
from motionblur.errors import ConfigError
from motionblur.waveform import Waveform, read_waveform_csv, write_waveform_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def table(text):
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(rows))))


@pytest.fixture
def lc4(tmp_path):
    path = tmp_path / "lc4.cfg"
    path.write_text("kind = exponential_lc\ntau_rise_ms = 4\ntau_fall_ms = 4\n")
    return path


@pytest.fixture
def point_rig(tmp_path):
    path = tmp_path / "point.cfg"
    path.write_text("aperture_px = 1\n")
    return path


class TestParsers:
    def test_transitions(self):
        assert parse_transitions("0:1, 1->0") == [(0.0, 1.0), (1.0, 0.0)]
        assert len(parse_transitions("all")) == 20

    @pytest.mark.parametrize("text", ["", " , ", "0:1:2", "a:b", "0:2"])
    def test_bad_transitions(self, text):
        with pytest.raises(ConfigError):
            parse_transitions(text)

    def test_velocities(self):
        assert parse_velocities("5-20") == list(range(5, 21))
        assert parse_velocities("12,5-7,6") == [5, 6, 7, 12]

    @pytest.mark.parametrize("text", ["", "9-3", "x"])
    def test_bad_velocities(self, text):
        with pytest.raises(ConfigError):
            parse_velocities(text)


class TestLcrc:
    def test_ideal_hold_step(self, capsys):
        code, out, _ = run(capsys, "lcrc", "builtin:ideal-hold")
        assert code == 0
        w = read_waveform_csv(io.StringIO(out))
        assert set(np.unique(w.samples)) == {0.0, 1.0}
        assert np.all(np.diff(w.samples) >= 0)

    def test_config_rise_time(self, capsys, lc4):
        code, out, _ = run(capsys, "lcrc", lc4)
        assert code == 0
        w = read_waveform_csv(io.StringIO(out))
        t10, t90 = (w.times[np.argmax(w.samples >= lv)] for lv in (0.1, 0.9))
        assert t90 - t10 == pytest.approx(8.789e-3, abs=2 / 20_000)

    def test_unknown_key_named(self, capsys, tmp_path):
        path = tmp_path / "typo.cfg"
        path.write_text("kind = exponential_lc\ntua_rise_ms = 4\n")
        code, _, err = run(capsys, "lcrc", path)
        assert code == 2
        assert "tua_rise_ms" in err

    def test_unknown_builtin(self, capsys):
        code, _, err = run(capsys, "lcrc", "builtin:plasma")
        assert code == 2 and "plasma" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "ingest", tmp_path / "absent.csv")
        assert code == 3


class TestMprt:
    def test_ideal_hold(self, capsys):
        code, out, err = run(capsys, "mprt", "builtin:ideal-hold")
        assert code == 0
        mprt_ms = float(err.strip().split("=")[1])
        assert mprt_ms == pytest.approx(13.333, rel=5e-3)
        rows = table(out)
        assert [(r["from_gray"], r["to_gray"]) for r in rows] == [("0.0", "1.0"), ("1.0", "0.0")]

    def test_empty_transitions(self, capsys):
        code, _, err = run(capsys, "mprt", "builtin:ideal-hold", "--transitions", "")
        assert code == 2 and "empty" in err

    def test_all_transitions(self, capsys):
        code, out, _ = run(capsys, "--quiet", "mprt", "builtin:lcd-fast", "--transitions", "all")
        assert code == 0
        assert len(table(out)) == 20

    def test_no_edge_is_numeric_error(self, capsys):
        code, _, err = run(capsys, "mprt", "builtin:ideal-hold", "--transitions", "0.5:0.5")
        assert code == 4 and "0.5->0.5" in err

    def test_lcrc_needs_frame_rate(self, capsys, tmp_path):
        path = tmp_path / "c.csv"
        write_waveform_csv(Waveform(np.zeros(10), 1000.0), path)
        code, _, _ = run(capsys, "mprt", "--lcrc", path)
        assert code == 2


class TestMbwSweep:
    def test_ideal_slope_small(self, capsys, point_rig):
        code, out, _ = run(capsys, "mbw-sweep", "builtin:ideal-hold", "--rig", point_rig)
        assert code == 0
        assert len(table(out)) == 16
        fit = dict(kv.split("=") for kv in out.splitlines()[-1][2:].split())
        assert abs(float(fit["b"])) <= 1.0

    def test_slow_lc_positive_slope(self, capsys, point_rig):
        code, out, _ = run(capsys, "mbw-sweep", "builtin:lcd-slow", "--rig", point_rig, "--velocities", "5,10,15,20")
        assert code == 0
        fit = dict(kv.split("=") for kv in out.splitlines()[-1][2:].split())
        assert float(fit["b"]) > 0

    def test_filter_options_exclusive(self, capsys):
        code, _, _ = run(
            capsys, "mbw-sweep", "builtin:crt", "--matched-filter", "--filter-window-ms", "2", "--velocities", "8"
        )
        assert code == 2

    def test_bad_velocity_named(self, capsys, point_rig):
        code, _, err = run(capsys, "mbw-sweep", "builtin:ideal-hold", "--rig", point_rig, "--velocities", "8,600")
        assert code == 2 and "v=600" in err


def write_scores(path, method, orientation, rows):
    path.write_text(f"# method={method} orientation={orientation}\ndevice,value\n" + "".join(f"{d},{v}\n" for d, v in rows))
    return path


class TestCompare:
    def test_table(self, capsys, tmp_path):
        a = write_scores(tmp_path / "a.csv", "mbw_slope", "lower", [("A", 0.1), ("B", 0.5), ("C", 0.3)])
        b = write_scores(tmp_path / "b.csv", "score", "higher", [("A", 4.0), ("B", 1.0), ("C", 2.0)])
        code, out, err = run(capsys, "compare", a, b)
        assert code == 0
        rows = {r["device"]: r for r in table(out)}
        assert [rows[d]["mbw_slope_rank"] for d in "ABC"] == ["1", "3", "2"]
        assert [rows[d]["score_rank"] for d in "ABC"] == ["1", "3", "2"]
        assert "spearman mbw_slope,score=1" in err

    def test_mismatch(self, capsys, tmp_path):
        a = write_scores(tmp_path / "a.csv", "m1", "lower", [("A", 1), ("B", 2), ("C", 3)])
        b = write_scores(tmp_path / "b.csv", "m2", "lower", [("A", 1), ("B", 2), ("D", 3)])
        code, _, err = run(capsys, "compare", a, b)
        assert code == 3 and "C" in err and "D" in err
        code, out, _ = run(capsys, "compare", a, b, "--common-only")
        assert code == 0 and "# excluded=C;D" in out

    def test_bad_row(self, capsys, tmp_path):
        a = tmp_path / "bad.csv"
        a.write_text("# method=m orientation=lower\ndevice,value\nA,1\nB,oops\n")
        code, _, err = run(capsys, "compare", a)
        assert code == 3 and "row 4" in err


class TestIngest:
    def test_ripple_removed(self, capsys, tmp_path):
        rate = 18_000.0  # 100 samples per ripple period
        t = np.arange(int(0.3 * rate)) / rate
        y = (t >= 0.1).astype(float) * (1 + 0.3 * np.sin(2 * math.pi * 180 * t))
        src = tmp_path / "trace.csv"
        write_waveform_csv(Waveform(y, rate), src)
        code, out, _ = run(capsys, "ingest", src, "--filter-window-ms", 1e3 / 180)
        assert code == 0
        w = read_waveform_csv(io.StringIO(out))
        settled = w.samples[w.times > 0.12]
        assert np.ptp(settled) <= 0.01
        assert w.samples.min() == 0.0 and w.samples.max() == 1.0

    def test_passthrough(self, capsys, tmp_path):
        src = tmp_path / "clean.csv"
        write_waveform_csv(Waveform(np.array([0.0, 0.25, 1.0, 0.5]), 100.0), src)
        code, out, _ = run(capsys, "ingest", src)
        assert code == 0
        assert out == src.read_text()

    def test_gap_reports_row(self, capsys, tmp_path):
        src = tmp_path / "gap.csv"
        src.write_text("time_s,luminance\n0.0,0\n0.001,0\n0.003,1\n0.004,1\n")
        code, _, err = run(capsys, "ingest", src)
        assert code == 3 and "4" in err


class TestDeterminism:
    def test_rerun_byte_identical(self, capsys, tmp_path):
        outputs = []
        for k in range(2):
            dest = tmp_path / f"run{k}" / "sweep.csv"
            dest.parent.mkdir()
            code, _, _ = run(capsys, "mbw-sweep", "builtin:crt", "--velocities", "6,9", "--out", dest, "--quiet")
            assert code == 0
            outputs.append((dest.read_bytes(), (tmp_path / f"run{k}" / "sweep.csv.manifest.json").read_bytes()))
        assert outputs[0] == outputs[1]

    def test_manifest_contents(self, capsys, tmp_path, lc4):
        dest = tmp_path / "lcrc.csv"
        code, out, _ = run(capsys, "lcrc", lc4, "--out", dest)
        assert code == 0 and out == ""
        manifest = json.loads((tmp_path / "lcrc.csv.manifest.json").read_text())
        assert manifest["command"] == "lcrc"
        assert manifest["config_paths"] == [str(lc4)]
        assert manifest["parameters"]["model"]["tau_rise_ms"] == "4.0"
        assert manifest["output"] == "lcrc.csv"

    def test_global_flags_after_subcommand(self, capsys, tmp_path):
        dest = tmp_path / "m.csv"
        code, out, _ = run(capsys, "mprt", "builtin:ideal-hold", "--out", dest, "--quiet")
        assert code == 0 and out == "" and dest.exists()
