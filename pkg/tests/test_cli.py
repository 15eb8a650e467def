import subprocess
import sys

import numpy as np
import pytest

from pixelps.cli import main
from pixelps.formats import read_pxnm, read_pxom

from conftest import make_merl_data, write_merl_file


def run_cli(args):
    """In-process invocation; returns (exit_status, captured print output)."""
    return main(args)


class TestGenerateCommand:
    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.pxom", tmp_path / "b.pxom"
        base = ["generate", "--preset", "sparse", "--count", "50",
                "--seed", "7", "--workers", "2"]
        assert run_cli(base + ["--out", str(a)]) == 0
        assert run_cli(base + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_count_zero_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli(["generate", "--count", "0", "--out", str(tmp_path / "x.pxom")])
        assert exc.value.code == 2

    def test_config_file_with_overrides(self, tmp_path):
        cfg_path = tmp_path / "gen.cfg"
        cfg_path.write_text("d = 16\nlights_min = 10\nlights_max = 10\n"
                            "light_max_elevation_deg = 45\n")
        out = tmp_path / "c.pxom"
        assert run_cli(["generate", "--count", "5", "--seed", "1",
                        "--config", str(cfg_path), "--out", str(out)]) == 0
        maps, _ = read_pxom(out)
        assert maps.shape == (5, 16, 16, 4)

    def test_stats_csv(self, tmp_path):
        out = tmp_path / "d.pxom"
        stats = tmp_path / "stats.csv"
        assert run_cli(["generate", "--preset", "sparse", "--count", "20",
                        "--out", str(out), "--stats-out", str(stats)]) == 0
        text = stats.read_text()
        assert "records_per_s" in text and "frac_ambient" in text

    def test_merl_dir_flag(self, tmp_path, merl_dir):
        out = tmp_path / "e.pxom"
        assert run_cli(["generate", "--preset", "sparse", "--count", "30",
                        "--seed", "3", "--merl-dir", str(merl_dir),
                        "--out", str(out)]) == 0
        maps, _ = read_pxom(out)
        assert maps.shape[0] == 30


class TestSphereSolveEvaluatePipeline:
    def test_npz_round_trip(self, tmp_path):
        sphere = tmp_path / "sphere"
        assert run_cli(["render-sphere", "--resolution", "48",
                        "--random-lights", "32", "--uniform-brightness",
                        "--seed", "5", "--out-dir", str(sphere),
                        "--format", "npz"]) == 0
        pred = tmp_path / "pred.pxnm"
        assert run_cli(["solve-baseline", "--stack", str(sphere / "stack.npz"),
                        "--out", str(pred)]) == 0
        prefix = str(tmp_path / "report")
        assert run_cli(["evaluate", str(pred), str(sphere / "gt_normals.pxnm"),
                        "--out-prefix", prefix]) == 0
        metrics = (tmp_path / "report_metrics.csv").read_text()
        mae = float([row for row in metrics.splitlines()
                     if row.startswith("mae_deg")][0].split(",")[1])
        assert mae < 0.01
        assert (tmp_path / "report_errmap.png").exists()
        assert (tmp_path / "report_errors.csv").exists()

    def test_png_stack_pipeline(self, tmp_path):
        sphere = tmp_path / "sphere_png"
        assert run_cli(["render-sphere", "--resolution", "32",
                        "--random-lights", "16", "--uniform-brightness",
                        "--seed", "6", "--out-dir", str(sphere),
                        "--format", "png"]) == 0
        assert (sphere / "light_directions.txt").exists()
        assert (sphere / "mask.png").exists()
        pred = tmp_path / "pred.pxnm"
        assert run_cli(["solve-baseline", "--stack", str(sphere),
                        "--out", str(pred)]) == 0
        normals, mask = read_pxnm(pred)
        # 16-bit PNG rounding keeps the baseline within a small tolerance
        from pixelps.formats import read_pxnm as _r
        gt, gt_mask = _r(sphere / "gt_normals.pxnm")
        from pixelps.geom import angular_error
        both = mask & gt_mask
        assert angular_error(normals[both], gt[both]).mean() < 0.1

    def test_render_sphere_byte_idempotent(self, tmp_path):
        # identical inputs and seeds give byte-identical stack files
        args = ["render-sphere", "--resolution", "16", "--random-lights", "8",
                "--seed", "4", "--format", "npz"]
        run_cli(args + ["--out-dir", str(tmp_path / "a")])
        run_cli(args + ["--out-dir", str(tmp_path / "b")])
        for name in ("stack.npz", "gt_normals.pxnm"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_evaluate_identical_zero(self, tmp_path, capsys):
        sphere = tmp_path / "sphere2"
        run_cli(["render-sphere", "--resolution", "16", "--random-lights", "8",
                 "--out-dir", str(sphere), "--format", "npz", "--seed", "1"])
        gt = str(sphere / "gt_normals.pxnm")
        assert run_cli(["evaluate", gt, gt]) == 0
        out = capsys.readouterr().out
        assert "MAE 0.000" in out


class TestExtractCommand:
    def test_extract_pixels(self, tmp_path):
        sphere = tmp_path / "sphere"
        run_cli(["render-sphere", "--resolution", "17", "--random-lights", "8",
                 "--out-dir", str(sphere), "--format", "npz", "--seed", "2"])
        out = tmp_path / "maps.pxom"
        assert run_cli(["extract-maps", "--stack", str(sphere / "stack.npz"),
                        "--pixels", "8,8;9,9", "--out", str(out)]) == 0
        maps, normals = read_pxom(out)
        assert maps.shape == (2, 32, 32, 4)
        assert np.all(normals == 0)

    def test_extract_all_masked(self, tmp_path):
        sphere = tmp_path / "sphere"
        run_cli(["render-sphere", "--resolution", "9", "--random-lights", "8",
                 "--out-dir", str(sphere), "--format", "npz", "--seed", "3"])
        out = tmp_path / "maps.pxom"
        assert run_cli(["extract-maps", "--stack", str(sphere / "stack.npz"),
                        "--out", str(out)]) == 0
        maps, _ = read_pxom(out)
        from pixelps.pstereo import load_stack_npz
        stack = load_stack_npz(sphere / "stack.npz")
        assert maps.shape[0] == int(stack.mask.sum())


class TestMerlInfoCommand:
    def test_summary(self, tmp_path, capsys):
        data = make_merl_data(seed=5)
        path = tmp_path / "mat.binary"
        write_merl_file(path, data)
        assert run_cli(["merl-info", str(path)]) == 0
        out = capsys.readouterr().out
        assert "(90, 90, 180)" in out and "invalid bins" in out

    def test_data_error_exit_one(self, tmp_path, capsys):
        bad = tmp_path / "broken.binary"
        bad.write_bytes(b"\0" * 32)
        assert run_cli(["merl-info", str(bad)]) == 1
        assert "error" in capsys.readouterr().err


class TestProcessLevel:
    def test_console_script_help(self):
        proc = subprocess.run([sys.executable, "-m", "pixelps.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "generate" in proc.stdout

    def test_usage_error_exit_two(self):
        proc = subprocess.run([sys.executable, "-m", "pixelps.cli",
                               "generate", "--count", "0", "--out", "/tmp/x.pxom"],
                              capture_output=True, text=True)
        assert proc.returncode == 2

    def test_unknown_flag_exit_two(self):
        proc = subprocess.run([sys.executable, "-m", "pixelps.cli",
                               "generate", "--frobnicate", "1"],
                              capture_output=True, text=True)
        assert proc.returncode == 2
