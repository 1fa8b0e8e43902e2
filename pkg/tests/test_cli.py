import csv
import json

import pytest

from boxloss.cli import main


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def bench_dir(tmp_path):
    out = tmp_path / "bench"
    assert main(["bench", "--loss", "siou", "--loss", "ciou", "--points", "6", "--seed", "7", "--iters", "30",
                 "--out", str(out)]) == 0
    return out


class TestBench:
    def test_outputs(self, bench_dir):
        names = {p.name for p in bench_dir.iterdir()}
        assert {"series_siou.csv", "series_ciou.csv", "points_siou.csv", "comparison.csv", "manifest.json"} <= names
        m = _manifest(bench_dir)
        assert m["case_count"] == 6 * 343
        assert m["seeds"] == {"seed": 7}
        assert sorted(m["outputs"]) == sorted(str(bench_dir / n) for n in names if n != "manifest.json")
        rows = _read_csv(bench_dir / "comparison.csv")
        assert rows[0] == ["iteration", "E_siou", "E_ciou"] and len(rows) == 32

    def test_rerun_is_bitwise_identical(self, bench_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["bench", "--loss", "siou", "--loss", "ciou", "--points", "6", "--seed", "7", "--iters", "30",
                     "--out", str(again), "--threads", "3"]) == 0
        for name in ("series_siou.csv", "series_ciou.csv", "points_ciou.csv", "comparison.csv"):
            assert (again / name).read_bytes() == (bench_dir / name).read_bytes()

    def test_replay_from_manifest(self, bench_dir, tmp_path):
        argv = _manifest(bench_dir)["argv"]
        replay = tmp_path / "replay"
        i = argv.index("--out")
        assert main([*argv[:i + 1], str(replay), *argv[i + 2:]]) == 0
        assert (replay / "comparison.csv").read_bytes() == (bench_dir / "comparison.csv").read_bytes()

    def test_default_case_count_dry_run(self, tmp_path):
        assert main(["bench", "--loss", "siou", "--points", "5000", "--dry-run", "--out", str(tmp_path)]) == 0
        assert _manifest(tmp_path)["case_count"] == 1_715_000

    @pytest.mark.parametrize("argv", [["--points", "0"], ["--loss", "eiou"], ["--theta", "9"], ["--bogus"]])
    def test_usage_errors(self, argv, tmp_path, capsys):
        assert main(["bench", *argv, "--out", str(tmp_path)]) == 2
        assert "usage" in capsys.readouterr().err

    def test_config_file_precedence(self, tmp_path):
        cfg = tmp_path / "opts.cfg"
        cfg.write_text("# options\npoints = 3\niters = 5\nloss = iou, giou\nseed = 11\n")
        out = tmp_path / "o"
        assert main(["bench", "--config", str(cfg), "--seed", "12", "--out", str(out)]) == 0
        m = _manifest(out)
        assert m["config"]["points"] == 3 and m["config"]["iters"] == 5
        assert m["config"]["seed"] == 12
        assert m["config"]["loss"] == ["iou", "giou"]
        out2 = tmp_path / "o2"
        assert main(["bench", "--config", str(cfg), "--loss", "siou", "--out", str(out2)]) == 0
        assert _manifest(out2)["config"]["loss"] == ["siou"]

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "opts.cfg"
        cfg.write_text("pointz = 3\n")
        assert main(["bench", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_threads_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BOXLOSS_THREADS", "2")
        assert main(["bench", "--points", "1", "--iters", "2", "--out", str(tmp_path)]) == 0
        assert _manifest(tmp_path)["config"]["threads"] == 2


class TestConverge:
    def test_identity(self, tmp_path):
        assert main(["converge", "--anchor", "10,10,1,2", "--target", "10,10,1,2", "--iters", "10",
                     "--out", str(tmp_path)]) == 0
        assert _manifest(tmp_path)["converged_at"] == 0
        rows = _read_csv(tmp_path / "trajectory_siou.csv")
        assert rows[0] == ["iteration", "cx", "cy", "w", "h", "l1_error"] and len(rows) == 12

    def test_reports_convergence(self, tmp_path):
        assert main(["converge", "--anchor", "11.7,11,1,1", "--target", "10,10,1,1", "--loss", "ciou",
                     "--iters", "300", "--out", str(tmp_path)]) == 0
        m = _manifest(tmp_path)
        assert isinstance(m["converged_at"], int) and 0 < m["converged_at"] < 300

    @pytest.mark.parametrize("box", ["10,10,0,1", "10,10,1", "a,b,c,d", "10,10,1,-2"])
    def test_malformed_box(self, box, tmp_path):
        assert main(["converge", "--anchor", box, "--target", "10,10,1,1", "--out", str(tmp_path)]) == 2


class TestSurface:
    def test_from_bench(self, bench_dir):
        assert main(["surface", "--in", str(bench_dir), "--bins", "4"]) == 0
        out = bench_dir / "surface"
        rows = _read_csv(out / "surface_siou.csv")
        assert rows[0] == ["cell_x_center", "cell_y_center", "mean_error", "count"] and len(rows) == 17
        assert sum(int(r[3]) for r in rows[1:]) == 6
        doc = json.loads((out / "surface_ciou.json").read_text())
        assert doc["seed"] == 7 and doc["config"]["kind"] == "ciou"
        assert _manifest(out)["command"] == "surface"
        assert _manifest(bench_dir)["command"] == "bench"

    def test_bins_too_small(self, bench_dir):
        assert main(["surface", "--in", str(bench_dir), "--bins", "1"]) == 2

    def test_missing_input(self, tmp_path):
        assert main(["surface", "--in", str(tmp_path / "nope")]) == 2


class TestGradcheck:
    def test_passes(self, tmp_path, capsys):
        assert main(["gradcheck", "--loss", "siou", "--samples", "1000", "--seed", "1", "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "gradcheck.json").read_text())[0]
        assert report["max_rel_error"] <= 1e-6 and report["samples"] == 1000
        assert "kink-skipped" in capsys.readouterr().out

    def test_failure_exit_code(self, tmp_path, capsys):
        assert main(["gradcheck", "--loss", "ciou", "--samples", "50", "--tol", "0", "--out", str(tmp_path)]) == 1
        assert "pred=" in capsys.readouterr().err
        assert (tmp_path / "manifest.json").exists()


class TestTune:
    def test_emits_result(self, tmp_path):
        assert main(["tune", "--generations", "2", "--population", "3", "--points", "2", "--iters", "10",
                     "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "ga_result.json").read_text())
        assert 2 <= doc["best_theta"] <= 6
        assert len(doc["history"]) == 3
        assert doc["ga_seed"] == 0 and doc["sim_seed"] == 0
