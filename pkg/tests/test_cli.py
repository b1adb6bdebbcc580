import json
import os

import numpy as np
import pytest

from regionboot.cli import main

CONE = '{"kind":"cone2d","half_angle":0.3141592653589793,"orientation":0.3141592653589793}'
SLAB = '{"kind":"slab","m":3,"d":1.0}'
SHELL = '{"kind":"spherical_shell","m":3,"a1":6,"a2":5}'


class TestGrid:
    def test_default_grid(self, capsys):
        assert main(["grid"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["sigma2"]) == 13
        np.testing.assert_allclose(payload["sigma2"][0], 1.0 / 9.0)
        np.testing.assert_allclose(payload["sigma2"][-1], 9.0)
        np.testing.assert_allclose(
            np.asarray(payload["tau2"]) - np.asarray(payload["sigma2"]), 1.0
        )
        assert payload["replicates"] == [10000] * 13

    def test_one_step_grid(self, capsys):
        assert main(["grid", "--one-step"]) == 0
        assert json.loads(capsys.readouterr().out)["tau2"] is None


class TestExact:
    def test_slab_triple(self, capsys):
        assert main(["exact", "--region", SLAB, "--y", "0,0,0,-0.1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(payload["p_one_sided"], 0.540, atol=5e-4)
        np.testing.assert_allclose(payload["p_two_sided"], 0.724, atol=5e-4)
        np.testing.assert_allclose(payload["pi_bayes"], 0.356, atol=5e-4)

    def test_slab_center(self, capsys):
        assert main(["exact", "--region", SLAB, "--y", "0,0,0,-0.5"]) == 0
        payload = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(payload["p_two_sided"], 1.0, atol=1e-12)

    def test_shell_suite(self, capsys):
        assert main(["exact", "--region", SHELL, "--y", "5.9,0,0,0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        np.testing.assert_allclose(payload["p1"], 0.362, atol=5e-4)
        np.testing.assert_allclose(payload["p2"], 0.267, atol=5e-4)
        np.testing.assert_allclose(payload["p_exact"], 0.907, atol=5e-4)
        np.testing.assert_allclose(payload["p_two_sided_combined"], 0.905, atol=5e-4)
        np.testing.assert_allclose(payload["pi_bayes"], 0.371, atol=5e-4)
        np.testing.assert_allclose(payload["bp_sigma1"], 0.320, atol=5e-4)
        np.testing.assert_allclose(
            payload["critical_constants_alpha_05"], [1.331, 1.903], atol=5e-4
        )

    def test_unsupported_region(self, capsys):
        assert main(["exact", "--region", CONE, "--y", "1,1"]) == 2

    def test_bad_region_json(self):
        assert main(["exact", "--region", "{bad json", "--y", "1,1"]) == 2

    def test_region_from_file(self, tmp_path, capsys):
        path = tmp_path / "region.json"
        path.write_text(SLAB)
        assert main(["exact", "--region", str(path), "--y", "0,0,0,-0.1"]) == 0


class TestPipeline:
    def test_shell_pipeline_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "pipeline",
                "--region", SHELL,
                "--y", "5.9,0,0,0",
                "--target", "H0",
                "--B", "2000",
                "--seed", "5",
                "--out", str(out),
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["report"]["p_two_sided"] is not None
        assert (out / "report.json").exists()
        assert (out / "counts.csv").exists()
        assert (out / "aic.json").exists()
        aic = json.loads((out / "aic.json").read_text())
        assert any(row["chosen"] for row in aic)

    def test_counts_file_input(self, tmp_path, capsys):
        out = tmp_path / "run"
        main(
            [
                "pipeline",
                "--region", SHELL,
                "--y", "5.9,0,0,0",
                "--target", "H1",
                "--B", "2000",
                "--seed", "5",
                "--out", str(out),
            ]
        )
        capsys.readouterr()
        code = main(
            [
                "pipeline",
                "--region", SHELL,
                "--target", "H1",
                "--counts", str(out / "counts.csv"),
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["report"]["p_one_sided"] is not None

    def test_missing_y(self):
        assert main(["pipeline", "--region", SHELL]) == 2

    def test_env_seed(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("REGIONBOOT_SEED", "77")
        out1 = tmp_path / "a"
        main(["pipeline", "--region", SHELL, "--y", "5.9,0,0,0", "--B", "1000",
              "--target", "H1", "--out", str(out1)])
        capsys.readouterr()
        monkeypatch.delenv("REGIONBOOT_SEED")
        out2 = tmp_path / "b"
        main(["pipeline", "--region", SHELL, "--y", "5.9,0,0,0", "--B", "1000",
              "--target", "H1", "--seed", "77", "--out", str(out2)])
        capsys.readouterr()
        assert (out1 / "counts.csv").read_text() == (out2 / "counts.csv").read_text()


class TestSweeps:
    def test_contour_deterministic(self, tmp_path, capsys):
        args = [
            "sweep-contour",
            "--region", CONE,
            "--measure", "bp1",
            "--xmin", "0", "--xmax", "1.0",
            "--ymin", "-0.5", "--ymax", "0.0",
            "--step", "0.5",
            "--B", "500",
            "--seed", "9",
        ]
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        sidecar = json.loads((tmp_path / "a.csv.json").read_text())
        assert sidecar["config"]["seed"] == 9
        lines = out1.read_text().splitlines()
        assert len(lines) == 1 + 3 * 2  # header + grid points

    def test_contour_row_count_matches_grid(self, tmp_path):
        out = tmp_path / "c.csv"
        main(
            [
                "sweep-contour",
                "--region", CONE,
                "--measure", "bp1",
                "--xmin", "0", "--xmax", "2",
                "--ymin", "0", "--ymax", "1",
                "--step", "1.0",
                "--B", "200",
                "--seed", "1",
                "--out", str(out),
            ]
        )
        rows = out.read_text().splitlines()
        assert len(rows) - 1 == 3 * 2

    def test_rejection_sweep(self, tmp_path):
        out = tmp_path / "rej.csv"
        code = main(
            [
                "sweep-rejection",
                "--region", CONE,
                "--measure", "bp1",
                "--mus", "0,4",
                "--replicates", "10",
                "--B", "500",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = out.read_text().splitlines()
        assert len(rows) == 1 + 2  # header + one row per (mu, measure)
        header = rows[0].split(",")
        assert "rate_low" in header and "se_high" in header

    def test_rejection_replicate_one_degenerate(self, tmp_path):
        out = tmp_path / "one.csv"
        main(
            [
                "sweep-rejection",
                "--region", CONE,
                "--measure", "bp1",
                "--mus", "0",
                "--replicates", "1",
                "--B", "500",
                "--seed", "3",
                "--out", str(out),
            ]
        )
        row = out.read_text().splitlines()[1].split(",")
        rate_low = float(row[8])
        assert rate_low in (0.0, 1.0)

    def test_bad_measure(self):
        assert main(["sweep-rejection", "--region", CONE, "--measure", "nope"]) == 2

    def test_wrong_region_kind(self):
        assert main(["sweep-contour", "--region", SLAB, "--measure", "bp1"]) == 2
