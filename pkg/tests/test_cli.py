"""Test cases for the command-line interface."""

import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from app.main import app

runner = CliRunner()

SMALL_VERIFY = [
    "--set", "verify.instances=2",
    "--set", "verify.grid_points=32",
    "--set", "verify.extent=10.0",
]

TINY_EXPERIMENT = [
    "--set", "experiment.separations=[0.0]",
    "--set", "experiment.accuracy_separation=0.0",
    "--set", "experiment.replicates=4",
    "--set", "experiment.levels=3",
    "--set", "experiment.max_steps=100",
    "--set", "experiment.record_every=20",
    "--set", "experiment.threshold=0.5",
    "--set", "experiment.start=[0.0, 0.0]",
    "--set", "experiment.block_size=2",
]


def _invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


class TestSampleCommand:
    """stmh sample."""

    def test_zero_steps_writes_initial_state(self, tmp_path):
        """--steps 0 gives exactly the initial row."""
        result = _invoke("sample", "--steps", 0, "--threads", 1, "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "samples.csv")
        assert list(frame.columns) == ["step", "level", "x1", "x2"]
        assert len(frame) == 1
        assert frame.loc[0, "step"] == 0

    def test_same_seed_same_bytes(self, tmp_path):
        """Two runs with the same seed write identical sample files."""
        for name in ("a", "b"):
            result = _invoke("sample", "--steps", 200, "--seed", 7, "--out-dir", tmp_path / name)
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()

    def test_manifest(self, tmp_path):
        """manifest.json records the command, a short config hash and the files."""
        result = _invoke("sample", "--steps", 10, "--seed", 3, "--threads", 2, "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "sample"
        assert len(manifest["config_hash"]) == 16
        assert manifest["seed"] == 3
        assert manifest["threads"] == 2
        assert manifest["files"] == ["samples.csv"]
        assert "numpy" in manifest["versions"]


class TestEstimateCommand:
    """stmh estimate-z."""

    def test_single_level_ladder(self, tmp_path):
        """A one-level ladder is (1, 1.0, 0.0) without any sampling."""
        result = _invoke("estimate-z", "--set", "schedule.levels=1", "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "ladder.csv")
        assert frame.values.tolist() == [[1.0, 1.0, 0.0]]

    def test_first_estimate_is_zero(self, tmp_path):
        """log Zhat_1 = 0 and betas increase to 1."""
        result = _invoke(
            "estimate-z", "--set", "schedule.levels=3", "--set", "estimation.samples=5",
            "--set", "estimation.run_steps=50", "--threads", 1, "--out-dir", tmp_path,
        )
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "ladder.csv")
        assert frame["i"].tolist() == [1, 2, 3]
        assert frame.loc[0, "log_zhat"] == 0.0
        assert frame["beta"].is_monotonic_increasing
        assert frame["beta"].iloc[-1] == 1.0


class TestErrors:
    """Exit codes."""

    def test_bad_config_exits_2(self, tmp_path):
        """Invalid configuration maps onto exit code 2 and writes nothing."""
        bad = tmp_path / "bad.yaml"
        bad.write_text("schedule:\n  mode: practical\n  lam: 1.5\n", encoding="utf-8")
        result = _invoke("sample", "--config", bad, "--out-dir", tmp_path / "out")
        assert result.exit_code == 2
        assert not (tmp_path / "out").exists()

    def test_malformed_set_exits_2(self, tmp_path):
        """--set without '=' is a configuration error."""
        result = _invoke("sample", "--set", "schedule.levels", "--out-dir", tmp_path)
        assert result.exit_code == 2

    def test_unsupported_quadrature_exits_2(self, tmp_path):
        """Quadrature on a d = 3 target whose means span a plane exits 2 instead of crashing."""
        path = tmp_path / "plane3d.yaml"
        path.write_text(
            "target:\n  dim: 3\n  means: [[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]]\n"
            "schedule:\n  mode: practical\n  levels: 2\n"
            "sampler:\n  steps: 5\n  zhat_source: quadrature\n",
            encoding="utf-8",
        )
        result = _invoke("sample", "--config", path, "--out-dir", tmp_path / "out")
        assert result.exit_code == 2
        assert not (tmp_path / "out" / "samples.csv").exists()


class TestVerifyCommand:
    """stmh verify."""

    def test_small_suite_passes(self, tmp_path):
        """A small randomized suite passes and exits 0."""
        result = _invoke("verify", "--seed", 0, "--threads", 2, "--out-dir", tmp_path, *SMALL_VERIFY)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(tmp_path / "verify.csv")
        assert len(frame) == 4
        assert frame["passed"].all()
        sweep = pd.read_csv(tmp_path / "radius_sweep.csv")
        assert len(sweep) == 6
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert set(manifest["files"]) == {"verify.csv", "radius_sweep.csv"}

    def test_corrupted_constant_exits_4(self, tmp_path):
        """Shrinking C3 with rare level moves fails rows and exits 4, still writing the table."""
        result = _invoke(
            "verify", "--seed", 0, "--threads", 1, "--out-dir", tmp_path, *SMALL_VERIFY,
            "--set", "verify.lam=0.001", "--set", "verify.c3_scale=1e-6",
        )
        assert result.exit_code == 4
        frame = pd.read_csv(tmp_path / "verify.csv")
        assert not frame["holds"].all()
        assert (tmp_path / "manifest.json").exists()


class TestExperimentCommand:
    """stmh experiment."""

    @pytest.mark.parametrize("kind,files", [
        ("both", {"scaling.csv", "accuracy.csv", "fits.csv", "replicates.csv"}),
        ("scaling", {"scaling.csv", "fits.csv", "replicates.csv"}),
    ])
    def test_tiny_study(self, tmp_path, kind, files):
        """The study writes its tables and the replicate records."""
        result = _invoke(
            "experiment", "--threads", 2, "--out-dir", tmp_path, *TINY_EXPERIMENT,
            "--set", f"experiment.kind={kind}",
        )
        assert result.exit_code == 0, result.output
        written = {p.name for p in tmp_path.glob("*.csv")}
        assert written == files
        replicates = pd.read_csv(tmp_path / "replicates.csv")
        assert set(replicates["algorithm"]) == {"stmh", "mh"}
