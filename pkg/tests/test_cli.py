import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from imbkit.cli import main

STUB = f"{sys.executable} {Path(__file__).parent / 'stub_sidecar.py'}"

FAST_CONFIG = """\
master_seed: 0
seeds: 1
test_per_class: 100
context_sizes: [60]
imbalances: [0.2]
methods: [none]
classifier: {backend: kernel_icl, params: {bandwidth: scaled}}
datasets:
  - name: demo
    synthetic: two_gaussians
    params: {n_per_class: 400, dim: 2, separation: 1.0, seed: 7}
"""


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, text=FAST_CONFIG):
    path = tmp_path / "config.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestValidate:
    def test_demo_manifest(self, runner):
        result = runner.invoke(main, ["validate"])
        assert result.exit_code == 0
        assert "two-gaussians" in result.output
        assert "pi1=" in result.output

    def test_bad_config_exits_one(self, runner, tmp_path):
        result = runner.invoke(main, ["validate", "--config", str(tmp_path / "no.yaml")])
        assert result.exit_code == 1
        assert "error:" in result.output

    def test_broken_dataset_exits_one(self, runner, tmp_path):
        cfg = write_config(
            tmp_path,
            FAST_CONFIG.replace(
                "    synthetic: two_gaussians\n    params: {n_per_class: 400, dim: 2, separation: 1.0, seed: 7}",
                "    path: missing.csv\n    label_column: y\n    minority_label: 1",
            ),
        )
        result = runner.invoke(main, ["validate", "--config", str(cfg)])
        assert result.exit_code == 1


class TestRun:
    def test_one_cell_grid(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(main, ["run", "--config", str(cfg), "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "results.csv").read_text().strip().splitlines()
        assert len(lines) == 2  # header + one row
        assert (out / "table.md").exists()
        assert (out / "timings.csv").exists()

    def test_idempotent_results(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        runner.invoke(main, ["run", "--config", str(cfg), "--out", str(out)])
        first = (out / "results.csv").read_bytes()
        runner.invoke(main, ["run", "--config", str(cfg), "--out", str(out)])
        assert (out / "results.csv").read_bytes() == first

    def test_partial_failure_exits_two(self, runner, tmp_path):
        cfg = write_config(
            tmp_path,
            FAST_CONFIG.replace("imbalances: [0.2]", "imbalances: [0.025]")
            .replace("context_sizes: [60]", "context_sizes: [40]")
            .replace("methods: [none]", "methods: [synthetic_upsample]"),
        )
        result = runner.invoke(main, ["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert result.exit_code == 2
        assert "error" in result.output.lower()

    def test_seed_and_backend_overrides(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["run", "--config", str(cfg), "--out", str(out), "--seeds", "2",
             "--backend", "knn"],
        )
        assert result.exit_code == 0, result.output
        lines = (out / "results.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # two seeds now

    def test_external_backend_via_sidecar_cmd(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["run", "--config", str(cfg), "--out", str(out), "--sidecar-cmd", STUB],
        )
        assert result.exit_code == 0, result.output


class TestSweeps:
    def test_threshold_sweep_artifact(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["sweep-threshold", "--config", str(cfg), "--out", str(out),
             "--n", "60", "--pi1", "0.2", "--taus", "0.1,0.2,0.5,0.9"],
        )
        assert result.exit_code == 0, result.output
        csvs = list(out.glob("sweep_threshold_*.csv"))
        assert len(csvs) == 1
        header = csvs[0].read_text().splitlines()[0]
        assert header.startswith("tau,acc_class0,acc_class1,balanced")

    def test_downsample_sweep_artifact(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["sweep-downsample", "--config", str(cfg), "--out", str(out),
             "--n", "60", "--pi1", "0.2", "--targets", "12,24,48"],
        )
        assert result.exit_code == 0, result.output
        csvs = list(out.glob("sweep_downsample_*.csv"))
        assert len(csvs) == 1
        assert "n0_target" in csvs[0].read_text().splitlines()[0]


class TestCalibrateAndRoc:
    def test_calibrate_reports_diagnosis(self, runner, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        result = runner.invoke(
            main,
            ["calibrate", "--config", str(cfg), "--out", str(out),
             "--n", "60", "--pi1", "0.2", "--bins", "10"],
        )
        assert result.exit_code == 0, result.output
        assert "ece=" in result.output
        assert "diagnosis=" in result.output
        assert list(out.glob("calibration_*.csv"))

    def test_roc_auc_falls_with_imbalance(self, runner, tmp_path):
        out = tmp_path / "out"
        # demo config; the 0.5-context curve must dominate the 0.1 one
        result = runner.invoke(
            main,
            ["roc", "--out", str(out), "--n", "400",
             "--pi1", "0.1", "--pi1", "0.5", "--seed", "0"],
        )
        assert result.exit_code == 0, result.output
        aucs = {}
        for line in result.output.splitlines():
            if line.startswith("pi1="):
                key = float(line.split(":")[0].split("=")[1])
                aucs[key] = float(line.split("auc=")[1].split()[0])
        assert set(aucs) == {0.1, 0.5}
        assert aucs[0.5] > aucs[0.1]
        assert len(list(out.glob("roc_*.csv"))) == 2


class TestHelp:
    def test_top_level_lists_subcommands(self, runner):
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for cmd in ("validate", "run", "sweep-threshold", "sweep-downsample",
                    "calibrate", "roc"):
            assert cmd in result.output

    def test_run_flags_documented(self, runner):
        result = runner.invoke(main, ["run", "--help"])
        for flag in ("--config", "--out", "--seeds", "--workers", "--backend",
                     "--sidecar-cmd"):
            assert flag in result.output
        assert "IMBKIT_OUT" in result.output

    @pytest.mark.parametrize(
        "command,flags",
        [
            ("sweep-threshold", ("--config", "--out", "--dataset", "--n", "--pi1", "--seed", "--taus")),
            ("sweep-downsample", ("--config", "--out", "--dataset", "--n", "--pi1", "--seed", "--targets")),
            ("calibrate", ("--config", "--out", "--dataset", "--n", "--pi1", "--seed", "--bins")),
            ("roc", ("--config", "--out", "--dataset", "--n", "--pi1", "--seed")),
            ("validate", ("--config",)),
        ],
    )
    def test_subcommand_flags_documented(self, runner, command, flags):
        result = runner.invoke(main, [command, "--help"])
        assert result.exit_code == 0
        for flag in flags:
            assert flag in result.output

    def test_malformed_yaml_exits_one(self, runner, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("datasets: [unclosed\n", encoding="utf-8")
        result = runner.invoke(main, ["run", "--config", str(bad), "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert "error:" in result.output
