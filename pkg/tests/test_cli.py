"""Config parsing, CLI subcommands, report files and determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from hybridcast.cli import main
from hybridcast.config import ALL_MODELS, ConfigError, ExperimentConfig, stable_seed
from hybridcast.datapipe import ingest
from hybridcast.experiment import run_experiment


MINI_CONFIG = """
[data]
source = synthetic
n_hours = 400
seed = 11

[decomposition]
enabled = true
noise_ratio = 0.2
trials = 2
seed = 3

[models]
set = {models}

[experiment]
horizons = {horizons}
robustness_runs = {reps}
base_seed = 5
history_length = 12

[training]
epochs = 2
batch_size = 64
learning_rate = 0.01

[architecture]
bpnn_hidden = 4
tcn_blocks = 2
tcn_dilations = 1,2
tcn_channels = 4,4
tcn_kernel_size = 2
"""


def write_config(tmp_path, models="LR", horizons="1", reps=1, name="exp.ini"):
    path = tmp_path / name
    path.write_text(MINI_CONFIG.format(models=models, horizons=horizons, reps=reps),
                    encoding="utf-8")
    return path


class TestConfig:
    def test_defaults_match_published_settings(self):
        cfg = ExperimentConfig()
        assert cfg.epochs == 100
        assert cfg.batch_size == 128
        assert cfg.learning_rate == 0.01
        assert cfg.history_length == 24
        assert cfg.bpnn_hidden == 32
        assert cfg.lstm_hidden == 64
        assert cfg.gru_hidden == 64
        assert cfg.tcn_blocks == 4
        assert cfg.tcn_dilations == (1, 2, 4, 8)
        assert cfg.tcn_channels == (32, 32, 16, 16)
        assert cfg.tcn_kernel_size == 2
        assert cfg.embedding_sizes == {"weather": 2, "month": 2, "day_of_week": 2, "hour": 4}
        assert cfg.fractions == (0.6, 0.2, 0.2)

    def test_from_file_overrides(self, tmp_path):
        path = write_config(tmp_path, models="LR,DeepTCN", horizons="1,2")
        cfg = ExperimentConfig.from_file(path)
        assert cfg.models == ("LR", "DeepTCN")
        assert cfg.horizons == (1, 2)
        assert cfg.epochs == 2
        assert cfg.tcn_channels == (4, 4)
        assert cfg.n_hours == 400

    def test_unknown_model_rejected(self, tmp_path):
        path = write_config(tmp_path, models="LR,Prophet")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)

    def test_missing_data_file_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(source="/nonexistent/data.csv")

    def test_bad_fractions_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(train_fraction=0.5, validation_fraction=0.2, test_fraction=0.2)

    def test_ceemdan_models_need_decomposition_enabled(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(models=("CEEMDAN-LR",), decomposition_enabled=False)

    def test_all_model_names_cover_ceemdan_variants(self):
        for base in ("LR", "BPNN", "LSTM", "GRU", "DeepTCN"):
            assert base in ALL_MODELS
            assert f"CEEMDAN-{base}" in ALL_MODELS

    def test_stable_seed_is_stable(self):
        assert stable_seed(1, "DeepTCN", 2, 0) == stable_seed(1, "DeepTCN", 2, 0)
        assert stable_seed(1, "DeepTCN", 2, 0) != stable_seed(1, "DeepTCN", 2, 1)


class TestSynthCommand:
    def test_writes_rows_and_roundtrips(self, tmp_path):
        out = tmp_path / "data.csv"
        assert main(["synth", "--hours", "120", "--seed", "4", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 121  # header + rows
        frame = ingest(out)
        assert frame.n_rows == 120
        assert not frame.missing_mask.any()

    def test_same_seed_identical_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["synth", "--hours", "90", "--seed", "9", "--out", str(a)])
        main(["synth", "--hours", "90", "--seed", "9", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_console_script_entry(self, tmp_path):
        out = tmp_path / "c.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "hybridcast.cli", "synth", "--hours", "60",
             "--seed", "1", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()


class TestDecomposeCommand:
    def test_writes_modes_and_metadata(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out = tmp_path / "dec"
        assert main(["decompose", "--config", str(cfg_path), "--out", str(out)]) == 0
        header = (out / "decomposition.csv").read_text().splitlines()[0].split(",")
        assert header[0] == "imf_1" and header[-1] == "residue"
        meta = json.loads((out / "decomposition_meta.json").read_text())
        assert meta["reconstruction_error"] < 1e-8
        assert meta["trials"] == 2
        assert meta["n_imfs"] == len(header) - 1

    def test_rerun_identical_bytes(self, tmp_path):
        cfg_path = write_config(tmp_path)
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        main(["decompose", "--config", str(cfg_path), "--out", str(out1)])
        main(["decompose", "--config", str(cfg_path), "--out", str(out2)])
        assert (out1 / "decomposition.csv").read_bytes() == (out2 / "decomposition.csv").read_bytes()
        assert (out1 / "decomposition_meta.json").read_bytes() == (out2 / "decomposition_meta.json").read_bytes()


class TestRunCommand:
    def test_minimal_run_single_metrics_row(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR", horizons="1")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        lines = (out / "metrics.csv").read_text().splitlines()
        assert lines[0] == "model,horizon,criterion,value"
        assert len(lines) == 4  # mape, mae, rmse for the single cell
        assert (out / "predictions_LR_h1_r0.csv").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["metrics"]["LR"]["h1"]["mape"] > 0

    def test_grid_completeness_with_failures(self, tmp_path):
        # horizon 390 cannot be windowed from 400 rows: that cell must fail
        # while the rest of the grid completes, with a nonzero exit code.
        cfg_path = write_config(tmp_path, models="LR", horizons="1,390")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 1
        report = json.loads((out / "report.json").read_text())
        assert report["metrics"]["LR"].keys() == {"h1"}
        assert len(report["failures"]) == 1
        failure = report["failures"][0]
        assert (failure["model"], failure["horizon"]) == ("LR", 390)
        assert (out / "failures.csv").exists()

    def test_ceemdan_variant_and_comparison_table(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR,CEEMDAN-LR", horizons="1")
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "ceemdan_comparison.csv").exists()
        table = (out / "metrics_summary.csv").read_text().splitlines()
        assert table[0] == "horizon,criterion,LR,CEEMDAN-LR"

    def test_robustness_block_shape(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR", horizons="1", reps=2)
        out = tmp_path / "run"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        lines = (out / "robustness.csv").read_text().splitlines()
        assert lines[0] == "model,horizon,criterion,mean,std,cell"
        assert len(lines) == 4
        assert "(" in lines[1].split(",")[-1]  # "mean (std)" cell format

    def test_dm_matrix_lower_triangle(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR,BPNN,CEEMDAN-LR", horizons="1")
        out = tmp_path / "run"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        lines = (out / "dm_h1.csv").read_text().splitlines()
        assert lines[0] == "model,LR,BPNN"
        first = lines[1].split(",")
        assert first[0] == "BPNN" and first[1] and not first[2]
        second = lines[2].split(",")
        assert second[0] == "CEEMDAN-LR" and second[1] and second[2]
        assert (out / "dm_pooled.csv").exists()

    def test_deterministic_reports_jobs1(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR,BPNN", horizons="1")
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["run", "--config", str(cfg_path), "--out", str(out1), "--jobs", "1"])
        main(["run", "--config", str(cfg_path), "--out", str(out2), "--jobs", "1"])
        for name in ("metrics.csv", "metrics_summary.csv", "report.json",
                      "predictions_LR_h1_r0.csv", "predictions_BPNN_h1_r0.csv",
                      "history_BPNN_h1_r0.csv", "dm_h1.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_file_source_roundtrip(self, tmp_path):
        data = tmp_path / "data.csv"
        main(["synth", "--hours", "400", "--seed", "2", "--out", str(data)])
        cfg_path = tmp_path / "file.ini"
        cfg_path.write_text(
            MINI_CONFIG.format(models="LR", horizons="1", reps=1).replace(
                "source = synthetic", f"source = {data}"
            ),
            encoding="utf-8",
        )
        out = tmp_path / "run"
        assert main(["run", "--config", str(cfg_path), "--out", str(out)]) == 0


class TestReportCommand:
    def test_six_model_dm_matrix_is_15_cells(self, tmp_path):
        # Fabricate prediction traces for the whole six-model comparison and
        # rebuild the report: the matrix must carry exactly the 15 strictly
        # lower-triangular pairwise cells.
        from datetime import datetime, timedelta

        rng = np.random.default_rng(0)
        run_dir = tmp_path / "traces"
        run_dir.mkdir()
        y = rng.uniform(20, 200, 48)
        start = datetime(2020, 1, 1)
        models = ["LR", "BPNN", "LSTM", "GRU", "DeepTCN", "CEEMDAN-DeepTCN"]
        for i, model in enumerate(models):
            pred = y * (1 + rng.normal(0, 0.02 * (i + 1), 48))
            with open(run_dir / f"predictions_{model}_h1_r0.csv", "w") as fh:
                fh.write("timestamp,actual,predicted\n")
                for t, (actual, p) in enumerate(zip(y, pred)):
                    ts = (start + timedelta(hours=t)).isoformat(sep=" ")
                    fh.write(f"{ts},{float(actual)!r},{float(p)!r}\n")
        assert main(["report", str(run_dir)]) == 0
        lines = (run_dir / "dm_h1.csv").read_text().splitlines()
        assert len(lines) == 6  # header + 5 rows
        filled = sum(1 for line in lines[1:] for cell in line.split(",")[1:] if cell)
        assert filled == 15

    def test_rebuild_matches_original(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR,BPNN", horizons="1")
        out = tmp_path / "run"
        main(["run", "--config", str(cfg_path), "--out", str(out)])
        original = (out / "metrics.csv").read_bytes()
        (out / "metrics.csv").unlink()
        assert main(["report", str(out)]) == 0
        assert (out / "metrics.csv").read_bytes() == original

    def test_empty_directory_fails(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", str(empty)]) == 1


class TestParallelCells:
    def test_jobs2_same_metrics_as_serial(self, tmp_path):
        cfg_path = write_config(tmp_path, models="LR,BPNN", horizons="1,2")
        out1, out2 = tmp_path / "serial", tmp_path / "parallel"
        main(["run", "--config", str(cfg_path), "--out", str(out1), "--jobs", "1"])
        main(["run", "--config", str(cfg_path), "--out", str(out2), "--jobs", "2"])
        assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()
