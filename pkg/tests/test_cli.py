import csv

import numpy as np
import yaml
import pytest

from specklemon.cli import EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD_FAIL, main
from specklemon.config import config_to_yaml


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestInitConfig:
    def test_prints_valid_yaml(self, capsys):
        code, out, _ = run_cli(capsys, "init-config")
        assert code == EXIT_OK
        parsed = yaml.safe_load(out)
        assert parsed["optics"]["wavelength_um"] == 0.633

    def test_writes_file(self, capsys, tmp_path):
        target = tmp_path / "cfg.yaml"
        code, _, _ = run_cli(capsys, "init-config", "--out", str(target))
        assert code == EXIT_OK
        assert target.exists()


class TestSynthCommand:
    def test_synth_with_config_file(self, capsys, tmp_path, tiny_config):
        cfg_path = tmp_path / "tiny.yaml"
        cfg_path.write_text(config_to_yaml(tiny_config))
        code, out, _ = run_cli(
            capsys, "synth", "--config", str(cfg_path),
            "--out", str(tmp_path / "data"), "--mode", "groove", "--seed", "5",
        )
        assert code == EXIT_OK
        body = yaml.safe_load(out)
        assert body["seed"] == 5
        assert (tmp_path / "data" / "groove.spkl").exists()
        assert (tmp_path / "data" / "groove_labels.csv").exists()

    def test_labels_csv_has_idle_zero_depths(self, tiny_artifacts):
        with open(tiny_artifacts["groove"]["labels_csv"]) as fh:
            rows = list(csv.DictReader(fh))
        idle = [r for r in rows if int(r["frame_idx"]) < 9]
        assert idle and all(float(r["depth_um"]) == 0.0 for r in idle)

    def test_invalid_config_exit_1(self, capsys, tmp_path, tiny_config):
        d = tiny_config.model_dump()
        d["optics"]["pitch_um"] = -1.0
        bad = tmp_path / "bad.yaml"
        bad.write_text(yaml.safe_dump(d))
        code, _, err = run_cli(capsys, "synth", "--config", str(bad), "--out", str(tmp_path))
        assert code == EXIT_ERROR
        assert "pitch" in err


class TestTrainEvalCommands:
    def test_train_missing_dataset_exit_1(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "train", "--dataset", str(tmp_path / "none.spkl"), "--out", str(tmp_path),
        )
        assert code == EXIT_ERROR
        assert "not found" in err

    def test_loss_curve_rows_equal_epochs(self, tiny_artifacts):
        with open(tiny_artifacts["train"]["loss_curve_csv"]) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == tiny_artifacts["train"]["epochs"]

    def test_eval_writes_report_and_summary(self, capsys, tiny_artifacts, tmp_path):
        code, out, _ = run_cli(
            capsys, "eval",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--dataset", tiny_artifacts["groove"]["path"],
            "--out", str(tmp_path),
        )
        assert code == EXIT_OK
        body = yaml.safe_load(out)
        assert body["passed"] is None
        assert (tmp_path / "eval_groove_val.csv").exists()
        assert (tmp_path / "eval_groove_val_summary.yaml").exists()

    def test_eval_summary_mae_matches_csv_recomputation(self, capsys, tiny_artifacts, tmp_path):
        code, out, _ = run_cli(
            capsys, "eval",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--dataset", tiny_artifacts["groove"]["path"],
            "--out", str(tmp_path),
        )
        assert code == EXIT_OK
        body = yaml.safe_load(out)
        with open(tmp_path / "eval_groove_val.csv") as fh:
            rows = list(csv.DictReader(fh))
        mae = np.mean([abs(float(r["pred_value"]) - float(r["true_value"])) for r in rows])
        assert body["metrics"]["value_mae"] == pytest.approx(mae, rel=1e-9)

    def test_threshold_fail_exit_2(self, capsys, tiny_artifacts, tmp_path):
        thresholds = tmp_path / "thr.yaml"
        thresholds.write_text("min_accuracy: 2.0\n")
        code, out, _ = run_cli(
            capsys, "eval",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--dataset", tiny_artifacts["groove"]["path"],
            "--threshold-file", str(thresholds),
            "--out", str(tmp_path),
        )
        assert code == EXIT_THRESHOLD_FAIL

    def test_threshold_pass_exit_0(self, capsys, tiny_artifacts, tmp_path):
        thresholds = tmp_path / "thr.yaml"
        thresholds.write_text("min_accuracy: 0.0\nmax_latency_p95_ms: 10000\n")
        code, _, _ = run_cli(
            capsys, "eval",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--dataset", tiny_artifacts["groove"]["path"],
            "--threshold-file", str(thresholds),
            "--out", str(tmp_path),
        )
        assert code == EXIT_OK


class TestBenchPredictCommands:
    def test_bench_output(self, capsys, tiny_artifacts, tmp_path):
        code, out, _ = run_cli(
            capsys, "bench", "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--iterations", "100", "--warmup", "10", "--out", str(tmp_path),
        )
        assert code == EXIT_OK
        body = yaml.safe_load(out)
        assert body["p50_ms"] <= body["p95_ms"]
        assert "hardware" in body

    def test_predict_output_parses_and_windows(self, capsys, tiny_artifacts, tmp_path):
        cfg = tiny_artifacts["config"]
        h = cfg.preprocessing.target_rows
        w = cfg.optics.detector_w_px // cfg.preprocessing.box_factor
        frames = np.random.default_rng(3).random((5, h, w)).astype(np.float32)
        path = tmp_path / "frames.npy"
        np.save(path, frames)
        code, out, _ = run_cli(
            capsys, "predict",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--frames", str(path),
        )
        assert code == EXIT_OK
        body = yaml.safe_load(out)  # machine-checkable structured output
        assert [p["window_end"] for p in body["predictions"]] == [2, 3, 4]

    def test_predict_three_frames_single_window(self, capsys, tiny_artifacts, tmp_path):
        cfg = tiny_artifacts["config"]
        h = cfg.preprocessing.target_rows
        w = cfg.optics.detector_w_px // cfg.preprocessing.box_factor
        np.save(tmp_path / "f3.npy", np.random.default_rng(4).random((3, h, w)).astype(np.float32))
        code, out, _ = run_cli(
            capsys, "predict",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--frames", str(tmp_path / "f3.npy"),
        )
        assert code == EXIT_OK
        assert len(yaml.safe_load(out)["predictions"]) == 1

    def test_predict_too_few_frames_exit_1(self, capsys, tiny_artifacts, tmp_path):
        np.save(tmp_path / "f2.npy", np.zeros((2, 4, 4), dtype=np.float32))
        code, _, err = run_cli(
            capsys, "predict",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--frames", str(tmp_path / "f2.npy"),
        )
        assert code == EXIT_ERROR
        assert "3" in err

    def test_predict_raw_detector_frames(self, capsys, tiny_artifacts, tmp_path):
        # raw frames at detector resolution go through box-average + normalize
        cfg = tiny_artifacts["config"]
        h, w = cfg.optics.detector_h_px, cfg.optics.detector_w_px
        raw = np.random.default_rng(5).random((4, h, w)) * 1e6
        np.save(tmp_path / "raw.npy", raw)
        code, out, _ = run_cli(
            capsys, "predict",
            "--checkpoint", tiny_artifacts["train"]["checkpoint"],
            "--frames", str(tmp_path / "raw.npy"),
        )
        assert code == EXIT_OK
        assert len(yaml.safe_load(out)["predictions"]) == 2
