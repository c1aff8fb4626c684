import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import tiny_config_dict
from specklemon.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestHealthAndConfig:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"
        assert "version" in body

    def test_default_config_endpoint(self, client):
        resp = client.get("/config/default")
        assert resp.status_code == 200
        assert resp.json()["optics"]["wavelength_um"] == 0.633


class TestSynthEndpoint:
    def test_synth_groove(self, client, tmp_path):
        cfg = tiny_config_dict()
        resp = client.post("/synth", json={
            "config": cfg, "out_dir": str(tmp_path), "mode": "groove",
        })
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert len(body["datasets"]) == 1
        ds = body["datasets"][0]
        assert ds["mode"] == "groove"
        assert ds["samples"] == 2 * 2 * 2 * 3  # materials x energies x speeds x cap
        assert ds["runs"] == 8

    def test_invalid_config_lists_every_error(self, client, tmp_path):
        cfg = tiny_config_dict()
        cfg["optics"]["pitch_um"] = -2.0
        cfg["dataset"]["split_fraction"] = 7.0
        resp = client.post("/synth", json={"config": cfg, "out_dir": str(tmp_path)})
        assert resp.status_code == 422
        errors = resp.json()["detail"]["errors"]
        assert len(errors) >= 2

    def test_unknown_mode_rejected(self, client, tmp_path):
        resp = client.post("/synth", json={
            "config": tiny_config_dict(), "out_dir": str(tmp_path), "mode": "lathe",
        })
        assert resp.status_code == 400


class TestTrainEvalEndpoints:
    def test_train_then_eval(self, client, tiny_artifacts, tmp_path):
        groove = tiny_artifacts["groove"]
        cfg = tiny_config_dict()
        cfg["train"]["epochs"] = 2
        resp = client.post("/train", json={
            "config": cfg, "dataset": groove["path"], "out_dir": str(tmp_path),
        })
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["epochs"] == 2
        assert np.isfinite(body["final_train_loss"])

        resp = client.post("/eval", json={
            "checkpoint": body["checkpoint"], "dataset": groove["path"],
            "out_dir": str(tmp_path),
        })
        assert resp.status_code == 200, resp.text
        assert resp.json()["passed"] is None

    def test_eval_threshold_failure_reported(self, client, tiny_artifacts, tmp_path):
        resp = client.post("/eval", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"],
            "dataset": tiny_artifacts["groove"]["path"],
            "out_dir": str(tmp_path),
            "thresholds": {"min_accuracy": 2.0},  # unattainable
        })
        assert resp.status_code == 200
        body = resp.json()
        assert body["passed"] is False
        assert body["threshold_results"][0]["name"] == "min_accuracy"

    def test_eval_missing_dataset_400(self, client, tiny_artifacts):
        resp = client.post("/eval", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"],
            "dataset": "/nonexistent.spkl",
        })
        assert resp.status_code == 400
        assert "not found" in resp.json()["detail"]

    def test_train_missing_dataset_400(self, client, tmp_path):
        resp = client.post("/train", json={
            "config": tiny_config_dict(), "dataset": "/nope.spkl",
            "out_dir": str(tmp_path),
        })
        assert resp.status_code == 400

    def test_eval_material_count_mismatch_named(self, client, tiny_artifacts, tmp_path):
        # dataset with 3 materials vs checkpoint trained on 2
        cfg = tiny_config_dict()
        cfg["materials"].append(dict(cfg["materials"][0], name="titanium", corr_len_um=3.0))
        resp = client.post("/synth", json={
            "config": cfg, "out_dir": str(tmp_path), "mode": "groove",
        })
        assert resp.status_code == 200, resp.text
        other = resp.json()["datasets"][0]["path"]
        resp = client.post("/eval", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"], "dataset": other,
        })
        assert resp.status_code == 400
        assert "K=2" in resp.json()["detail"] and "K=3" in resp.json()["detail"]


class TestBenchEndpoint:
    def test_bench(self, client, tiny_artifacts, tmp_path):
        resp = client.post("/bench", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"],
            "iterations": 100, "warmup": 10, "out_dir": str(tmp_path),
        })
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert body["p50_ms"] <= body["p95_ms"]
        assert body["hardware"]
        assert body["param_count"] > 0

    def test_too_few_iterations_rejected(self, client, tiny_artifacts):
        resp = client.post("/bench", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"], "iterations": 10,
        })
        assert resp.status_code == 400


class TestPredictEndpoint:
    def test_predict_windows(self, client, tiny_artifacts, tmp_path):
        h = tiny_artifacts["config"].preprocessing.target_rows
        w = (tiny_artifacts["config"].optics.detector_w_px
             // tiny_artifacts["config"].preprocessing.box_factor)
        frames = np.random.default_rng(0).random((5, h, w)).astype(np.float32)
        path = tmp_path / "frames.npy"
        np.save(path, frames)
        resp = client.post("/predict", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"], "frames": str(path),
        })
        assert resp.status_code == 200, resp.text
        body = resp.json()
        assert [p["window_end"] for p in body["predictions"]] == [2, 3, 4]
        first = body["predictions"][0]
        assert set(first) >= {"value", "material", "probs", "logit_lp"}

    def test_too_few_frames_rejected(self, client, tiny_artifacts, tmp_path):
        path = tmp_path / "two.npy"
        np.save(path, np.zeros((2, 25, 255), dtype=np.float32))
        resp = client.post("/predict", json={
            "checkpoint": tiny_artifacts["train"]["checkpoint"], "frames": str(path),
        })
        assert resp.status_code == 400
        assert "3" in resp.json()["detail"]
