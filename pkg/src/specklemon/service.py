"""HTTP service wrapping the harness commands.

Long jobs (synth, train) run synchronously in the request; the service is
meant for a local or single-tenant deployment where the caller owns the
pipeline. ``predict`` and ``bench`` are the latency-sensitive endpoints a
monitoring client would poll.
"""

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict

from . import __version__
from .config import ConfigError, HarnessConfig, config_from_dict, load_config
from .harness import HarnessError, cmd_bench, cmd_eval, cmd_predict, cmd_synth, cmd_train
from .network import NetworkError
from .nn import CheckpointError, LossError, OptimError
from .pipeline import DatasetError, PipelineError

__all__ = [
    "app",
    "create_app",
    "SynthRequest",
    "SynthResponse",
    "TrainRequest",
    "TrainResponse",
    "EvalRequest",
    "EvalResponse",
    "BenchRequest",
    "BenchResponse",
    "PredictRequest",
    "PredictResponse",
    "handle_synth",
    "handle_train",
    "handle_eval",
    "handle_bench",
    "handle_predict",
]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SynthRequest(_Model):
    config: "dict | None" = None       # parsed config mapping (takes precedence)
    config_path: "str | None" = None   # path readable by the server
    out_dir: "str | None" = None
    seed: "int | None" = None
    mode: str = "both"


class DatasetInfo(_Model):
    mode: str
    path: str
    sha256: str
    samples: int
    runs: int
    labels_csv: str
    volume_grids: "list[str]" = []


class SynthResponse(_Model):
    out_dir: str
    seed: int
    datasets: "list[DatasetInfo]"


class TrainRequest(_Model):
    config: "dict | None" = None
    config_path: "str | None" = None
    dataset: str
    out_dir: "str | None" = None
    seed: "int | None" = None
    resume: bool = False


class TrainResponse(_Model):
    checkpoint: str
    loss_curve_csv: str
    epochs: int
    final_train_loss: float
    final_val_loss: "float | None"
    train_samples: int
    val_samples: int
    wall_time_s: float


class EvalRequest(_Model):
    checkpoint: str
    dataset: str
    thresholds: "dict[str, float] | None" = None
    out_dir: "str | None" = None
    split: str = "val"


class ThresholdResult(_Model):
    name: str
    passed: bool
    actual: float
    bound: float


class EvalResponse(_Model):
    metrics: dict
    report_csv: str
    summary: str
    passed: "bool | None"
    threshold_results: "list[ThresholdResult]"


class BenchRequest(_Model):
    checkpoint: str
    iterations: int = 200
    warmup: int = 20
    out_dir: "str | None" = None


class BenchResponse(_Model):
    checkpoint: str
    iterations: int
    warmup: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    hardware: str
    param_count: int
    report: "str | None" = None


class PredictRequest(_Model):
    checkpoint: str
    frames: str  # .npy file of shape (n_frames, H, W)


class WindowPrediction(_Model):
    window_end: int
    value: float
    value_unit: str
    material: str
    material_index: int
    probs: "list[float]"
    logit_lp: "list[float]"


class PredictResponse(_Model):
    n_frames: int
    predictions: "list[WindowPrediction]"


def _resolve_config(config: "dict | None", config_path: "str | None") -> HarnessConfig:
    if config is not None:
        return config_from_dict(config)
    if config_path is not None:
        try:
            return load_config(config_path)
        except FileNotFoundError:
            raise HarnessError(f"config file not found: {config_path}") from None
    return HarnessConfig()


def handle_synth(req: SynthRequest) -> SynthResponse:
    cfg = _resolve_config(req.config, req.config_path)
    return SynthResponse(**cmd_synth(cfg, req.out_dir, req.seed, req.mode))


def handle_train(req: TrainRequest) -> TrainResponse:
    cfg = _resolve_config(req.config, req.config_path)
    return TrainResponse(**cmd_train(cfg, req.dataset, req.out_dir, req.seed, req.resume))


def handle_eval(req: EvalRequest) -> EvalResponse:
    return EvalResponse(**cmd_eval(req.checkpoint, req.dataset, req.thresholds,
                                   req.out_dir, req.split))


def handle_bench(req: BenchRequest) -> BenchResponse:
    return BenchResponse(**cmd_bench(req.checkpoint, req.iterations, req.warmup, req.out_dir))


def handle_predict(req: PredictRequest) -> PredictResponse:
    return PredictResponse(**cmd_predict(req.checkpoint, req.frames))


_DOMAIN_ERRORS = (HarnessError, DatasetError, PipelineError, NetworkError,
                  CheckpointError, LossError, OptimError, ValueError)


def create_app() -> FastAPI:
    app = FastAPI(
        title="specklemon",
        version=__version__,
        description="Speckle-based laser-ablation monitoring: dataset synthesis, "
                    "training, evaluation, and real-time prediction.",
    )

    def run(handler, req):
        try:
            return handler(req)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail={"errors": exc.errors}) from exc
        except _DOMAIN_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/config/default")
    def default_config():
        return HarnessConfig().model_dump()

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        return run(handle_synth, req)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest):
        return run(handle_train, req)

    @app.post("/eval", response_model=EvalResponse)
    def eval_(req: EvalRequest):
        return run(handle_eval, req)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        return run(handle_bench, req)

    @app.post("/predict", response_model=PredictResponse)
    def predict_(req: PredictRequest):
        return run(handle_predict, req)

    return app


app = create_app()
