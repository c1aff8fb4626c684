"""Depth/material monitoring network: assembly, training, and evaluation.

The layer chain is two stem convolutions, five residual blocks, a max-pool,
two head convolutions, then two fully connected layers producing one
regression unit plus K class logits. Regression runs on targets divided by
``value_scale``; predictions are de-normalized back to physical units.
"""

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .nn import (
    Adam,
    Conv2d,
    Dense,
    Flatten,
    LayerError,
    MaxPool2d,
    ReLU,
    ResidualBlock,
    read_checkpoint,
    rmse_loss,
    softmax_xent,
    write_checkpoint,
)
from .pipeline import Dataset

__all__ = [
    "NetworkError",
    "TrainAbort",
    "NetworkSpec",
    "TrainConfig",
    "MonitorNet",
    "Prediction",
    "EvalReport",
    "build_network",
    "joint_loss",
    "train_network",
    "predict",
    "evaluate",
    "save_network",
    "load_network",
    "logit_lp",
    "PROB_CLAMP",
]

PROB_CLAMP = 1e-7  # probabilities are clamped to [PROB_CLAMP, 1-PROB_CLAMP] before log-odds


class NetworkError(ValueError):
    """Architecture or usage contract violation."""


class TrainAbort(RuntimeError):
    """Training stopped on a non-finite loss; carries epoch/batch coordinates."""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture dimensions. The stage layout is fixed (2 stem convs,
    residual body, max-pool, 2 head convs, 2 fully connected layers); the
    widths, kernels, and strides are configuration."""

    in_channels: int = 3
    in_h: int = 25
    in_w: int = 255
    n_classes: int = 3
    stem_channels: "tuple[int, int]" = (8, 16)
    stem_kernels: "tuple" = ((3, 5), (3, 3))
    stem_strides: "tuple" = ((2, 4), (2, 1))
    stem_paddings: "tuple" = ((1, 2), (1, 1))
    res_blocks: int = 5
    res_kernel: int = 3
    pool: int = 2
    head_channels: "tuple[int, int]" = (16, 8)
    head_kernel: int = 3
    fc_hidden: int = 64

    def __post_init__(self):
        if self.n_classes < 2:
            raise NetworkError(f"need at least 2 material classes, got {self.n_classes}")
        for name in ("stem_channels", "stem_kernels", "stem_strides", "stem_paddings", "head_channels"):
            if len(getattr(self, name)) != 2:
                raise NetworkError(f"{name} must list exactly 2 entries (fixed two-conv stage)")
        if self.res_blocks < 1:
            raise NetworkError(f"res_blocks must be >= 1, got {self.res_blocks}")


def joint_loss(pred_value, target_value, logits, onehot, lambda_cls=1.0):
    """Combined loss: RMSE of the regressed value plus weighted softmax
    cross-entropy of the material logits.

    Returns (loss, dpred_value, dlogits).
    """
    if lambda_cls < 0:
        raise NetworkError(f"lambda_cls must be nonnegative, got {lambda_cls}")
    l_val, d_val = rmse_loss(pred_value, target_value)
    l_cls, d_cls = softmax_xent(logits, onehot)
    return l_val + lambda_cls * l_cls, d_val, lambda_cls * d_cls


class MonitorNet:
    """Fixed-topology network mapping (N, C, H, W) -> ((N,), (N, K))."""

    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype=np.float32):
        self.spec = spec
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        s = spec
        body_ch = s.stem_channels[1]

        self.layers = []
        self.layers.append(Conv2d(s.in_channels, s.stem_channels[0], s.stem_kernels[0],
                                  s.stem_strides[0], s.stem_paddings[0], rng, dtype, "stem1"))
        self.layers.append(ReLU())
        self.layers.append(Conv2d(s.stem_channels[0], s.stem_channels[1], s.stem_kernels[1],
                                  s.stem_strides[1], s.stem_paddings[1], rng, dtype, "stem2"))
        self.layers.append(ReLU())
        for i in range(s.res_blocks):
            self.layers.append(ResidualBlock(body_ch, s.res_kernel, rng, dtype, f"res{i + 1}"))
        self.layers.append(MaxPool2d(s.pool))
        self.layers.append(Conv2d(body_ch, s.head_channels[0], s.head_kernel, 1,
                                  s.head_kernel // 2, rng, dtype, "head1"))
        self.layers.append(ReLU())
        self.layers.append(Conv2d(s.head_channels[0], s.head_channels[1], s.head_kernel, 1,
                                  s.head_kernel // 2, rng, dtype, "head2"))
        self.layers.append(ReLU())
        self.layers.append(Flatten())
        flat = self._infer_flat_size()
        self.layers.append(Dense(flat, s.fc_hidden, rng, dtype, "fc1"))
        self.layers.append(ReLU())
        self.layers.append(Dense(s.fc_hidden, 1 + s.n_classes, rng, dtype, "fc2"))

    def _infer_flat_size(self) -> int:
        """Propagate the input shape through the conv stages; reject the
        first layer whose output collapses."""
        s = self.spec
        c, h, w = s.in_channels, s.in_h, s.in_w
        for layer in self.layers:
            if isinstance(layer, Conv2d):
                ho, wo = layer.out_shape(h, w)
                if ho < 1 or wo < 1:
                    raise NetworkError(
                        f"layer {layer.weight.name}: output collapses to {ho}x{wo} "
                        f"for input {c}x{h}x{w}"
                    )
                c, h, w = layer.out_channels, ho, wo
            elif isinstance(layer, ResidualBlock):
                if layer.conv1.in_channels != c:
                    raise NetworkError(
                        f"layer {layer.conv1.weight.name}: expects {layer.conv1.in_channels} "
                        f"channels, got {c}"
                    )
            elif isinstance(layer, MaxPool2d):
                h, w = h // layer.kh, w // layer.kw
                if h < 1 or w < 1:
                    raise NetworkError(f"max-pool collapses the {h}x{w} feature map")
        return c * h * w

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def forward(self, x: np.ndarray):
        """Returns (value (N,), logits (N, K)); pure for frozen parameters."""
        s = self.spec
        if x.ndim != 4 or x.shape[1:] != (s.in_channels, s.in_h, s.in_w):
            raise NetworkError(
                f"input must be (N, {s.in_channels}, {s.in_h}, {s.in_w}), got {x.shape}"
            )
        out = np.ascontiguousarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out)
        return out[:, 0], out[:, 1:]

    def backward(self, dvalue: np.ndarray, dlogits: np.ndarray):
        dout = np.concatenate([dvalue[:, None], dlogits], axis=1).astype(self.dtype, copy=False)
        first = self.layers[0]
        for layer in reversed(self.layers[1:]):
            dout = layer.backward(dout)
        # nothing upstream consumes the input gradient
        return first.backward(dout, need_dx=False)

    def zero_grad(self):
        for p in self.params():
            p.zero_grad()


def build_network(spec: NetworkSpec, seed: int = 0, dtype=np.float32) -> MonitorNet:
    """Construct and initialize the network; deterministic for a fixed seed."""
    return MonitorNet(spec, seed=seed, dtype=dtype)


@dataclass
class TrainConfig:
    batch_size: int = 256
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 150
    lambda_cls: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise NetworkError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lambda_cls < 0:
            raise NetworkError(f"lambda_cls must be >= 0, got {self.lambda_cls}")
        if self.epochs < 1:
            raise NetworkError(f"epochs must be >= 1, got {self.epochs}")


def _dataset_tensors(dataset: Dataset):
    x = np.stack([s.input for s in dataset.samples]).astype(np.float32)
    y = np.array(
        [s.target_value / dataset.manifest.value_scale for s in dataset.samples],
        dtype=np.float32,
    )
    onehot = np.stack([s.material_onehot for s in dataset.samples]).astype(np.float32)
    return x, y, onehot


def _epoch_eval_loss(net, x, y, onehot, lambda_cls, batch_size=256):
    total, n = 0.0, x.shape[0]
    for i in range(0, n, batch_size):
        xv, yv, ov = x[i: i + batch_size], y[i: i + batch_size], onehot[i: i + batch_size]
        value, logits = net.forward(xv)
        loss, _, _ = joint_loss(value, yv, logits, ov, lambda_cls)
        total += loss * xv.shape[0]
    return total / n


@dataclass
class TrainResult:
    history: "list[dict]"
    final_train_loss: float
    final_val_loss: "float | None"
    epochs_run: int


def train_network(
    net: MonitorNet,
    train_set: Dataset,
    cfg: TrainConfig,
    val_set: "Dataset | None" = None,
    optimizer: "Adam | None" = None,
    start_epoch: int = 0,
    on_epoch=None,
) -> "tuple[TrainResult, Adam]":
    """Run shuffled mini-batch Adam training.

    The last short batch is kept. Shuffling draws from a per-epoch seeded
    generator, so a resumed run replays the identical batch sequence.
    Raises TrainAbort with epoch/batch coordinates on a non-finite loss.
    """
    if not train_set.samples:
        raise NetworkError("training dataset is empty")
    x, y, onehot = _dataset_tensors(train_set)
    val = _dataset_tensors(val_set) if val_set is not None and val_set.samples else None
    opt = optimizer if optimizer is not None else Adam(
        net.params(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )

    history = []
    n = x.shape[0]
    for epoch in range(start_epoch, cfg.epochs):
        order = np.random.default_rng((cfg.seed, epoch)).permutation(n)
        epoch_loss, seen = 0.0, 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start: start + cfg.batch_size]
            xb, yb, ob = x[idx], y[idx], onehot[idx]
            net.zero_grad()
            value, logits = net.forward(xb)
            loss, d_val, d_cls = joint_loss(value, yb, logits, ob, cfg.lambda_cls)
            if not np.isfinite(loss):
                raise TrainAbort(epoch, bi, loss)
            net.backward(d_val, d_cls)
            opt.step()
            epoch_loss += loss * len(idx)
            seen += len(idx)
        entry = {"epoch": epoch, "train_loss": epoch_loss / seen}
        if val is not None:
            entry["val_loss"] = float(_epoch_eval_loss(net, *val, cfg.lambda_cls))
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)

    return (
        TrainResult(
            history=history,
            final_train_loss=history[-1]["train_loss"] if history else float("nan"),
            final_val_loss=history[-1].get("val_loss") if history else None,
            epochs_run=len(history),
        ),
        opt,
    )


def logit_lp(p: np.ndarray) -> np.ndarray:
    """Log-odds log(p) - log(1 - p) on clamped probabilities."""
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.log(p) - np.log(1.0 - p)


@dataclass
class Prediction:
    value: float                 # physical units (um or um^3)
    class_logits: np.ndarray     # raw network outputs, (K,)
    class_probs: np.ndarray      # softmax, (K,)
    material_logit_lp: np.ndarray  # log-odds per class, (K,)
    material_index: int
    material_name: str = ""


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(net: MonitorNet, x: np.ndarray, value_scale: float,
            materials: "list[str] | None" = None) -> Prediction:
    """Single-triplet prediction in physical units."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 3:
        x = x[None]
    if x.shape[0] != 1:
        raise NetworkError(f"predict takes one triplet, got batch of {x.shape[0]}")
    if x.min() < 0.0 or x.max() > 1.0:
        raise NetworkError(f"input values must lie in [0, 1], got [{x.min()}, {x.max()}]")
    value, logits = net.forward(x)
    probs = _softmax(logits[0].astype(np.float64))
    idx = int(np.argmax(probs))
    return Prediction(
        value=float(value[0]) * value_scale,
        class_logits=logits[0].copy(),
        class_probs=probs,
        material_logit_lp=logit_lp(probs),
        material_index=idx,
        material_name=materials[idx] if materials else str(idx),
    )


@dataclass
class EvalReport:
    pairs: np.ndarray            # (N, 2) predicted, measured in physical units
    value_mae: float
    value_rmse: float
    value_max_err: float
    r2: float
    accuracy: float
    logit_lp: np.ndarray         # (N, K)
    median_logit_margin: float
    true_material: np.ndarray    # (N,) int
    pred_material: np.ndarray    # (N,) int
    latency_mean_ms: float
    latency_p50_ms: float
    latency_p95_ms: float
    n_samples: int

    def metrics(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "value_mae": self.value_mae,
            "value_rmse": self.value_rmse,
            "value_max_err": self.value_max_err,
            "r2": self.r2,
            "accuracy": self.accuracy,
            "median_logit_margin": self.median_logit_margin,
            "latency_mean_ms": self.latency_mean_ms,
            "latency_p50_ms": self.latency_p50_ms,
            "latency_p95_ms": self.latency_p95_ms,
        }


def evaluate(
    net: MonitorNet,
    dataset: Dataset,
    batch_size: int = 128,
    latency_iters: int = 100,
    latency_warmup: int = 10,
) -> EvalReport:
    """Validation metrics plus single-triplet forward latency.

    The logit margin of a sample is logit_lp(true class) minus the best
    other class; latency is measured over ``latency_iters`` single-triplet
    forwards after warm-up.
    """
    if not dataset.samples:
        raise NetworkError("evaluation dataset is empty")
    x, y_norm, onehot = _dataset_tensors(dataset)
    scale = dataset.manifest.value_scale

    preds, logits_all = [], []
    for i in range(0, x.shape[0], batch_size):
        value, logits = net.forward(x[i: i + batch_size])
        preds.append(value)
        logits_all.append(logits)
    pred_value = np.concatenate(preds).astype(np.float64) * scale
    logits = np.concatenate(logits_all).astype(np.float64)
    true_value = y_norm.astype(np.float64) * scale

    err = pred_value - true_value
    probs = _softmax(logits)
    lp = logit_lp(probs)
    true_idx = onehot.argmax(axis=1)
    pred_idx = probs.argmax(axis=1)

    lp_true = lp[np.arange(len(lp)), true_idx]
    lp_others = lp.copy()
    lp_others[np.arange(len(lp)), true_idx] = -np.inf
    margins = lp_true - lp_others.max(axis=1)

    ss_tot = float(((true_value - true_value.mean()) ** 2).sum())
    r2 = 1.0 - float((err**2).sum()) / ss_tot if ss_tot > 0 else float("nan")

    times = []
    probe = x[:1]
    for _ in range(latency_warmup):
        net.forward(probe)
    for i in range(latency_iters):
        probe = x[i % x.shape[0]: i % x.shape[0] + 1]
        t0 = time.perf_counter()
        net.forward(probe)
        times.append((time.perf_counter() - t0) * 1e3)
    times = np.array(times)

    return EvalReport(
        pairs=np.column_stack([pred_value, true_value]),
        value_mae=float(np.abs(err).mean()),
        value_rmse=float(np.sqrt((err**2).mean())),
        value_max_err=float(np.abs(err).max()),
        r2=r2,
        accuracy=float((pred_idx == true_idx).mean()),
        logit_lp=lp,
        median_logit_margin=float(np.median(margins)),
        true_material=true_idx,
        pred_material=pred_idx,
        latency_mean_ms=float(times.mean()),
        latency_p50_ms=float(np.percentile(times, 50)),
        latency_p95_ms=float(np.percentile(times, 95)),
        n_samples=len(dataset.samples),
    )


def save_network(path, net: MonitorNet, extra_meta: "dict | None" = None) -> str:
    """Checkpoint the parameters in declaration order with the architecture
    description; returns the file digest."""
    meta = {"kind": "monitor-net", "spec": asdict(net.spec)}
    if extra_meta:
        meta.update(extra_meta)
    arrays = [(p.name, p.data) for p in net.params()]
    return write_checkpoint(path, meta, arrays)


def load_network(path) -> "tuple[MonitorNet, dict]":
    """Rebuild a network from a checkpoint; returns (net, metadata)."""
    meta, arrays = read_checkpoint(path)
    if meta.get("kind") != "monitor-net":
        raise NetworkError(f"{path}: not a monitor-net checkpoint (kind={meta.get('kind')!r})")
    spec_d = dict(meta["spec"])
    for key in ("stem_channels", "stem_kernels", "stem_strides", "stem_paddings", "head_channels"):
        spec_d[key] = tuple(tuple(v) if isinstance(v, list) else v for v in spec_d[key])
    net = MonitorNet(NetworkSpec(**spec_d))
    params = net.params()
    if len(params) != len(arrays):
        raise NetworkError(
            f"{path}: checkpoint has {len(arrays)} arrays, architecture needs {len(params)}"
        )
    for p, (arr, desc) in zip(params, zip(arrays, meta["arrays"])):
        if tuple(p.data.shape) != tuple(arr.shape):
            raise NetworkError(
                f"{path}: parameter {desc['name']} shape {arr.shape} does not match "
                f"architecture shape {p.data.shape}"
            )
        p.data = arr.astype(np.float32)
    return net, meta
