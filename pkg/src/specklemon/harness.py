"""Command implementations: synthesize, train, evaluate, bench, predict.

These are plain functions over the core modules; the HTTP service and the
CLI are both thin wrappers around them. Every command is deterministic
given config plus seeds (bench timings excepted), and writes only under
the configured output directory.
"""

import csv
import os
import platform
import time
from pathlib import Path

import numpy as np
import yaml

from .ablation import (
    ProcessParams,
    build_drill_trajectory,
    build_groove_trajectory,
    build_volume_label_grid,
    interpolate_volume,
    write_volume_grid_csv,
)
from .config import DEPTH_SCALE_UM, HarnessConfig
from .network import (
    MonitorNet,
    NetworkError,
    NetworkSpec,
    TrainConfig,
    build_network,
    evaluate,
    load_network,
    predict,
    save_network,
    train_network,
)
from .nn import Adam, read_checkpoint, write_checkpoint
from .optics import render_frame
from .pipeline import (
    Dataset,
    DatasetManifest,
    LabeledSample,
    downsample_box,
    normalize01,
    read_dataset,
    split_dataset,
    write_dataset,
    write_labels_csv,
)
from .surface import RoughnessSpec, synthesize_rough_surface

__all__ = [
    "HarnessError",
    "cmd_synth",
    "cmd_train",
    "cmd_eval",
    "cmd_bench",
    "cmd_predict",
    "triplet_end_indices",
    "derive_seed",
    "THRESHOLD_KEYS",
]


class HarnessError(RuntimeError):
    """Command-level failure with a user-facing message."""


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from integer parts."""
    state = np.random.SeedSequence(list(parts)).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def triplet_end_indices(n_frames: int, idle_frames: int, stride: int, cap: int) -> "list[int]":
    """Last-frame indices of 3-frame windows starting at or after idle_frames."""
    ends = []
    for start in range(idle_frames, n_frames - 2, stride):
        ends.append(start + 2)
        if len(ends) >= cap:
            break
    return ends


def _onehot(index: int, k: int) -> np.ndarray:
    v = np.zeros(k, dtype=np.float32)
    v[index] = 1.0
    return v


def _render_samples(cfg, optical, material, mat_idx, traj, run_seed, beam_start, ends):
    """Render exactly the frames the triplet windows need and stack them."""
    pp = cfg.preprocessing
    surface = synthesize_rough_surface(
        RoughnessSpec(cfg.surface.ra_um, material.corr_len_um, derive_seed(run_seed, 0)),
        optical.grid_n, optical.grid_n, optical.pitch_um,
    )
    texture = synthesize_rough_surface(
        RoughnessSpec(1.0, material.texture_corr_x_um, derive_seed(run_seed, 1),
                      corr_len_y_um=material.texture_corr_y_um),
        optical.grid_n, optical.grid_n, optical.pitch_um,
    )
    needed = sorted({k for e in ends for k in (e - 2, e - 1, e)})
    processed = {}
    for k in needed:
        frame = render_frame(surface, traj, optical, k, beam_start, texture,
                             noise_seed=derive_seed(run_seed, 2))
        processed[k] = normalize01(
            downsample_box(frame.data, pp.box_factor, pp.target_rows)
        ).astype(np.float32)
    samples = []
    for e in ends:
        samples.append(np.stack([processed[e - 2], processed[e - 1], processed[e]]))
    return samples


def _synth_groove(cfg: HarnessConfig, out: Path, dataset_seed: int) -> dict:
    optical = cfg.optics.to_optical()
    materials = cfg.material_specs()
    g = cfg.groove
    ds = cfg.dataset
    dt = optical.frame_interval_ms

    samples, samples_meta, runs = [], [], []
    run_index = 0
    for mat_idx, material in enumerate(materials):
        for energy in g.energies_uJ:
            for speed in g.speeds_mm_s:
                run_id = f"groove-{material.name}-e{energy:g}-v{speed:g}"
                params = ProcessParams(pulse_energy_uJ=energy, scan_speed_mm_s=speed,
                                       material_id=mat_idx)
                traj = build_groove_trajectory(
                    params, material, g.n_frames, ds.idle_frames, dt,
                    cfg.process.spot_um, cfg.process.rep_rate_khz, cfg.surface.ra_um,
                )
                ends = triplet_end_indices(g.n_frames, ds.idle_frames,
                                           g.triplet_stride, g.triplet_cap)
                beam_start = (0.0, -(g.n_frames - 1) * speed * dt / 2.0)
                run_seed = derive_seed(dataset_seed, run_index)
                stacks = _render_samples(cfg, optical, material, mat_idx, traj,
                                         run_seed, beam_start, ends)
                first = len(samples)
                onehot = _onehot(mat_idx, len(materials))
                for e, stack in zip(ends, stacks):
                    samples.append(LabeledSample(stack, float(traj.depth_um[e]), onehot))
                    samples_meta.append({"run_id": run_id, "end_frame": e, "material": mat_idx})
                runs.append({
                    "run_id": run_id,
                    "material": material.name,
                    "material_index": mat_idx,
                    "pulse_energy_uJ": energy,
                    "scan_speed_mm_s": speed,
                    "n_frames": g.n_frames,
                    "idle_frames": ds.idle_frames,
                    "frame_labels": [float(v) for v in traj.depth_um],
                    "first_sample": first,
                    "n_samples": len(ends),
                })
                run_index += 1

    targets = [s.target_value for s in samples]
    manifest = DatasetManifest(
        mode="groove",
        materials=[m.name for m in materials],
        sample_count=len(samples),
        frame_h=cfg.preprocessing.target_rows,
        frame_w=cfg.optics.detector_w_px // cfg.preprocessing.box_factor,
        value_unit="um",
        value_scale=DEPTH_SCALE_UM,
        value_range=(min(targets), max(targets)),
        seeds={"dataset": dataset_seed, "split": ds.split_seed},
        split_fraction=ds.split_fraction,
        preprocessing=cfg.preprocessing.model_dump(),
        runs=runs,
        samples_meta=samples_meta,
    )
    path = out / "groove.spkl"
    digest = write_dataset(Dataset(samples, manifest), path)
    labels_csv = out / "groove_labels.csv"
    write_labels_csv(manifest, labels_csv)
    return {
        "mode": "groove", "path": str(path), "sha256": digest,
        "samples": len(samples), "runs": len(runs), "labels_csv": str(labels_csv),
    }


def _synth_drill(cfg: HarnessConfig, out: Path, dataset_seed: int) -> dict:
    optical = cfg.optics.to_optical()
    materials = cfg.material_specs()
    d = cfg.drill
    ds = cfg.dataset
    n_min, n_max = d.pulse_counts[0], d.pulse_counts[-1]
    n_frames = ds.idle_frames + (n_max + d.pulses_per_frame - 1) // d.pulses_per_frame

    grids = {}
    grid_csvs = []
    for material in materials:
        grids[material.name] = build_volume_label_grid(material, d.energies_uJ, d.pulse_counts)
        csv_path = out / f"volume_grid_{material.name}.csv"
        write_volume_grid_csv(grids[material.name], csv_path)
        grid_csvs.append(str(csv_path))
    value_scale = max(float(g.volumes_um3.max()) for g in grids.values())
    if value_scale <= 0:
        raise HarnessError("drill sweep produced an all-zero volume grid; check thresholds")

    samples, samples_meta, runs = [], [], []
    run_index = 0
    for mat_idx, material in enumerate(materials):
        grid = grids[material.name]
        for energy in d.energies_uJ:
            run_id = f"drill-{material.name}-e{energy:g}"
            params = ProcessParams(pulse_energy_uJ=energy, n_pulses=n_max, material_id=mat_idx)
            traj = build_drill_trajectory(params, material, n_frames, ds.idle_frames,
                                          d.pulses_per_frame, cfg.surface.ra_um)
            # window ends stay inside the labeled pulse range [n_min, n_max]
            k_lo = ds.idle_frames + (n_min + d.pulses_per_frame - 1) // d.pulses_per_frame - 1
            idle_eff = max(ds.idle_frames, k_lo - 2)
            n_starts = (n_frames - 2) - idle_eff
            if n_starts < 1:
                raise HarnessError(f"{run_id}: no room for triplets in the labeled pulse range")
            stride = d.triplet_stride
            if stride == 0:
                stride = max(1, (n_starts - 1) // max(d.triplet_cap - 1, 1))
            ends = triplet_end_indices(n_frames, idle_eff, stride, d.triplet_cap)

            labels = {}
            for e in ends:
                n_pulses = int(traj.pulses[e])
                labels[e] = interpolate_volume(grid, energy, n_pulses)
            run_seed = derive_seed(dataset_seed, 100000 + run_index)
            stacks = _render_samples(cfg, optical, material, mat_idx, traj,
                                     run_seed, (0.0, 0.0), ends)
            first = len(samples)
            onehot = _onehot(mat_idx, len(materials))
            for e, stack in zip(ends, stacks):
                samples.append(LabeledSample(stack, labels[e], onehot))
                samples_meta.append({"run_id": run_id, "end_frame": e, "material": mat_idx})
            frame_labels = []
            for k in range(n_frames):
                n_pulses = int(traj.pulses[k])
                if n_min <= n_pulses <= n_max:
                    frame_labels.append(float(interpolate_volume(grid, energy, n_pulses)))
                else:
                    frame_labels.append(None)
            runs.append({
                "run_id": run_id,
                "material": material.name,
                "material_index": mat_idx,
                "pulse_energy_uJ": energy,
                "n_pulses": n_max,
                "n_frames": n_frames,
                "idle_frames": ds.idle_frames,
                "frame_labels": frame_labels,
                "first_sample": first,
                "n_samples": len(ends),
            })
            run_index += 1

    targets = [s.target_value for s in samples]
    manifest = DatasetManifest(
        mode="drill",
        materials=[m.name for m in materials],
        sample_count=len(samples),
        frame_h=cfg.preprocessing.target_rows,
        frame_w=cfg.optics.detector_w_px // cfg.preprocessing.box_factor,
        value_unit="um3",
        value_scale=value_scale,
        value_range=(min(targets), max(targets)),
        seeds={"dataset": dataset_seed, "split": ds.split_seed},
        split_fraction=ds.split_fraction,
        preprocessing=cfg.preprocessing.model_dump(),
        runs=runs,
        samples_meta=samples_meta,
    )
    path = out / "drill.spkl"
    digest = write_dataset(Dataset(samples, manifest), path)
    labels_csv = out / "drill_labels.csv"
    write_labels_csv(manifest, labels_csv)
    return {
        "mode": "drill", "path": str(path), "sha256": digest,
        "samples": len(samples), "runs": len(runs), "labels_csv": str(labels_csv),
        "volume_grids": grid_csvs,
    }


def cmd_synth(cfg: HarnessConfig, out_dir=None, seed=None, mode: str = "both") -> dict:
    """Synthesize the configured sweeps into dataset files."""
    if mode not in ("both", "groove", "drill"):
        raise HarnessError(f"unknown synth mode {mode!r}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset_seed = cfg.dataset.seed if seed is None else int(seed)

    datasets = []
    if cfg.groove is not None and mode in ("both", "groove"):
        datasets.append(_synth_groove(cfg, out, dataset_seed))
    if cfg.drill is not None and mode in ("both", "drill"):
        datasets.append(_synth_drill(cfg, out, dataset_seed))
    if not datasets:
        raise HarnessError(f"config has no sweep for mode {mode!r}")
    return {"out_dir": str(out), "seed": dataset_seed, "datasets": datasets}


def _network_spec(cfg: HarnessConfig, manifest: DatasetManifest) -> NetworkSpec:
    n = cfg.network
    return NetworkSpec(
        in_channels=3,
        in_h=manifest.frame_h,
        in_w=manifest.frame_w,
        n_classes=manifest.n_materials,
        stem_channels=tuple(n.stem_channels),
        stem_kernels=tuple(tuple(k) for k in n.stem_kernels),
        stem_strides=tuple(tuple(s) for s in n.stem_strides),
        stem_paddings=tuple(tuple(p) for p in n.stem_paddings),
        res_blocks=n.res_blocks,
        res_kernel=n.res_kernel,
        pool=n.pool,
        head_channels=tuple(n.head_channels),
        head_kernel=n.head_kernel,
        fc_hidden=n.fc_hidden,
    )


def _opt_sidecar_path(checkpoint_path) -> Path:
    return Path(str(checkpoint_path) + ".opt")


def cmd_train(cfg: HarnessConfig, dataset_path, out_dir=None, seed=None, resume=False) -> dict:
    """Train on a dataset file; writes checkpoint, optimizer sidecar, and
    the per-epoch loss curve."""
    dataset_path = Path(dataset_path)
    if not dataset_path.exists():
        raise HarnessError(f"dataset file not found: {dataset_path}")
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = read_dataset(dataset_path)
    manifest = dataset.manifest
    train_set, val_set = split_dataset(dataset, manifest.split_fraction,
                                       manifest.seeds.get("split", cfg.dataset.split_seed))

    t = cfg.train
    train_cfg = TrainConfig(
        batch_size=t.batch_size, lr=t.lr, beta1=t.beta1, beta2=t.beta2, eps=t.eps,
        epochs=t.epochs, lambda_cls=t.lambda_cls,
        seed=t.seed if seed is None else int(seed),
    )
    spec = _network_spec(cfg, manifest)
    ckpt_path = out / f"monitor_{manifest.mode}.ckpt"
    curve_path = out / f"loss_curve_{manifest.mode}.csv"

    start_epoch = 0
    optimizer = None
    prior_history = []
    if resume:
        if not ckpt_path.exists():
            raise HarnessError(f"cannot resume: checkpoint {ckpt_path} does not exist")
        net, meta = load_network(ckpt_path)
        if tuple(net.spec.__dict__[k] for k in ("in_h", "in_w", "n_classes")) != (
            manifest.frame_h, manifest.frame_w, manifest.n_materials
        ):
            raise HarnessError("checkpoint architecture does not match the dataset")
        start_epoch = int(meta.get("epochs_done", 0))
        prior_history = meta.get("history", [])
        opt_path = _opt_sidecar_path(ckpt_path)
        optimizer = Adam(net.params(), lr=train_cfg.lr, beta1=train_cfg.beta1,
                         beta2=train_cfg.beta2, eps=train_cfg.eps)
        if opt_path.exists():
            ometa, arrays = read_checkpoint(opt_path)
            half = len(arrays) // 2
            optimizer.load_state_dict(
                {"t": ometa["t"], "m": arrays[:half], "v": arrays[half:]}
            )
        if start_epoch >= train_cfg.epochs:
            raise HarnessError(
                f"checkpoint already trained for {start_epoch} epochs "
                f">= configured {train_cfg.epochs}"
            )
    else:
        net = build_network(spec, seed=train_cfg.seed)

    t0 = time.perf_counter()
    result, optimizer = train_network(
        net, train_set, train_cfg, val_set=val_set,
        optimizer=optimizer, start_epoch=start_epoch,
    )
    wall_s = time.perf_counter() - t0

    history = prior_history + result.history
    save_network(ckpt_path, net, extra_meta={
        "dataset_mode": manifest.mode,
        "materials": manifest.materials,
        "value_unit": manifest.value_unit,
        "value_scale": manifest.value_scale,
        "preprocessing": manifest.preprocessing,
        "train_seed": train_cfg.seed,
        "epochs_done": train_cfg.epochs,
        "history": history,
    })
    opt_state = optimizer.state_dict()
    write_checkpoint(
        _opt_sidecar_path(ckpt_path),
        {"kind": "adam-state", "t": opt_state["t"]},
        [(f"m.{i}", m) for i, m in enumerate(opt_state["m"])]
        + [(f"v.{i}", v) for i, v in enumerate(opt_state["v"])],
    )
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for entry in history:
            writer.writerow([entry["epoch"], repr(entry["train_loss"]),
                             repr(entry.get("val_loss", ""))])

    return {
        "checkpoint": str(ckpt_path),
        "loss_curve_csv": str(curve_path),
        "epochs": train_cfg.epochs,
        "final_train_loss": result.final_train_loss,
        "final_val_loss": result.final_val_loss,
        "train_samples": len(train_set.samples),
        "val_samples": len(val_set.samples),
        "wall_time_s": wall_s,
    }


THRESHOLD_KEYS = (
    "max_value_mae",
    "max_value_mae_frac_of_range",
    "max_val_train_mae_ratio",
    "min_accuracy",
    "min_median_logit_margin",
    "min_r2",
    "max_latency_p95_ms",
)


def _check_thresholds(thresholds: dict, metrics: dict, value_range: float,
                      train_mae: "float | None") -> "tuple[bool, list[dict]]":
    unknown = set(thresholds) - set(THRESHOLD_KEYS)
    if unknown:
        raise HarnessError(f"unknown threshold keys: {sorted(unknown)}; known: {THRESHOLD_KEYS}")
    results = []

    def add(name, ok, actual, bound):
        results.append({"name": name, "passed": bool(ok), "actual": actual, "bound": bound})

    if "max_value_mae" in thresholds:
        add("max_value_mae", metrics["value_mae"] <= thresholds["max_value_mae"],
            metrics["value_mae"], thresholds["max_value_mae"])
    if "max_value_mae_frac_of_range" in thresholds:
        bound = thresholds["max_value_mae_frac_of_range"] * value_range
        add("max_value_mae_frac_of_range", metrics["value_mae"] <= bound,
            metrics["value_mae"], bound)
    if "max_val_train_mae_ratio" in thresholds:
        if train_mae is None or train_mae == 0:
            ratio = float("inf") if (train_mae == 0 and metrics["value_mae"] > 0) else 0.0
        else:
            ratio = metrics["value_mae"] / train_mae
        add("max_val_train_mae_ratio", ratio <= thresholds["max_val_train_mae_ratio"],
            ratio, thresholds["max_val_train_mae_ratio"])
    if "min_accuracy" in thresholds:
        add("min_accuracy", metrics["accuracy"] >= thresholds["min_accuracy"],
            metrics["accuracy"], thresholds["min_accuracy"])
    if "min_median_logit_margin" in thresholds:
        add("min_median_logit_margin",
            metrics["median_logit_margin"] >= thresholds["min_median_logit_margin"],
            metrics["median_logit_margin"], thresholds["min_median_logit_margin"])
    if "min_r2" in thresholds:
        add("min_r2", metrics["r2"] >= thresholds["min_r2"], metrics["r2"], thresholds["min_r2"])
    if "max_latency_p95_ms" in thresholds:
        add("max_latency_p95_ms", metrics["latency_p95_ms"] <= thresholds["max_latency_p95_ms"],
            metrics["latency_p95_ms"], thresholds["max_latency_p95_ms"])
    return all(r["passed"] for r in results), results


def _hardware_string() -> str:
    cpu = platform.processor() or platform.machine() or "unknown-cpu"
    return f"{platform.platform()}; {cpu}; {os.cpu_count()} logical cores"


def cmd_eval(checkpoint_path, dataset_path, thresholds: "dict | None" = None,
             out_dir=None, split: str = "val") -> dict:
    """Evaluate a checkpoint; writes the per-sample CSV and a YAML summary.

    ``passed`` is None without thresholds, otherwise the AND of every
    supplied threshold check.
    """
    checkpoint_path, dataset_path = Path(checkpoint_path), Path(dataset_path)
    for p in (checkpoint_path, dataset_path):
        if not p.exists():
            raise HarnessError(f"file not found: {p}")
    if split not in ("val", "train", "all"):
        raise HarnessError(f"unknown split {split!r}")
    out = Path(out_dir if out_dir is not None else ".")
    out.mkdir(parents=True, exist_ok=True)

    net, meta = load_network(checkpoint_path)
    dataset = read_dataset(dataset_path)
    manifest = dataset.manifest
    if net.spec.n_classes != manifest.n_materials:
        raise HarnessError(
            f"material count mismatch: checkpoint has K={net.spec.n_classes}, "
            f"dataset has K={manifest.n_materials}"
        )
    if (net.spec.in_h, net.spec.in_w) != (manifest.frame_h, manifest.frame_w):
        raise HarnessError(
            f"frame shape mismatch: checkpoint expects "
            f"{net.spec.in_h}x{net.spec.in_w}, dataset provides "
            f"{manifest.frame_h}x{manifest.frame_w}"
        )

    train_set, val_set = split_dataset(dataset, manifest.split_fraction,
                                       manifest.seeds.get("split", 0))
    part = {"val": val_set, "train": train_set, "all": dataset}[split]
    report = evaluate(net, part)
    train_mae = None
    if split == "val":
        train_report = evaluate(net, train_set, latency_iters=1, latency_warmup=0)
        train_mae = train_report.value_mae

    k = manifest.n_materials
    report_csv = out / f"eval_{manifest.mode}_{split}.csv"
    with open(report_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "pred_value", "true_value", "true_material", "pred_material"]
            + [f"logit_{i}" for i in range(k)] + ["logit_margin", "margin_db"]
        )
        for i in range(report.n_samples):
            lp = report.logit_lp[i]
            t_idx = int(report.true_material[i])
            lp_true = lp[t_idx]
            lp_next = max(lp[j] for j in range(k) if j != t_idx)
            margin = lp_true - lp_next
            margin_db = (
                10.0 * np.log10(lp_true / lp_next) if lp_true > 0 and lp_next > 0 else ""
            )
            writer.writerow(
                [i, repr(float(report.pairs[i, 0])), repr(float(report.pairs[i, 1])),
                 manifest.materials[t_idx],
                 manifest.materials[int(report.pred_material[i])]]
                + [repr(float(v)) for v in lp]
                + [repr(float(margin)), margin_db if margin_db == "" else repr(float(margin_db))]
            )

    metrics = report.metrics()
    metrics["value_unit"] = manifest.value_unit
    metrics["value_range"] = [float(manifest.value_range[0]), float(manifest.value_range[1])]
    if train_mae is not None:
        metrics["train_value_mae"] = train_mae

    passed, threshold_results = (None, [])
    if thresholds:
        value_range = manifest.value_range[1] - manifest.value_range[0]
        passed, threshold_results = _check_thresholds(thresholds, metrics, value_range, train_mae)

    summary = {
        "checkpoint": str(checkpoint_path),
        "dataset": str(dataset_path),
        "split": split,
        "metrics": metrics,
        "thresholds": threshold_results,
        "passed": passed,
        "hardware": _hardware_string(),
    }
    summary_path = out / f"eval_{manifest.mode}_{split}_summary.yaml"
    with open(summary_path, "w") as fh:
        yaml.safe_dump(summary, fh, sort_keys=True)

    return {
        "metrics": metrics,
        "report_csv": str(report_csv),
        "summary": str(summary_path),
        "passed": passed,
        "threshold_results": threshold_results,
    }


def cmd_bench(checkpoint_path, iterations: int = 200, warmup: int = 20,
              out_dir=None) -> dict:
    """Single-triplet forward latency of a checkpointed network."""
    if iterations < 100:
        raise HarnessError(f"need at least 100 iterations for stable stats, got {iterations}")
    if warmup < 10:
        raise HarnessError(f"need at least 10 warm-up iterations, got {warmup}")
    checkpoint_path = Path(checkpoint_path)
    if not checkpoint_path.exists():
        raise HarnessError(f"file not found: {checkpoint_path}")
    net, meta = load_network(checkpoint_path)
    rng = np.random.default_rng(0)
    x = rng.random((1, net.spec.in_channels, net.spec.in_h, net.spec.in_w), dtype=np.float32)

    for _ in range(warmup):
        net.forward(x)
    times = []
    for _ in range(iterations):
        t0 = time.perf_counter()
        net.forward(x)
        times.append((time.perf_counter() - t0) * 1e3)
    times = np.array(times)

    result = {
        "checkpoint": str(checkpoint_path),
        "iterations": iterations,
        "warmup": warmup,
        "mean_ms": float(times.mean()),
        "p50_ms": float(np.percentile(times, 50)),
        "p95_ms": float(np.percentile(times, 95)),
        "hardware": _hardware_string(),
        "param_count": net.param_count(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = out / "bench.yaml"
        with open(report, "w") as fh:
            yaml.safe_dump(result, fh, sort_keys=True)
        result["report"] = str(report)
    return result


def cmd_predict(checkpoint_path, frames_path) -> dict:
    """Predict on a saved frame stack (.npy, shape (n_frames, H, W)).

    Raw detector frames are box-averaged and normalized with the
    checkpoint's preprocessing constants; frames already at network
    resolution must be normalized to [0, 1]. One prediction is emitted per
    3-frame window (stride 1).
    """
    checkpoint_path, frames_path = Path(checkpoint_path), Path(frames_path)
    for p in (checkpoint_path, frames_path):
        if not p.exists():
            raise HarnessError(f"file not found: {p}")
    net, meta = load_network(checkpoint_path)
    frames = np.load(frames_path)
    if frames.ndim != 3:
        raise HarnessError(f"frames file must hold a (n, H, W) array, got shape {frames.shape}")
    if frames.shape[0] < 3:
        raise HarnessError(f"need at least 3 consecutive frames, got {frames.shape[0]}")

    h, w = net.spec.in_h, net.spec.in_w
    if frames.shape[1:] == (h, w):
        if frames.min() < 0 or frames.max() > 1:
            raise HarnessError(
                "frames at network resolution must be normalized to [0, 1]; "
                "raw frames must come at detector resolution"
            )
        prepped = [np.asarray(f, dtype=np.float32) for f in frames]
    else:
        pp = meta.get("preprocessing", {})
        factor = int(pp.get("box_factor", 1))
        target_rows = int(pp.get("target_rows", h))
        prepped = [
            normalize01(downsample_box(f, factor, target_rows)).astype(np.float32)
            for f in frames
        ]
        if prepped[0].shape != (h, w):
            raise HarnessError(
                f"preprocessed frame shape {prepped[0].shape} does not match the "
                f"network input {h}x{w}"
            )

    materials = meta.get("materials")
    scale = float(meta.get("value_scale", 1.0))
    predictions = []
    for end in range(2, len(prepped)):
        stack = np.stack(prepped[end - 2: end + 1])
        p = predict(net, stack, scale, materials)
        predictions.append({
            "window_end": end,
            "value": p.value,
            "value_unit": meta.get("value_unit", ""),
            "material": p.material_name,
            "material_index": p.material_index,
            "probs": [float(v) for v in p.class_probs],
            "logit_lp": [float(v) for v in p.material_logit_lp],
        })
    return {"n_frames": int(frames.shape[0]), "predictions": predictions}
