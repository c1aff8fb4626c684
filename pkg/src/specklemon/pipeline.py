"""Frame preprocessing, triplet assembly, and dataset persistence.

Camera frames are box-averaged down, row-cropped to the network height,
min-max normalized to [0, 1], and stacked in threes (consecutive frames as
channels). Datasets persist in a single binary container:

    magic "SPKL1\\n"
    4-byte little-endian manifest length
    manifest JSON (UTF-8, sorted keys)
    payload: per sample, little-endian float32 -
        input (3 * frame_h * frame_w), target_value (1), one-hot (K)
    32-byte SHA-256 over everything above
"""

import csv
import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineError",
    "DatasetError",
    "DatasetVersionError",
    "DatasetTruncatedError",
    "DatasetChecksumError",
    "LabeledSample",
    "DatasetManifest",
    "Dataset",
    "downsample_box",
    "normalize01",
    "assemble_triplets",
    "write_dataset",
    "read_dataset",
    "split_dataset",
    "write_labels_csv",
]

MAGIC = b"SPKL1\n"
SCHEMA_VERSION = 1
FRAMES_PER_SAMPLE = 3


class PipelineError(ValueError):
    """Preprocessing contract violation."""


class DatasetError(Exception):
    """Base class for dataset-file failures."""


class DatasetVersionError(DatasetError):
    """File magic or schema version not recognized."""


class DatasetTruncatedError(DatasetError):
    """File ends before the declared payload and checksum."""


class DatasetChecksumError(DatasetError):
    """Stored SHA-256 does not match the file contents."""


def downsample_box(raw: np.ndarray, factor: int, target_h: int) -> np.ndarray:
    """Non-overlapping factor x factor box means, then center-crop rows.

    A 4080x480 camera frame with factor 16 and target_h 25 reduces to
    255x25 (width x height).
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise PipelineError(f"expected a 2-D frame, got shape {raw.shape}")
    if factor < 1:
        raise PipelineError(f"factor must be >= 1, got {factor}")
    h, w = raw.shape
    if w % factor != 0:
        raise PipelineError(f"width {w} is not divisible by box factor {factor}")
    if h % factor != 0:
        raise PipelineError(f"height {h} is not divisible by box factor {factor}")
    hb, wb = h // factor, w // factor
    if hb < target_h:
        raise PipelineError(
            f"height {h} / factor {factor} = {hb} rows < target_h {target_h}"
        )
    means = raw.reshape(hb, factor, wb, factor).mean(axis=(1, 3))
    start = (hb - target_h) // 2
    return means[start: start + target_h, :]


def normalize01(img: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant image maps to all zeros."""
    img = np.asarray(img, dtype=np.float64)
    lo = img.min()
    hi = img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


@dataclass(frozen=True)
class LabeledSample:
    """Three consecutive normalized frames plus the regression target and
    the one-hot material label."""

    input: np.ndarray          # (3, H, W) float32 in [0, 1]
    target_value: float
    material_onehot: np.ndarray  # (K,) float32

    def __post_init__(self):
        x = np.ascontiguousarray(self.input, dtype=np.float32)
        if x.ndim != 3 or x.shape[0] != FRAMES_PER_SAMPLE:
            raise PipelineError(f"sample input must be (3, H, W), got {x.shape}")
        if x.min() < 0.0 or x.max() > 1.0:
            raise PipelineError(
                f"sample values must lie in [0, 1], got [{x.min()}, {x.max()}]"
            )
        if not (np.isfinite(self.target_value) and self.target_value >= 0):
            raise PipelineError(f"target_value must be finite and >= 0, got {self.target_value}")
        onehot = np.ascontiguousarray(self.material_onehot, dtype=np.float32)
        if onehot.ndim != 1 or np.count_nonzero(onehot == 1.0) != 1 or onehot.sum() != 1.0:
            raise PipelineError(f"material_onehot must have a single unit entry, got {onehot}")
        object.__setattr__(self, "input", x)
        object.__setattr__(self, "material_onehot", onehot)
        object.__setattr__(self, "target_value", float(self.target_value))

    @property
    def material_index(self) -> int:
        return int(np.argmax(self.material_onehot))


@dataclass
class DatasetManifest:
    """Everything needed to interpret the payload and reproduce the build."""

    mode: str                      # "groove" | "drill"
    materials: "list[str]"
    sample_count: int
    frame_h: int
    frame_w: int
    value_unit: str                # "um" | "um3"
    value_scale: float             # regression targets are value / value_scale
    value_range: "tuple[float, float]" = (0.0, 0.0)
    schema_version: int = SCHEMA_VERSION
    seeds: "dict" = field(default_factory=dict)
    split_fraction: float = 0.8
    preprocessing: "dict" = field(default_factory=dict)
    runs: "list[dict]" = field(default_factory=list)
    samples_meta: "list[dict]" = field(default_factory=list)

    @property
    def n_materials(self) -> int:
        return len(self.materials)

    def to_json(self) -> str:
        d = asdict(self)
        d["value_range"] = list(d["value_range"])
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        d = json.loads(text)
        d["value_range"] = tuple(d["value_range"])
        return cls(**d)


@dataclass
class Dataset:
    samples: "list[LabeledSample]"
    manifest: DatasetManifest

    def __post_init__(self):
        if len(self.samples) != self.manifest.sample_count:
            raise PipelineError(
                f"manifest declares {self.manifest.sample_count} samples, "
                f"payload has {len(self.samples)}"
            )


def assemble_triplets(
    frames,
    labels,
    idle_frames: int,
    stride: int = 1,
    cap: int = 10,
    material_onehot=None,
) -> "list[LabeledSample]":
    """Slide 3-frame windows over the processed part of a sequence.

    Windows starting before ``idle_frames`` are excluded; windows advance by
    ``stride`` and at most ``cap`` are kept. Each sample is labeled with the
    value at its last frame.
    """
    if stride < 1:
        raise PipelineError(f"stride must be >= 1, got {stride}")
    if cap < 1:
        raise PipelineError(f"cap must be >= 1, got {cap}")
    frames = list(frames)
    labels = np.asarray(labels, dtype=np.float64)
    if len(labels) != len(frames):
        raise PipelineError(f"{len(frames)} frames but {len(labels)} labels")
    n = len(frames)
    if n < idle_frames + FRAMES_PER_SAMPLE:
        logger.warning(
            "sequence of %d frames too short for triplets after %d idle frames",
            n, idle_frames,
        )
        return []
    if material_onehot is None:
        material_onehot = np.array([1.0], dtype=np.float32)

    samples = []
    for start in range(idle_frames, n - FRAMES_PER_SAMPLE + 1, stride):
        end = start + FRAMES_PER_SAMPLE - 1
        stack = np.stack([np.asarray(frames[i], dtype=np.float32) for i in range(start, end + 1)])
        samples.append(LabeledSample(stack, float(labels[end]), material_onehot))
        if len(samples) >= cap:
            break
    return samples


def _sample_record_floats(manifest: DatasetManifest) -> int:
    return FRAMES_PER_SAMPLE * manifest.frame_h * manifest.frame_w + 1 + manifest.n_materials


def write_dataset(dataset: Dataset, path) -> str:
    """Serialize to the SPKL1 container; returns the payload SHA-256 hex."""
    manifest_bytes = dataset.manifest.to_json().encode("utf-8")
    hasher = hashlib.sha256()
    with open(path, "wb") as fh:
        for chunk in (MAGIC, struct.pack("<I", len(manifest_bytes)), manifest_bytes):
            fh.write(chunk)
            hasher.update(chunk)
        for sample in dataset.samples:
            rec = (
                sample.input.astype("<f4").tobytes()
                + struct.pack("<f", sample.target_value)
                + sample.material_onehot.astype("<f4").tobytes()
            )
            fh.write(rec)
            hasher.update(rec)
        digest = hasher.digest()
        fh.write(digest)
    return digest.hex()


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4:
        raise DatasetTruncatedError(f"{path}: file shorter than header")
    if blob[: len(MAGIC)] != MAGIC:
        if blob[:4] == MAGIC[:4]:
            raise DatasetVersionError(
                f"{path}: unrecognized container version {blob[:6]!r} (expected {MAGIC!r})"
            )
        raise DatasetVersionError(f"{path}: not a SPKL dataset file")
    (mlen,) = struct.unpack_from("<I", blob, len(MAGIC))
    header_end = len(MAGIC) + 4 + mlen
    if len(blob) < header_end:
        raise DatasetTruncatedError(f"{path}: manifest truncated")
    manifest = DatasetManifest.from_json(blob[len(MAGIC) + 4: header_end].decode("utf-8"))
    if manifest.schema_version != SCHEMA_VERSION:
        raise DatasetVersionError(
            f"{path}: schema version {manifest.schema_version} not supported "
            f"(expected {SCHEMA_VERSION})"
        )
    rec_floats = _sample_record_floats(manifest)
    payload_len = manifest.sample_count * rec_floats * 4
    expected = header_end + payload_len + 32
    if len(blob) < expected:
        raise DatasetTruncatedError(
            f"{path}: expected {expected} bytes, found {len(blob)}"
        )
    digest = hashlib.sha256(blob[: header_end + payload_len]).digest()
    if digest != blob[header_end + payload_len: expected]:
        raise DatasetChecksumError(f"{path}: SHA-256 mismatch; file corrupted")

    floats = np.frombuffer(
        blob, dtype="<f4", count=manifest.sample_count * rec_floats, offset=header_end
    ).reshape(manifest.sample_count, rec_floats)
    k = manifest.n_materials
    in_floats = FRAMES_PER_SAMPLE * manifest.frame_h * manifest.frame_w
    samples = []
    for row in floats:
        samples.append(
            LabeledSample(
                row[:in_floats].reshape(FRAMES_PER_SAMPLE, manifest.frame_h, manifest.frame_w).copy(),
                float(row[in_floats]),
                row[in_floats + 1: in_floats + 1 + k].copy(),
            )
        )
    return Dataset(samples, manifest)


def split_dataset(dataset: Dataset, fraction: float, seed: int) -> "tuple[Dataset, Dataset]":
    """Deterministic run-level train/validation split.

    Every triplet of a run lands on the same side so overlapping windows
    cannot leak across the split.
    """
    if not 0.0 < fraction < 1.0:
        raise PipelineError(f"split fraction must be in (0, 1), got {fraction}")
    meta = dataset.manifest.samples_meta
    if len(meta) != len(dataset.samples):
        raise PipelineError("manifest samples_meta does not cover every sample")
    run_ids = list(dict.fromkeys(m["run_id"] for m in meta))
    if len(run_ids) < 2:
        raise PipelineError(f"need at least 2 runs to split, got {len(run_ids)}")
    order = np.random.default_rng(seed).permutation(len(run_ids))
    n_train = min(max(int(fraction * len(run_ids)), 1), len(run_ids) - 1)
    train_runs = {run_ids[i] for i in order[:n_train]}

    def subset(keep: "set") -> Dataset:
        idx = [i for i, m in enumerate(meta) if m["run_id"] in keep]
        sub_samples = [dataset.samples[i] for i in idx]
        sub_meta = [meta[i] for i in idx]
        sub_runs = [r for r in dataset.manifest.runs if r["run_id"] in keep]
        manifest = replace(
            dataset.manifest,
            sample_count=len(sub_samples),
            samples_meta=sub_meta,
            runs=sub_runs,
        )
        return Dataset(sub_samples, manifest)

    val_runs = set(run_ids) - train_runs
    return subset(train_runs), subset(val_runs)


def write_labels_csv(manifest: DatasetManifest, path) -> None:
    """Per-frame label export, one row per (run, frame)."""
    value_col = "depth_um" if manifest.mode == "groove" else "volume_um3"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "frame_idx", value_col, "material"])
        for run in manifest.runs:
            for k, label in enumerate(run["frame_labels"]):
                writer.writerow([run["run_id"], k, "" if label is None else repr(float(label)), run["material"]])
