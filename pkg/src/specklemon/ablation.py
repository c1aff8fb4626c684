"""Process parameters -> machined geometry and ground-truth labels.

Material removal follows the usual logarithmic fluence law: removal per
pulse scales with delta * ln(E / E_th) above the ablation threshold and is
zero below it. Grooving multiplies by the effective pulse overlap
spot * f_rep / v; drilling multiplies by the pulse count.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .surface import HeightMap, SurfaceError

__all__ = [
    "AblationError",
    "MaterialSpec",
    "ProcessParams",
    "ProcessTrajectory",
    "VolumeLabelGrid",
    "DEFAULT_MATERIALS",
    "groove_depth",
    "groove_width",
    "crater_geometry",
    "build_groove_trajectory",
    "build_drill_trajectory",
    "build_volume_label_grid",
    "interpolate_volume",
    "ablated_volume",
    "write_volume_grid_csv",
    "read_volume_grid_csv",
]

DEFAULT_SPOT_UM = 15.0       # machining-beam spot diameter on target
DEFAULT_REP_RATE_KHZ = 1.0   # pulse repetition rate


class AblationError(ValueError):
    """Invalid process parameters or incompatible geometry."""


@dataclass(frozen=True)
class MaterialSpec:
    """Per-material simulator constants.

    The optical signature of a material is carried by its base-surface
    correlation length and by the extra roughness texture inside machined
    regions; the removal law is set by (delta, threshold) pairs for the
    grooving and drilling regimes.
    """

    name: str
    corr_len_um: float = 4.0
    texture_mult: float = 0.6
    texture_corr_x_um: float = 1000.0
    texture_corr_y_um: float = 5.0
    groove_delta_um: float = 0.20
    groove_eth_uJ: float = 5.0
    groove_width0_um: float = 25.0
    groove_width_gain: float = 0.0
    drill_delta_um: float = 0.008
    drill_eth_uJ: float = 0.5
    crater_r0_um: float = 15.0
    crater_alpha: float = 0.15


DEFAULT_MATERIALS = [
    MaterialSpec("aluminum", corr_len_um=4.0, texture_corr_y_um=2.0,
                 groove_delta_um=0.20, groove_eth_uJ=5.0),
    MaterialSpec("copper", corr_len_um=8.0, texture_corr_y_um=5.0,
                 groove_delta_um=0.18, groove_eth_uJ=6.0),
    MaterialSpec("nickel", corr_len_um=12.0, texture_corr_y_um=12.0,
                 groove_delta_um=0.16, groove_eth_uJ=7.0),
]


@dataclass(frozen=True)
class ProcessParams:
    """One machining run: energy plus either a scan speed or a pulse count."""

    pulse_energy_uJ: float
    scan_speed_mm_s: "float | None" = None
    n_pulses: "int | None" = None
    material_id: int = 0

    def __post_init__(self):
        if not self.pulse_energy_uJ > 0:
            raise AblationError(f"pulse energy must be positive, got {self.pulse_energy_uJ}")
        if self.scan_speed_mm_s is None and self.n_pulses is None:
            raise AblationError("either scan_speed_mm_s (grooving) or n_pulses (drilling) is required")
        if self.n_pulses is not None and self.n_pulses < 1:
            raise AblationError(f"n_pulses must be >= 1, got {self.n_pulses}")


def groove_depth(
    params: ProcessParams,
    material: MaterialSpec,
    spot_um: float = DEFAULT_SPOT_UM,
    rep_rate_khz: float = DEFAULT_REP_RATE_KHZ,
) -> float:
    """Steady-state groove depth in um.

    depth = delta * ln(E / E_th) * (spot * f_rep / v), clamped at zero below
    threshold. Monotone increasing in E, decreasing in v.
    """
    if params.scan_speed_mm_s is None or params.scan_speed_mm_s <= 0:
        raise AblationError(f"grooving requires a positive scan speed, got {params.scan_speed_mm_s}")
    e_ratio = params.pulse_energy_uJ / material.groove_eth_uJ
    if e_ratio <= 1.0:
        return 0.0
    # scan speed in mm/s equals um/ms; rep rate in kHz equals pulses/ms
    effective_pulses = spot_um * rep_rate_khz / params.scan_speed_mm_s
    return material.groove_delta_um * np.log(e_ratio) * effective_pulses


def groove_width(params: ProcessParams, material: MaterialSpec) -> float:
    """Groove 1/e^2 full width in um; widens logarithmically with energy."""
    e_ratio = params.pulse_energy_uJ / material.groove_eth_uJ
    gain = material.groove_width_gain * np.log(e_ratio) if e_ratio > 1.0 else 0.0
    return material.groove_width0_um * (1.0 + gain)


def crater_geometry(
    params: ProcessParams, material: MaterialSpec, n_pulses: "int | None" = None
) -> "tuple[float, float, float]":
    """(depth_um, radius_um, volume_um3) of a percussion-drilled crater.

    depth = delta * ln(E/E_th) * N; radius = r0 * (1 + alpha * ln N);
    volume is the Gaussian-crater integral depth * pi * radius^2 / 2.
    Below threshold all three are zero (not an error).
    """
    n = n_pulses if n_pulses is not None else params.n_pulses
    if n is None or n < 1:
        raise AblationError(f"drilling requires n_pulses >= 1, got {n}")
    e_ratio = params.pulse_energy_uJ / material.drill_eth_uJ
    if e_ratio <= 1.0:
        return 0.0, 0.0, 0.0
    depth = material.drill_delta_um * np.log(e_ratio) * n
    radius = material.crater_r0_um * (1.0 + material.crater_alpha * np.log(n))
    volume = depth * np.pi * radius**2 / 2.0
    return float(depth), float(radius), float(volume)


@dataclass(frozen=True)
class ProcessTrajectory:
    """Per-frame machining state over one acquisition sequence.

    Schedules cover every frame including the idle prefix (values are zero
    there). For grooving ``size_um`` is the trench width; for drilling it is
    the crater radius and ``pulses`` counts pulses delivered by each frame.
    """

    params: ProcessParams
    material: MaterialSpec
    kind: str  # "groove" | "drill"
    idle_frames: int
    depth_um: np.ndarray
    size_um: np.ndarray
    pulses: np.ndarray
    texture_amp_um: float = 0.0
    rework_scale_um: float = 0.0

    def __post_init__(self):
        if self.kind not in ("groove", "drill"):
            raise AblationError(f"unknown trajectory kind {self.kind!r}")
        if self.idle_frames < 0:
            raise AblationError(f"idle_frames must be nonnegative, got {self.idle_frames}")
        n = len(self.depth_um)
        if len(self.size_um) != n or len(self.pulses) != n:
            raise AblationError("trajectory schedules must have equal lengths")
        if np.any(self.depth_um[: self.idle_frames] != 0.0):
            raise AblationError("depth schedule must be zero during idle frames")
        proc = self.depth_um[self.idle_frames:]
        if self.kind == "drill" and np.any(np.diff(proc) < 0):
            raise AblationError("drilling depth schedule must be nondecreasing")

    @property
    def n_frames(self) -> int:
        return len(self.depth_um)

    def scan_speed_um_per_ms(self) -> float:
        if self.kind == "groove":
            return float(self.params.scan_speed_mm_s)
        return 0.0


def build_groove_trajectory(
    params: ProcessParams,
    material: MaterialSpec,
    n_frames: int,
    idle_frames: int = 9,
    frame_interval_ms: float = 1.0,
    spot_um: float = DEFAULT_SPOT_UM,
    rep_rate_khz: float = DEFAULT_REP_RATE_KHZ,
    base_ra_um: float = 1.0,
) -> ProcessTrajectory:
    """Groove schedule: depth ramps linearly while the beam crosses one
    machining spot, then holds at the steady-state value. Rework of the
    machined surface saturates where the local removal exceeds the base
    roughness."""
    if n_frames < 1:
        raise AblationError(f"n_frames must be >= 1, got {n_frames}")
    d_ss = groove_depth(params, material, spot_um, rep_rate_khz)
    width = groove_width(params, material)
    v = float(params.scan_speed_mm_s)

    depth = np.zeros(n_frames)
    size = np.full(n_frames, width)
    size[:idle_frames] = 0.0
    for k in range(idle_frames, n_frames):
        travel = (k - idle_frames + 1) * v * frame_interval_ms
        depth[k] = d_ss * min(1.0, travel / spot_um)
    pulses = np.zeros(n_frames, dtype=np.int64)
    return ProcessTrajectory(
        params, material, "groove", idle_frames, depth, size, pulses,
        texture_amp_um=material.texture_mult * base_ra_um,
        rework_scale_um=base_ra_um,
    )


def build_drill_trajectory(
    params: ProcessParams,
    material: MaterialSpec,
    n_frames: int,
    idle_frames: int = 9,
    pulses_per_frame: int = 1,
    base_ra_um: float = 1.0,
) -> ProcessTrajectory:
    """Drill schedule: the crater deepens with the cumulative pulse count."""
    if n_frames < 1:
        raise AblationError(f"n_frames must be >= 1, got {n_frames}")
    if pulses_per_frame < 1:
        raise AblationError(f"pulses_per_frame must be >= 1, got {pulses_per_frame}")
    depth = np.zeros(n_frames)
    size = np.zeros(n_frames)
    pulses = np.zeros(n_frames, dtype=np.int64)
    for k in range(idle_frames, n_frames):
        n_k = (k - idle_frames + 1) * pulses_per_frame
        d, r, _ = crater_geometry(params, material, n_pulses=n_k)
        depth[k], size[k], pulses[k] = d, r, n_k
    return ProcessTrajectory(
        params, material, "drill", idle_frames, depth, size, pulses,
        texture_amp_um=material.texture_mult * base_ra_um,
        rework_scale_um=base_ra_um,
    )


@dataclass(frozen=True)
class VolumeLabelGrid:
    """Measured (or synthetic) ablated volumes on an (energy, pulse-count) grid."""

    energies_uJ: np.ndarray
    pulse_counts: np.ndarray
    volumes_um3: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies_uJ, dtype=np.float64)
        n = np.asarray(self.pulse_counts, dtype=np.float64)
        v = np.asarray(self.volumes_um3, dtype=np.float64)
        if e.ndim != 1 or n.ndim != 1 or len(e) < 2 or len(n) < 2:
            raise AblationError("label grid needs at least 2 nodes per axis")
        if np.any(np.diff(e) <= 0) or np.any(np.diff(n) <= 0):
            raise AblationError("label grid axes must be strictly increasing")
        if v.shape != (len(e), len(n)):
            raise AblationError(f"volume matrix shape {v.shape} != ({len(e)}, {len(n)})")
        if np.any(v < 0):
            raise AblationError("volumes must be nonnegative")
        object.__setattr__(self, "energies_uJ", e)
        object.__setattr__(self, "pulse_counts", n)
        object.__setattr__(self, "volumes_um3", v)


def build_volume_label_grid(
    material: MaterialSpec, energies_uJ, pulse_counts
) -> VolumeLabelGrid:
    """Populate a label grid from the analytic crater model."""
    energies = np.asarray(sorted(energies_uJ), dtype=np.float64)
    counts = np.asarray(sorted(pulse_counts), dtype=np.int64)
    vols = np.zeros((len(energies), len(counts)))
    for i, e in enumerate(energies):
        p = ProcessParams(pulse_energy_uJ=float(e), n_pulses=int(counts[0]))
        for j, n in enumerate(counts):
            vols[i, j] = crater_geometry(p, material, n_pulses=int(n))[2]
    return VolumeLabelGrid(energies, counts, vols)


def interpolate_volume(grid: VolumeLabelGrid, energy_uJ: float, n_pulses: float) -> float:
    """Bilinear volume lookup; exact at nodes, no extrapolation."""
    e_ax, n_ax, v = grid.energies_uJ, grid.pulse_counts, grid.volumes_um3
    if not (e_ax[0] <= energy_uJ <= e_ax[-1]) or not (n_ax[0] <= n_pulses <= n_ax[-1]):
        raise AblationError(
            f"query (E={energy_uJ} uJ, N={n_pulses}) outside label grid "
            f"[{e_ax[0]}, {e_ax[-1]}] x [{n_ax[0]}, {n_ax[-1]}]"
        )
    i = min(int(np.searchsorted(e_ax, energy_uJ, side="right") - 1), len(e_ax) - 2)
    j = min(int(np.searchsorted(n_ax, n_pulses, side="right") - 1), len(n_ax) - 2)
    te = (energy_uJ - e_ax[i]) / (e_ax[i + 1] - e_ax[i])
    tn = (n_pulses - n_ax[j]) / (n_ax[j + 1] - n_ax[j])
    return float(
        v[i, j] * (1 - te) * (1 - tn)
        + v[i + 1, j] * te * (1 - tn)
        + v[i, j + 1] * (1 - te) * tn
        + v[i + 1, j + 1] * te * tn
    )


def ablated_volume(before: HeightMap, after: HeightMap) -> float:
    """Removed volume in um^3: sum of positive height loss times pixel area."""
    if before.data.shape != after.data.shape or before.pitch_um != after.pitch_um:
        raise SurfaceError(
            f"grid mismatch: {before.data.shape}@{before.pitch_um} vs "
            f"{after.data.shape}@{after.pitch_um}"
        )
    removal = np.maximum(before.data - after.data, 0.0)
    return float(removal.sum() * before.pitch_um**2)


def write_volume_grid_csv(grid: VolumeLabelGrid, path) -> None:
    """One row per node, sorted by (energy, pulses)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["energy_uJ", "n_pulses", "volume_um3"])
        for i, e in enumerate(grid.energies_uJ):
            for j, n in enumerate(grid.pulse_counts):
                writer.writerow([repr(float(e)), int(n), repr(float(grid.volumes_um3[i, j]))])


def read_volume_grid_csv(path) -> VolumeLabelGrid:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["energy_uJ", "n_pulses", "volume_um3"]:
            raise AblationError(f"unexpected volume-grid header {reader.fieldnames}")
        for row in reader:
            rows.append((float(row["energy_uJ"]), int(row["n_pulses"]), float(row["volume_um3"])))
    energies = sorted({r[0] for r in rows})
    counts = sorted({r[1] for r in rows})
    vols = np.zeros((len(energies), len(counts)))
    lookup = {(r[0], r[1]): r[2] for r in rows}
    for i, e in enumerate(energies):
        for j, n in enumerate(counts):
            try:
                vols[i, j] = lookup[(e, n)]
            except KeyError:
                raise AblationError(f"volume grid is missing node (E={e}, N={n})") from None
    return VolumeLabelGrid(np.array(energies), np.array(counts), vols)
