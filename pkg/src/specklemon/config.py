"""Harness configuration: YAML in, validated sections out.

Every physical constant the simulator and trainer rely on appears in the
default config so deviations show up as visible diffs. Validation collects
every problem at once instead of stopping at the first.
"""

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError

from .ablation import MaterialSpec
from .optics import OpticalConfig

__all__ = [
    "ConfigError",
    "OpticsSection",
    "ProcessSection",
    "SurfaceSection",
    "MaterialSection",
    "PreprocessingSection",
    "DatasetSection",
    "GrooveSweep",
    "DrillSweep",
    "TrainSection",
    "NetworkSection",
    "HarnessConfig",
    "config_from_dict",
    "load_config",
    "config_to_yaml",
    "default_config_yaml",
]

DEPTH_SCALE_UM = 20.0  # groove regression targets are depth / 20 um


class ConfigError(ValueError):
    """Carries the full list of validation problems."""

    def __init__(self, errors: "list[str]"):
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))
        self.errors = list(errors)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OpticsSection(_Section):
    wavelength_um: float = 0.633
    beam_waist_um: float = 10.0
    grid_n: int = 512
    pitch_um: float = 0.25
    theta_min_deg: float = 30.0
    theta_max_deg: float = 60.0
    frame_interval_ms: float = 1.0
    detector_w_px: int = 1020
    detector_h_px: int = 100
    detector_fy_max: float = 1.95
    noise_rel: float = 0.0

    def to_optical(self) -> OpticalConfig:
        return OpticalConfig(
            wavelength_um=self.wavelength_um,
            beam_waist_um=self.beam_waist_um,
            grid_n=self.grid_n,
            pitch_um=self.pitch_um,
            theta_min_deg=self.theta_min_deg,
            theta_max_deg=self.theta_max_deg,
            frame_interval_ms=self.frame_interval_ms,
            detector_px=(self.detector_w_px, self.detector_h_px),
            detector_fy_max=self.detector_fy_max,
            noise_rel=self.noise_rel,
        )

    def validation_errors(self) -> "list[str]":
        probe = OpticalConfig.__new__(OpticalConfig)
        for name in ("wavelength_um", "beam_waist_um", "grid_n", "pitch_um",
                     "theta_min_deg", "theta_max_deg", "frame_interval_ms",
                     "detector_fy_max", "noise_rel"):
            object.__setattr__(probe, name, getattr(self, name))
        object.__setattr__(probe, "detector_px", (self.detector_w_px, self.detector_h_px))
        return probe.validation_errors()


class ProcessSection(_Section):
    spot_um: float = 15.0
    rep_rate_khz: float = 1.0


class SurfaceSection(_Section):
    ra_um: float = 1.0


class MaterialSection(_Section):
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

    def to_spec(self) -> MaterialSpec:
        return MaterialSpec(**self.model_dump())


class PreprocessingSection(_Section):
    box_factor: int = 4
    target_rows: int = 25


class DatasetSection(_Section):
    idle_frames: int = 9
    seed: int = 1234
    split_fraction: float = 0.8
    split_seed: int = 99


class GrooveSweep(_Section):
    energies_uJ: "list[float]" = [10.0, 22.5, 35.0, 47.5, 60.0]
    speeds_mm_s: "list[float]" = [1.0, 1.8, 2.7, 3.5]
    n_frames: int = 21
    triplet_stride: int = 1
    triplet_cap: int = 10


class DrillSweep(_Section):
    energies_uJ: "list[float]" = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    pulse_counts: "list[int]" = [50, 100, 150, 200, 250, 300]
    pulses_per_frame: int = 1
    triplet_stride: int = 0  # 0 = spread windows evenly over the labeled pulse range
    triplet_cap: int = 10


class TrainSection(_Section):
    batch_size: int = 256
    lr: float = 1.0e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8
    epochs: int = 150
    lambda_cls: float = 1.0
    seed: int = 7


class NetworkSection(_Section):
    stem_channels: "list[int]" = [8, 16]
    stem_kernels: "list[list[int]]" = [[3, 5], [3, 3]]
    stem_strides: "list[list[int]]" = [[2, 4], [2, 1]]
    stem_paddings: "list[list[int]]" = [[1, 2], [1, 1]]
    res_blocks: int = 5
    res_kernel: int = 3
    pool: int = 2
    head_channels: "list[int]" = [16, 8]
    head_kernel: int = 3
    fc_hidden: int = 64


class HarnessConfig(_Section):
    out_dir: str = "out"
    optics: OpticsSection = OpticsSection()
    process: ProcessSection = ProcessSection()
    surface: SurfaceSection = SurfaceSection()
    materials: "list[MaterialSection]" = [
        MaterialSection(name="aluminum", corr_len_um=4.0, texture_corr_y_um=2.0,
                        groove_delta_um=0.20, groove_eth_uJ=5.0),
        MaterialSection(name="copper", corr_len_um=8.0, texture_corr_y_um=5.0,
                        groove_delta_um=0.18, groove_eth_uJ=6.0),
        MaterialSection(name="nickel", corr_len_um=12.0, texture_corr_y_um=12.0,
                        groove_delta_um=0.16, groove_eth_uJ=7.0),
    ]
    preprocessing: PreprocessingSection = PreprocessingSection()
    dataset: DatasetSection = DatasetSection()
    groove: "GrooveSweep | None" = GrooveSweep()
    drill: "DrillSweep | None" = DrillSweep()
    train: TrainSection = TrainSection()
    network: NetworkSection = NetworkSection()

    def material_specs(self) -> "list[MaterialSpec]":
        return [m.to_spec() for m in self.materials]

    def validation_errors(self) -> "list[str]":
        """Semantic checks beyond field types; returns all problems."""
        errs = [f"optics.{e}" for e in self.optics.validation_errors()]

        if len(self.materials) < 2:
            errs.append(f"materials: need at least 2 for classification, got {len(self.materials)}")
        names = [m.name for m in self.materials]
        if len(set(names)) != len(names):
            errs.append(f"materials: names must be unique, got {names}")
        for m in self.materials:
            shortest = min(m.corr_len_um, m.texture_corr_x_um, m.texture_corr_y_um)
            if self.optics.pitch_um > 0 and shortest / self.optics.pitch_um < 4.0:
                errs.append(
                    f"materials.{m.name}: correlation length {shortest} um spans fewer "
                    f"than 4 pixels at pitch {self.optics.pitch_um}"
                )
            if m.texture_mult < 0:
                errs.append(f"materials.{m.name}: texture_mult must be nonnegative")

        if self.surface.ra_um < 0:
            errs.append(f"surface.ra_um must be nonnegative, got {self.surface.ra_um}")
        if self.process.spot_um <= 0 or self.process.rep_rate_khz <= 0:
            errs.append("process.spot_um and process.rep_rate_khz must be positive")

        pp = self.preprocessing
        if pp.box_factor < 1:
            errs.append(f"preprocessing.box_factor must be >= 1, got {pp.box_factor}")
        elif self.optics.detector_w_px % pp.box_factor or self.optics.detector_h_px % pp.box_factor:
            errs.append(
                f"preprocessing: detector {self.optics.detector_w_px}x{self.optics.detector_h_px} "
                f"not divisible by box_factor {pp.box_factor}"
            )
        elif self.optics.detector_h_px // pp.box_factor < pp.target_rows:
            errs.append(
                f"preprocessing: detector height {self.optics.detector_h_px} / box_factor "
                f"{pp.box_factor} < target_rows {pp.target_rows}"
            )

        if not 0.0 < self.dataset.split_fraction < 1.0:
            errs.append(f"dataset.split_fraction must be in (0, 1), got {self.dataset.split_fraction}")
        if self.dataset.idle_frames < 0:
            errs.append(f"dataset.idle_frames must be nonnegative, got {self.dataset.idle_frames}")

        if self.groove is None and self.drill is None:
            errs.append("at least one of groove/drill sweeps must be configured")
        if self.groove is not None:
            g = self.groove
            if not g.energies_uJ or not g.speeds_mm_s:
                errs.append("groove: energy and speed sweeps must be nonempty")
            if any(e <= 0 for e in g.energies_uJ) or any(v <= 0 for v in g.speeds_mm_s):
                errs.append("groove: energies and speeds must be positive")
            if g.n_frames < self.dataset.idle_frames + 3:
                errs.append(
                    f"groove.n_frames {g.n_frames} leaves no room for a triplet after "
                    f"{self.dataset.idle_frames} idle frames"
                )
            if g.triplet_stride < 1 or g.triplet_cap < 1:
                errs.append("groove: triplet_stride and triplet_cap must be >= 1")
            if g.speeds_mm_s and self.optics.grid_n and self.optics.pitch_um > 0:
                travel = max(g.speeds_mm_s) * self.optics.frame_interval_ms * (g.n_frames - 1)
                if travel > 0.9 * self.optics.grid_n * self.optics.pitch_um:
                    errs.append(
                        f"groove: beam travel {travel:.0f} um will not fit the "
                        f"{self.optics.grid_n * self.optics.pitch_um:.0f} um grid"
                    )
        if self.drill is not None:
            d = self.drill
            if not d.energies_uJ or len(d.pulse_counts) < 2:
                errs.append("drill: need energies and at least 2 pulse-count nodes")
            if any(e <= 0 for e in d.energies_uJ):
                errs.append("drill: energies must be positive")
            if sorted(d.pulse_counts) != list(d.pulse_counts) or len(set(d.pulse_counts)) != len(d.pulse_counts):
                errs.append("drill: pulse_counts must be strictly increasing")
            if d.pulse_counts and d.pulse_counts[0] < 3:
                errs.append("drill: first pulse-count node must be >= 3 to fit a triplet")
            if d.pulses_per_frame < 1 or d.triplet_cap < 1 or d.triplet_stride < 0:
                errs.append("drill: pulses_per_frame/triplet_cap must be >= 1, stride >= 0")

        if self.train.batch_size < 1 or self.train.epochs < 1:
            errs.append("train: batch_size and epochs must be >= 1")
        if self.train.lambda_cls < 0:
            errs.append("train: lambda_cls must be nonnegative")

        n = self.network
        if len(n.stem_channels) != 2 or len(n.head_channels) != 2:
            errs.append("network: stem_channels and head_channels must list exactly 2 entries")
        if n.res_blocks < 1:
            errs.append("network: res_blocks must be >= 1")
        return errs


def _format_pydantic_errors(exc: ValidationError) -> "list[str]":
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        out.append(f"{loc}: {err['msg']}")
    return out


def config_from_dict(data: dict) -> HarnessConfig:
    """Build and fully validate a config; raises ConfigError listing every
    problem found."""
    if not isinstance(data, dict):
        raise ConfigError([f"config root must be a mapping, got {type(data).__name__}"])
    try:
        cfg = HarnessConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_pydantic_errors(exc)) from None
    errs = cfg.validation_errors()
    if errs:
        raise ConfigError(errs)
    return cfg


def load_config(path) -> HarnessConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data if data is not None else {})


def config_to_yaml(cfg: HarnessConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(), sort_keys=True)


def default_config_yaml() -> str:
    """The default configuration as a commented YAML document; parsing it
    reproduces ``HarnessConfig()`` exactly."""
    return DEFAULT_CONFIG_YAML


DEFAULT_CONFIG_YAML = """\
# specklemon harness configuration (all lengths in micrometers unless noted)
out_dir: out

optics:
  wavelength_um: 0.633        # probe laser-diode wavelength (633 nm line)
  beam_waist_um: 10.0         # probe 1/e^2 intensity radius: 20 um spot on target
  grid_n: 512                 # simulation grid samples per side
  pitch_um: 0.25              # grid pitch; Nyquist covers sin(60 deg)/lambda
  theta_min_deg: 30.0         # diffraction angle at the left image edge
  theta_max_deg: 60.0         # diffraction angle at the right image edge
  frame_interval_ms: 1.0      # camera synchronized to the 1 kHz pulse train
  detector_w_px: 1020         # camera pixels across the angular window
  detector_h_px: 100          # camera pixels across the vertical axis
  detector_fy_max: 1.95       # camera vertical acceptance, 1/um of spatial frequency
  noise_rel: 0.0              # optional additive Gaussian noise, relative to mean

process:
  spot_um: 15.0               # machining-beam spot on target
  rep_rate_khz: 1.0           # machining pulse repetition rate

surface:
  ra_um: 1.0                  # plate roughness Ra before processing

# Material identity enters through the base-surface correlation length and
# the machined-region texture multiplier; removal-law constants are
# simulator stand-ins, not measured properties.
materials:
- name: aluminum
  corr_len_um: 4.0
  texture_mult: 0.6           # machined-floor roughness relative to Ra
  texture_corr_x_um: 1000.0   # across-groove ripple correlation (quasi-1D washboard)
  texture_corr_y_um: 2.0      # machining ripple period along the groove
  groove_delta_um: 0.2        # removal per ln(E/E_th) per effective pulse
  groove_eth_uJ: 5.0          # grooving ablation threshold
  groove_width0_um: 25.0      # trench 1/e^2 full width at threshold
  groove_width_gain: 0.0      # trench width is energy-independent by default
  drill_delta_um: 0.008
  drill_eth_uJ: 0.5
  crater_r0_um: 15.0
  crater_alpha: 0.15          # crater radius growth per ln(pulse count)
- name: copper
  corr_len_um: 8.0
  texture_mult: 0.6
  texture_corr_x_um: 1000.0
  texture_corr_y_um: 5.0
  groove_delta_um: 0.18
  groove_eth_uJ: 6.0
  groove_width0_um: 25.0
  groove_width_gain: 0.0
  drill_delta_um: 0.008
  drill_eth_uJ: 0.5
  crater_r0_um: 15.0
  crater_alpha: 0.15
- name: nickel
  corr_len_um: 12.0
  texture_mult: 0.6
  texture_corr_x_um: 1000.0
  texture_corr_y_um: 12.0
  groove_delta_um: 0.16
  groove_eth_uJ: 7.0
  groove_width0_um: 25.0
  groove_width_gain: 0.0
  drill_delta_um: 0.008
  drill_eth_uJ: 0.5
  crater_r0_um: 15.0
  crater_alpha: 0.15

preprocessing:
  box_factor: 4               # box-average factor from camera to network input
  target_rows: 25             # rows kept after the center crop

dataset:
  idle_frames: 9              # frames recorded before the shutter opens
  seed: 1234
  split_fraction: 0.8         # run-level train fraction
  split_seed: 99

groove:
  energies_uJ: [10.0, 22.5, 35.0, 47.5, 60.0]   # pulse-energy sweep
  speeds_mm_s: [1.0, 1.8, 2.7, 3.5]             # stage-speed sweep
  n_frames: 21
  triplet_stride: 1
  triplet_cap: 10             # triplets kept per run

drill:
  energies_uJ: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
  pulse_counts: [50, 100, 150, 200, 250, 300]   # volume label-grid nodes
  pulses_per_frame: 1
  triplet_stride: 0           # 0 = spread windows over the labeled range
  triplet_cap: 10

train:
  batch_size: 256
  lr: 0.001
  beta1: 0.9
  beta2: 0.999
  eps: 1.0e-08
  epochs: 150
  lambda_cls: 1.0             # cross-entropy weight in the joint loss
  seed: 7

network:
  stem_channels: [8, 16]
  stem_kernels: [[3, 5], [3, 3]]
  stem_strides: [[2, 4], [2, 1]]
  stem_paddings: [[1, 2], [1, 1]]
  res_blocks: 5
  res_kernel: 3
  pool: 2
  head_channels: [16, 8]
  head_kernel: 3
  fc_hidden: 64
"""
