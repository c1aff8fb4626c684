"""Coherent probe propagation to the detector at the lens Fourier plane.

The aperture field is a Gaussian probe beam reflected off the height field
with the normal-incidence phase 4*pi*h/lambda. The detector sits at the
Fourier plane, so the measured intensity is |FFT(aperture)|^2 sampled on
spatial frequencies; the off-axis detector window maps diffraction angles
through f = sin(theta) / lambda.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .ablation import ProcessTrajectory
from .surface import Grid2D, HeightMap, carve_crater, carve_groove

__all__ = [
    "OpticsError",
    "SequenceError",
    "OpticalConfig",
    "IntensityFrame",
    "aperture_field",
    "full_farfield_intensity",
    "propagate_far_field",
    "resample_to_detector",
    "render_frame",
    "render_sequence",
    "speckle_contrast",
]


class OpticsError(ValueError):
    """Optical configuration or propagation contract violation."""


class SequenceError(ValueError):
    """Frame-sequence rendering failure; message carries the frame index."""


@dataclass(frozen=True)
class OpticalConfig:
    """Probe and detector geometry.

    Defaults model a 633 nm probe focused to a 20 um spot (1/e^2 intensity
    diameter) with the camera collecting diffraction angles between 30 and
    60 degrees at a 1 kHz frame cadence. ``detector_px`` is the (width,
    height) of the camera image interpolated from the frequency-plane
    window; ``None`` keeps the native FFT sampling.
    """

    wavelength_um: float = 0.633
    beam_waist_um: float = 10.0
    grid_n: int = 512
    pitch_um: float = 0.25
    theta_min_deg: float = 30.0
    theta_max_deg: float = 60.0
    frame_interval_ms: float = 1.0
    detector_px: "tuple[int, int] | None" = (1020, 100)
    detector_fy_max: "float | None" = 1.95
    noise_rel: float = 0.0

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise OpticsError("; ".join(errors))

    def validation_errors(self) -> "list[str]":
        errs = []
        if not self.wavelength_um > 0:
            errs.append(f"wavelength_um must be positive, got {self.wavelength_um}")
        if not self.beam_waist_um > 0:
            errs.append(f"beam_waist_um must be positive, got {self.beam_waist_um}")
        if self.grid_n < 64:
            errs.append(f"grid_n must be at least 64, got {self.grid_n}")
        if not self.pitch_um > 0:
            errs.append(f"pitch_um must be positive, got {self.pitch_um}")
        if not self.frame_interval_ms > 0:
            errs.append(f"frame_interval_ms must be positive, got {self.frame_interval_ms}")
        if not (0.0 <= self.theta_min_deg < self.theta_max_deg < 90.0):
            errs.append(
                f"need 0 <= theta_min < theta_max < 90 deg, got "
                f"({self.theta_min_deg}, {self.theta_max_deg})"
            )
        elif self.wavelength_um > 0 and self.pitch_um > 0:
            f_hi = math.sin(math.radians(self.theta_max_deg)) / self.wavelength_um
            nyquist = 1.0 / (2.0 * self.pitch_um)
            if f_hi > nyquist:
                errs.append(
                    f"sin(theta_max)/wavelength = {f_hi:.4f} /um exceeds grid Nyquist "
                    f"{nyquist:.4f} /um; reduce pitch_um or theta_max_deg"
                )
        if self.detector_px is not None:
            w, h = self.detector_px
            if w < 1 or h < 1:
                errs.append(f"detector_px must be positive, got {self.detector_px}")
        if self.detector_fy_max is not None:
            if not self.detector_fy_max > 0:
                errs.append(f"detector_fy_max must be positive, got {self.detector_fy_max}")
            elif self.pitch_um > 0 and self.detector_fy_max > 1.0 / (2.0 * self.pitch_um):
                errs.append(
                    f"detector_fy_max {self.detector_fy_max} /um exceeds the grid's "
                    f"vertical frequency range {1.0 / (2.0 * self.pitch_um)} /um"
                )
        if self.noise_rel < 0:
            errs.append(f"noise_rel must be nonnegative, got {self.noise_rel}")
        return errs

    @property
    def f_window(self) -> "tuple[float, float]":
        """Detector window bounds in spatial frequency (1/um) along x."""
        return (
            math.sin(math.radians(self.theta_min_deg)) / self.wavelength_um,
            math.sin(math.radians(self.theta_max_deg)) / self.wavelength_um,
        )

    @property
    def extent_um(self) -> float:
        return self.grid_n * self.pitch_um


@dataclass(frozen=True)
class IntensityFrame:
    """Detector-plane intensity image (arbitrary units, nonnegative).

    ``grid.pitch_um`` holds the column sample spacing in 1/um; the axis
    bounds record the spatial-frequency rectangle the image covers.
    """

    grid: Grid2D
    wall_time_ms: float = 0.0
    fx_bounds: "tuple[float, float]" = (0.0, 0.0)
    fy_bounds: "tuple[float, float]" = (0.0, 0.0)

    def __post_init__(self):
        if np.any(self.grid.data < 0):
            raise OpticsError("intensity values must be nonnegative")

    @property
    def data(self) -> np.ndarray:
        return self.grid.data


def _check_surface(surface: HeightMap, cfg: OpticalConfig):
    if surface.data.shape != (cfg.grid_n, cfg.grid_n) or surface.pitch_um != cfg.pitch_um:
        raise OpticsError(
            f"surface grid {surface.data.shape}@{surface.pitch_um} um does not match "
            f"optical config ({cfg.grid_n}, {cfg.grid_n})@{cfg.pitch_um} um"
        )


def aperture_field(
    surface: HeightMap, cfg: OpticalConfig, beam_center_um=(0.0, 0.0)
) -> np.ndarray:
    """Complex field just after reflection: Gaussian beam x phase 4*pi*h/lambda."""
    _check_surface(surface, cfg)
    cx, cy = beam_center_um
    x = surface.grid.x_coords_um() - cx
    y = surface.grid.y_coords_um() - cy
    amp = np.exp(-(x[None, :] ** 2 + y[:, None] ** 2) / cfg.beam_waist_um**2)
    phase = (4.0 * np.pi / cfg.wavelength_um) * surface.data
    return amp * np.exp(1j * phase)


def full_farfield_intensity(
    surface: HeightMap, cfg: OpticalConfig, beam_center_um=(0.0, 0.0)
) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
    """Intensity over the full frequency plane.

    Returns (intensity, fx, fy) with frequency axes fftshift-ordered.
    Parseval holds: intensity.sum() == grid_n^2 * |aperture|^2.sum().
    """
    a = aperture_field(surface, cfg, beam_center_um)
    far = np.fft.fftshift(np.fft.fft2(a))
    fx = np.fft.fftshift(np.fft.fftfreq(cfg.grid_n, d=cfg.pitch_um))
    fy = np.fft.fftshift(np.fft.fftfreq(cfg.grid_n, d=cfg.pitch_um))
    return (far.real**2 + far.imag**2), fx, fy


def propagate_far_field(
    surface: HeightMap, cfg: OpticalConfig, beam_center_um=(0.0, 0.0)
) -> IntensityFrame:
    """Detector-window intensity at native FFT sampling.

    Columns keep fx in [sin(theta_min)/lambda, sin(theta_max)/lambda]; rows
    span the full fy axis. Image width is the angular axis (left edge
    theta_min, right edge theta_max).
    """
    intensity, fx, fy = full_farfield_intensity(surface, cfg, beam_center_um)
    f_lo, f_hi = cfg.f_window
    cols = np.nonzero((fx >= f_lo) & (fx <= f_hi))[0]
    if cols.size == 0:
        raise OpticsError(
            f"angular window [{f_lo:.4f}, {f_hi:.4f}] /um contains no grid samples"
        )
    window = intensity[:, cols[0]: cols[-1] + 1]
    dfx = fx[1] - fx[0]
    return IntensityFrame(
        Grid2D(window, pitch_um=dfx),
        fx_bounds=(float(fx[cols[0]]), float(fx[cols[-1]])),
        fy_bounds=(float(fy[0]), float(fy[-1])),
    )


def _lin_interp_axis(img: np.ndarray, src: np.ndarray, dst: np.ndarray, axis: int) -> np.ndarray:
    """Linear interpolation along one axis of a 2-D image (dst within src range)."""
    idx = np.clip(np.searchsorted(src, dst, side="right") - 1, 0, len(src) - 2)
    t = (dst - src[idx]) / (src[idx + 1] - src[idx])
    if axis == 0:
        return img[idx, :] * (1.0 - t)[:, None] + img[idx + 1, :] * t[:, None]
    return img[:, idx] * (1.0 - t)[None, :] + img[:, idx + 1] * t[None, :]


def resample_to_detector(
    frame: IntensityFrame, width_px: int, height_px: int,
    fy_max: "float | None" = None,
) -> IntensityFrame:
    """Camera sampling of the frequency-plane window: bilinear onto a
    uniform width_px x height_px pixel grid.

    The horizontal axis spans the frame's angular window; vertically the
    camera accepts fy in [-fy_max, fy_max] (its physical height), or the
    full frame range when fy_max is None.
    """
    if width_px < 1 or height_px < 1:
        raise OpticsError(f"detector size must be positive, got {(width_px, height_px)}")
    rows, cols = frame.data.shape
    if rows < 2 or cols < 2:
        raise OpticsError(f"frame {frame.data.shape} too small to resample")
    fy_lo, fy_hi = frame.fy_bounds
    if fy_max is not None:
        if not 0 < fy_max:
            raise OpticsError(f"fy_max must be positive, got {fy_max}")
        if -fy_max < fy_lo or fy_max > fy_hi:
            raise OpticsError(
                f"camera acceptance +-{fy_max} /um exceeds the rendered range "
                f"[{fy_lo}, {fy_hi}] /um"
            )
        fy_lo, fy_hi = -fy_max, fy_max
    src_x = np.linspace(frame.fx_bounds[0], frame.fx_bounds[1], cols)
    src_y = np.linspace(frame.fy_bounds[0], frame.fy_bounds[1], rows)
    dst_x = np.linspace(frame.fx_bounds[0], frame.fx_bounds[1], width_px)
    dst_y = np.linspace(fy_lo, fy_hi, height_px)
    out = _lin_interp_axis(frame.data, src_y, dst_y, axis=0)
    out = _lin_interp_axis(out, src_x, dst_x, axis=1)
    out = np.maximum(out, 0.0)
    dfx = dst_x[1] - dst_x[0] if width_px > 1 else 0.0
    return IntensityFrame(
        Grid2D(out, pitch_um=dfx if dfx > 0 else frame.grid.pitch_um),
        wall_time_ms=frame.wall_time_ms,
        fx_bounds=frame.fx_bounds,
        fy_bounds=(fy_lo, fy_hi),
    )


def render_frame(
    initial: HeightMap,
    traj: ProcessTrajectory,
    cfg: OpticalConfig,
    frame_idx: int,
    beam_start_um=(0.0, 0.0),
    texture: "HeightMap | None" = None,
    noise_seed: "int | None" = None,
) -> IntensityFrame:
    """Render one frame of a machining sequence at t = frame_idx * interval.

    The surface is the initial map with the trajectory's geometry at this
    frame carved in; the beam advances along the scan (y) axis by
    scan_speed * interval per frame (drilling keeps it fixed). Pure
    function of its arguments.
    """
    if frame_idx < 0 or frame_idx >= traj.n_frames:
        raise SequenceError(f"frame {frame_idx} outside trajectory of {traj.n_frames} frames")
    v = traj.scan_speed_um_per_ms()
    bx = beam_start_um[0]
    by = beam_start_um[1] + v * cfg.frame_interval_ms * frame_idx
    half = cfg.extent_um / 2.0
    if abs(bx) > half or abs(by) > half:
        raise SequenceError(
            f"beam center ({bx:.2f}, {by:.2f}) um leaves the {cfg.extent_um:.0f} um grid "
            f"at frame {frame_idx}"
        )

    depth = float(traj.depth_um[frame_idx])
    if depth == 0.0:
        surface = initial
    elif traj.kind == "groove":
        surface = carve_groove(
            initial, depth, float(traj.size_um[frame_idx]), axis_offset_um=bx,
            texture=texture, texture_amp_um=traj.texture_amp_um,
            rework_scale_um=traj.rework_scale_um,
        )
    else:
        surface = carve_crater(
            initial, depth, float(traj.size_um[frame_idx]), center_um=(bx, by),
            texture=texture, texture_amp_um=traj.texture_amp_um,
            rework_scale_um=traj.rework_scale_um,
        )

    frame = propagate_far_field(surface, cfg, (bx, by))
    if cfg.detector_px is not None:
        frame = resample_to_detector(frame, cfg.detector_px[0], cfg.detector_px[1],
                                     fy_max=cfg.detector_fy_max)
    if cfg.noise_rel > 0.0:
        rng = np.random.default_rng((noise_seed if noise_seed is not None else 0, frame_idx))
        data = frame.data + cfg.noise_rel * frame.data.mean() * rng.standard_normal(frame.data.shape)
        frame = replace(frame, grid=Grid2D(np.maximum(data, 0.0), frame.grid.pitch_um))
    return replace(frame, wall_time_ms=frame_idx * cfg.frame_interval_ms)


def render_sequence(
    initial: HeightMap,
    traj: ProcessTrajectory,
    cfg: OpticalConfig,
    n_frames: int,
    beam_start_um=(0.0, 0.0),
    texture: "HeightMap | None" = None,
    noise_seed: "int | None" = None,
) -> "list[IntensityFrame]":
    """Render frames 0..n_frames-1 of a machining sequence."""
    if n_frames < 1:
        raise SequenceError(f"n_frames must be >= 1, got {n_frames}")
    if n_frames > traj.n_frames:
        raise SequenceError(
            f"trajectory covers {traj.n_frames} frames, cannot render {n_frames}"
        )
    return [
        render_frame(initial, traj, cfg, k, beam_start_um, texture, noise_seed)
        for k in range(n_frames)
    ]


def speckle_contrast(frame: IntensityFrame) -> float:
    """Population standard deviation over mean of the frame intensity."""
    data = frame.data
    mean = data.mean()
    if mean == 0.0:
        raise OpticsError("speckle contrast undefined: frame mean intensity is zero")
    return float(data.std() / mean)
