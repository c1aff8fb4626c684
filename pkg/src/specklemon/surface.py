"""Height-field synthesis and machining geometry.

Surfaces are 2-D height fields h(y, x) in micrometers on a square-pitch
grid, stored row-major: ``data[row, col]`` is the height at
(y = row pitch, x = col pitch), with coordinates centered on the grid.
The y axis is the scan axis: grooves run along y and their cross-section
lies along x, facing the detector's angular window.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SurfaceError",
    "Grid2D",
    "HeightMap",
    "RoughnessSpec",
    "synthesize_rough_surface",
    "carve_groove",
    "carve_crater",
]


class SurfaceError(ValueError):
    """Invalid grid geometry or unresolvable surface parameters."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2-D sample grid; ``data[row, col]``, all values finite."""

    data: np.ndarray
    pitch_um: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.size == 0:
            raise SurfaceError(f"grid data must be a nonempty 2-D array, got shape {np.shape(self.data)}")
        if not self.pitch_um > 0:
            raise SurfaceError(f"grid pitch must be positive, got {self.pitch_um}")
        if not np.isfinite(data).all():
            raise SurfaceError("grid data contains non-finite values")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "pitch_um", float(self.pitch_um))

    @property
    def height_px(self) -> int:
        return self.data.shape[0]

    @property
    def width_px(self) -> int:
        return self.data.shape[1]

    def x_coords_um(self) -> np.ndarray:
        """Column x coordinates; zero sits exactly on sample width//2,
        matching the fftshift frequency convention."""
        w = self.width_px
        return (np.arange(w) - w // 2) * self.pitch_um

    def y_coords_um(self) -> np.ndarray:
        """Row y coordinates; zero sits exactly on sample height//2."""
        h = self.height_px
        return (np.arange(h) - h // 2) * self.pitch_um


@dataclass(frozen=True)
class HeightMap:
    """Surface height field in micrometers; positive is above the nominal plane."""

    grid: Grid2D

    @property
    def data(self) -> np.ndarray:
        return self.grid.data

    @property
    def pitch_um(self) -> float:
        return self.grid.pitch_um

    def with_data(self, data: np.ndarray) -> "HeightMap":
        return HeightMap(Grid2D(data, self.grid.pitch_um))


@dataclass(frozen=True)
class RoughnessSpec:
    """Target roughness for a synthesized surface.

    ra_um is the arithmetic mean absolute deviation of height; corr_len_um
    is the 1/e half-width of the Gaussian autocorrelation along x. Textures
    with a directional grain (machining ripple) set corr_len_y_um to a
    different across-scan value; None keeps the field isotropic.
    """

    ra_um: float
    corr_len_um: float
    seed: int
    corr_len_y_um: "float | None" = None

    def __post_init__(self):
        if self.ra_um < 0:
            raise SurfaceError(f"ra_um must be nonnegative, got {self.ra_um}")
        if not self.corr_len_um > 0:
            raise SurfaceError(f"corr_len_um must be positive, got {self.corr_len_um}")
        if self.corr_len_y_um is not None and not self.corr_len_y_um > 0:
            raise SurfaceError(f"corr_len_y_um must be positive, got {self.corr_len_y_um}")

    @property
    def corr_y(self) -> float:
        return self.corr_len_um if self.corr_len_y_um is None else self.corr_len_y_um


def synthesize_rough_surface(
    spec: RoughnessSpec, width_px: int, height_px: int, pitch_um: float
) -> HeightMap:
    """Generate a stationary Gaussian random surface.

    White noise is filtered in the frequency domain so the height
    autocorrelation is exp(-(r/corr_len)^2); the result is shifted to zero
    mean and rescaled so the sample mean absolute deviation equals ra_um.
    Deterministic for a fixed seed.
    """
    if width_px < 64 or height_px < 64:
        raise SurfaceError(f"grid must be at least 64x64, got {width_px}x{height_px}")
    if not pitch_um > 0:
        raise SurfaceError(f"pitch_um must be positive, got {pitch_um}")
    if min(spec.corr_len_um, spec.corr_y) / pitch_um < 4.0:
        raise SurfaceError(
            f"correlation length {min(spec.corr_len_um, spec.corr_y)} um spans fewer "
            f"than 4 pixels at pitch {pitch_um} um; refine the grid"
        )

    if spec.ra_um == 0.0:
        return HeightMap(Grid2D(np.zeros((height_px, width_px)), pitch_um))

    rng = np.random.default_rng(spec.seed)
    noise = rng.standard_normal((height_px, width_px))

    # Amplitude filter sqrt(S); S(f) ~ exp(-pi^2 (Lx^2 fx^2 + Ly^2 fy^2)) is
    # the spectrum of the target autocorrelation exp(-(x/Lx)^2 - (y/Ly)^2).
    fx = np.fft.fftfreq(width_px, d=pitch_um)
    fy = np.fft.fftfreq(height_px, d=pitch_um)
    arg = spec.corr_len_um**2 * fx[None, :] ** 2 + spec.corr_y**2 * fy[:, None] ** 2
    filt = np.exp(-(np.pi**2) * arg / 2.0)

    field = np.fft.ifft2(np.fft.fft2(noise) * filt).real
    field -= field.mean()
    mad = np.abs(field).mean()
    if mad == 0.0:
        raise SurfaceError("degenerate filtered field; cannot rescale to target Ra")
    field *= spec.ra_um / mad
    return HeightMap(Grid2D(field, pitch_um))


def _check_texture(surface: HeightMap, texture, texture_amp_um: float):
    if texture is None:
        return None
    if texture.data.shape != surface.data.shape or texture.pitch_um != surface.pitch_um:
        raise SurfaceError("texture grid geometry does not match the surface")
    if texture_amp_um < 0:
        raise SurfaceError(f"texture amplitude must be nonnegative, got {texture_amp_um}")
    return texture.data


def carve_groove(
    surface: HeightMap,
    depth_um: float,
    width_um: float,
    axis_offset_um: float = 0.0,
    texture: "HeightMap | None" = None,
    texture_amp_um: float = 0.0,
    rework_scale_um: float = 0.0,
) -> HeightMap:
    """Subtract a Gaussian-cross-section trench running along the scan (y) axis.

    The trench profile is depth * exp(-8 x'^2 / width^2) with x' measured
    from ``axis_offset_um`` off grid center; ``width_um`` is the 1/e^2 full
    width. Machining rework is local: where the removed depth exceeds
    ``rework_scale_um`` the original height texture is fully machined away
    and, when a texture field is supplied, replaced by the process texture
    scaled to ``texture_amp_um``; shallower removal reworks
    proportionally. ``rework_scale_um`` = 0 disables rework. The input map
    is not modified.
    """
    if depth_um < 0:
        raise SurfaceError(f"groove depth must be nonnegative, got {depth_um}")
    if width_um < 2.0 * surface.pitch_um:
        raise SurfaceError(
            f"groove width {width_um} um is narrower than two pixels at pitch {surface.pitch_um} um"
        )
    if rework_scale_um < 0:
        raise SurfaceError(f"rework_scale_um must be nonnegative, got {rework_scale_um}")
    if depth_um == 0.0:
        return surface.with_data(surface.data.copy())

    tex = _check_texture(surface, texture, texture_amp_um)
    x = surface.grid.x_coords_um() - axis_offset_um
    mask = np.exp(-8.0 * x**2 / width_um**2)[None, :]
    out = surface.data - depth_um * mask
    if rework_scale_um > 0.0:
        rework = np.minimum(depth_um * mask / rework_scale_um, 1.0)
        out = out - surface.data * rework
        if tex is not None and texture_amp_um > 0.0:
            out = out + texture_amp_um * rework * tex
    return surface.with_data(out)


def carve_crater(
    surface: HeightMap,
    depth_um: float,
    radius_um: float,
    center_um: "tuple[float, float]" = (0.0, 0.0),
    texture: "HeightMap | None" = None,
    texture_amp_um: float = 0.0,
    rework_scale_um: float = 0.0,
) -> HeightMap:
    """Subtract a radially symmetric Gaussian crater.

    Profile depth * exp(-2 r^2 / radius^2) around ``center_um`` = (x, y)
    from grid center; ``radius_um`` is the 1/e^2 radius, so the removed
    volume of the full template is depth * pi * radius^2 / 2. Local rework
    and immutability as in :func:`carve_groove`.
    """
    if depth_um < 0:
        raise SurfaceError(f"crater depth must be nonnegative, got {depth_um}")
    if radius_um < surface.pitch_um:
        raise SurfaceError(
            f"crater radius {radius_um} um is narrower than one pixel at pitch {surface.pitch_um} um"
        )
    if rework_scale_um < 0:
        raise SurfaceError(f"rework_scale_um must be nonnegative, got {rework_scale_um}")
    if depth_um == 0.0:
        return surface.with_data(surface.data.copy())

    tex = _check_texture(surface, texture, texture_amp_um)
    cx, cy = center_um
    x = surface.grid.x_coords_um() - cx
    y = surface.grid.y_coords_um() - cy
    r2 = x[None, :] ** 2 + y[:, None] ** 2
    mask = np.exp(-2.0 * r2 / radius_um**2)
    out = surface.data - depth_um * mask
    if rework_scale_um > 0.0:
        rework = np.minimum(depth_um * mask / rework_scale_um, 1.0)
        out = out - surface.data * rework
        if tex is not None and texture_amp_um > 0.0:
            out = out + texture_amp_um * rework * tex
    return surface.with_data(out)
