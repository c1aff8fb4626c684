import numpy as np
import pytest

from specklemon.ablation import (
    AblationError,
    MaterialSpec,
    ProcessParams,
    VolumeLabelGrid,
    ablated_volume,
    build_drill_trajectory,
    build_groove_trajectory,
    build_volume_label_grid,
    crater_geometry,
    groove_depth,
    groove_width,
    interpolate_volume,
    read_volume_grid_csv,
    write_volume_grid_csv,
)
from specklemon.surface import Grid2D, HeightMap, SurfaceError, carve_crater

AL = MaterialSpec("aluminum", groove_delta_um=0.05, groove_eth_uJ=5.0)


class TestGrooveDepth:
    def test_zero_at_threshold(self):
        p = ProcessParams(pulse_energy_uJ=5.0, scan_speed_mm_s=1.0)
        assert groove_depth(p, AL) == 0.0

    def test_doubling_speed_halves_depth(self):
        d1 = groove_depth(ProcessParams(30.0, scan_speed_mm_s=1.0), AL)
        d2 = groove_depth(ProcessParams(30.0, scan_speed_mm_s=2.0), AL)
        assert d1 == pytest.approx(2.0 * d2)

    def test_default_constants_match_independent_formula(self):
        # oracle: direct re-evaluation of delta * ln(E/Eth) * spot * f / v
        d = groove_depth(ProcessParams(60.0, scan_speed_mm_s=1.0), AL,
                         spot_um=15.0, rep_rate_khz=1.0)
        expected = 0.05 * np.log(60.0 / 5.0) * 15.0 * 1.0 / 1.0
        assert d == pytest.approx(expected, rel=1e-12)

    def test_monotonicity_sweep(self):
        energies = np.linspace(6.0, 60.0, 12)
        speeds = np.linspace(1.0, 3.5, 8)
        for v in speeds:
            depths = [groove_depth(ProcessParams(e, scan_speed_mm_s=v), AL) for e in energies]
            assert np.all(np.diff(depths) > 0)
        for e in energies:
            depths = [groove_depth(ProcessParams(e, scan_speed_mm_s=v), AL) for v in speeds]
            assert np.all(np.diff(depths) < 0)

    def test_rejects_nonpositive_speed(self):
        with pytest.raises(AblationError, match="speed"):
            groove_depth(ProcessParams(30.0, n_pulses=5), AL)


class TestCraterGeometry:
    def test_depth_linear_in_pulse_count(self):
        p = ProcessParams(5.0, n_pulses=1)
        d1, _, _ = crater_geometry(p, AL, n_pulses=50)
        d2, _, _ = crater_geometry(p, AL, n_pulses=100)
        assert d2 == pytest.approx(2.0 * d1, rel=1e-12)

    def test_below_threshold_zero_geometry(self):
        p = ProcessParams(0.4, n_pulses=100)
        assert crater_geometry(p, AL) == (0.0, 0.0, 0.0)

    def test_spot_check_against_independent_formula(self):
        p = ProcessParams(8.0, n_pulses=200)
        d, r, v = crater_geometry(p, AL)
        d_exp = 0.008 * np.log(8.0 / 0.5) * 200
        r_exp = 15.0 * (1.0 + 0.15 * np.log(200))
        assert d == pytest.approx(d_exp, rel=1e-12)
        assert r == pytest.approx(r_exp, rel=1e-12)
        assert v == pytest.approx(d_exp * np.pi * r_exp**2 / 2.0, rel=1e-12)

    def test_monotone_in_energy_and_pulses(self):
        vols_n = [crater_geometry(ProcessParams(5.0, n_pulses=1), AL, n_pulses=n)[2]
                  for n in (50, 100, 150, 200)]
        assert np.all(np.diff(vols_n) > 0)
        vols_e = [crater_geometry(ProcessParams(e, n_pulses=100), AL)[2]
                  for e in (1.0, 4.0, 7.0, 10.0)]
        assert np.all(np.diff(vols_e) > 0)


class TestTrajectories:
    def test_groove_ramps_then_holds(self):
        p = ProcessParams(60.0, scan_speed_mm_s=3.5)
        traj = build_groove_trajectory(p, AL, n_frames=30, idle_frames=9)
        d_ss = groove_depth(p, AL)
        proc = traj.depth_um[9:]
        assert np.all(np.diff(proc) >= -1e-15)
        assert proc[-1] == pytest.approx(d_ss)
        ramp_frames = int(np.ceil(groove_width(p, AL) / 3.5))
        assert np.all(proc[ramp_frames:] == proc[-1])

    def test_drill_depth_nondecreasing(self):
        p = ProcessParams(5.0, n_pulses=300)
        traj = build_drill_trajectory(p, AL, n_frames=60, idle_frames=9)
        assert np.all(np.diff(traj.depth_um[9:]) >= 0)
        assert traj.pulses[9] == 1 and traj.pulses[59] == 51

    def test_idle_prefix_is_zero(self):
        p = ProcessParams(60.0, scan_speed_mm_s=1.0)
        traj = build_groove_trajectory(p, AL, n_frames=12, idle_frames=9)
        assert np.all(traj.depth_um[:9] == 0.0)


def demo_grid():
    return VolumeLabelGrid(
        np.array([1.0, 2.0, 4.0, 8.0]),
        np.array([50, 100, 200]),
        np.arange(12, dtype=float).reshape(4, 3) ** 2,
    )


def bilinear_reference(grid, e, n):
    """Independent bilinear re-implementation (explicit cell scan)."""
    ea, na, v = grid.energies_uJ, grid.pulse_counts, grid.volumes_um3
    i = 0
    while i < len(ea) - 2 and e >= ea[i + 1]:
        i += 1
    j = 0
    while j < len(na) - 2 and n >= na[j + 1]:
        j += 1
    te = (e - ea[i]) / (ea[i + 1] - ea[i])
    tn = (n - na[j]) / (na[j + 1] - na[j])
    top = v[i, j] + te * (v[i + 1, j] - v[i, j])
    bot = v[i, j + 1] + te * (v[i + 1, j + 1] - v[i, j + 1])
    return top + tn * (bot - top)


class TestInterpolateVolume:
    def test_exact_at_every_node(self):
        grid = demo_grid()
        for i, e in enumerate(grid.energies_uJ):
            for j, n in enumerate(grid.pulse_counts):
                assert interpolate_volume(grid, float(e), float(n)) == grid.volumes_um3[i, j]

    def test_cell_midpoint_is_corner_mean(self):
        grid = demo_grid()
        mid = interpolate_volume(grid, 1.5, 75.0)
        corners = grid.volumes_um3[0:2, 0:2]
        assert mid == pytest.approx(corners.mean(), rel=1e-15)

    def test_random_queries_match_bruteforce(self):
        grid = demo_grid()
        rng = np.random.default_rng(0)
        for _ in range(100):
            e = rng.uniform(1.0, 8.0)
            n = rng.uniform(50.0, 200.0)
            assert interpolate_volume(grid, e, n) == pytest.approx(
                bilinear_reference(grid, e, n), abs=1e-12
            )

    def test_out_of_range_rejected(self):
        grid = demo_grid()
        with pytest.raises(AblationError, match="outside"):
            interpolate_volume(grid, 0.5, 100.0)
        with pytest.raises(AblationError, match="outside"):
            interpolate_volume(grid, 2.0, 201.0)

    def test_axis_refinement_preserving_nodes(self):
        grid = demo_grid()
        # insert midpoints whose values are the bilinear values themselves
        e_new = np.sort(np.concatenate([grid.energies_uJ, [1.5, 3.0, 6.0]]))
        v_new = np.array([
            [bilinear_reference(grid, e, float(n)) for n in grid.pulse_counts]
            for e in e_new
        ])
        refined = VolumeLabelGrid(e_new, grid.pulse_counts, v_new)
        rng = np.random.default_rng(1)
        for _ in range(50):
            e = rng.uniform(1.0, 8.0)
            n = rng.uniform(50.0, 200.0)
            assert interpolate_volume(refined, e, n) == pytest.approx(
                interpolate_volume(grid, e, n), abs=1e-9
            )

    def test_grid_invariants(self):
        with pytest.raises(AblationError, match="increasing"):
            VolumeLabelGrid(np.array([1.0, 1.0]), np.array([1, 2]), np.zeros((2, 2)))
        with pytest.raises(AblationError, match="nonnegative"):
            VolumeLabelGrid(np.array([1.0, 2.0]), np.array([1, 2]), -np.ones((2, 2)))

    def test_csv_roundtrip(self, tmp_path):
        grid = build_volume_label_grid(AL, [1, 2, 5, 10], [50, 100, 150])
        path = tmp_path / "grid.csv"
        write_volume_grid_csv(grid, path)
        back = read_volume_grid_csv(path)
        assert np.array_equal(back.energies_uJ, grid.energies_uJ)
        assert np.array_equal(back.pulse_counts, grid.pulse_counts)
        assert np.array_equal(back.volumes_um3, grid.volumes_um3)
        header = path.read_text().splitlines()[0]
        assert header == "energy_uJ,n_pulses,volume_um3"


class TestAblatedVolume:
    def test_identical_maps_zero(self):
        hm = HeightMap(Grid2D(np.random.default_rng(0).normal(size=(64, 64)), 0.25))
        assert ablated_volume(hm, hm) == 0.0

    def test_uniform_removal_arithmetic(self):
        before = HeightMap(Grid2D(np.zeros((64, 64)), 0.25))
        data = np.zeros((64, 64))
        data[:10, :10] = -1.0  # 100 pixels, 1 um deep at 0.25 um pitch
        after = HeightMap(Grid2D(data, 0.25))
        assert ablated_volume(before, after) == pytest.approx(100 * 1.0 * 0.0625)

    def test_crater_cross_module_consistency(self):
        p = ProcessParams(5.0, n_pulses=150)
        depth, radius, vol = crater_geometry(p, AL)
        surf = HeightMap(Grid2D(np.zeros((512, 512)), 0.25))
        carved = carve_crater(surf, depth, radius)
        assert ablated_volume(surf, carved) == pytest.approx(vol, rel=0.01)

    def test_grid_mismatch_rejected(self):
        a = HeightMap(Grid2D(np.zeros((64, 64)), 0.25))
        b = HeightMap(Grid2D(np.zeros((64, 64)), 0.5))
        with pytest.raises(SurfaceError, match="mismatch"):
            ablated_volume(a, b)

    def test_nonnegative_even_for_raised_surface(self):
        before = HeightMap(Grid2D(np.zeros((64, 64)), 0.25))
        after = HeightMap(Grid2D(np.ones((64, 64)), 0.25))
        assert ablated_volume(before, after) == 0.0
