import numpy as np
import pytest

from coherentflow.flows import Domain
from coherentflow.planning import (
    DRIFT,
    THRUST,
    MissionResult,
    Plan,
    RegionMask,
    VehicleParams,
    default_cell_size,
    extract_region,
    mission_summary,
    mission_to_csv,
    naive_controller,
    plan_waypoints,
    simulate_mission,
    write_mask_pgm,
)

UNIT = Domain(lower=(0.0, 0.0), upper=(4.0, 3.0))


def still(pos, t):
    return np.zeros(2)


def uniform(vx, vy):
    def field(pos, t):
        return np.array([vx, vy])

    return field


def grid_seeds(n=12):
    xs = np.linspace(0.1, 3.9, n)
    ys = np.linspace(0.1, 2.9, n)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


# ---------------------------------------------------------------------------
# rasterization
# ---------------------------------------------------------------------------

def test_default_cell_size_is_diagonal_fraction():
    assert default_cell_size(UNIT) == pytest.approx(5.0 / 60.0)


def test_extract_region_single_cluster_fills_domain():
    seeds = grid_seeds()
    labels = np.zeros(len(seeds), dtype=int)
    region = extract_region(labels, seeds, 0, UNIT, cell_size=0.5)
    assert region.grid.all()
    assert region.shape == (6, 8)
    assert region.cluster_id == 0


def test_extract_region_half_plane_boundary():
    seeds = grid_seeds(24)
    labels = (seeds[:, 0] > 2.0).astype(int)
    region = extract_region(labels, seeds, 0, UNIT, cell_size=0.5)
    # left half of the columns, give or take the cell containing the split
    cols = np.nonzero(region.grid.any(axis=0))[0]
    assert cols.min() == 0
    assert abs((cols.max() + 1) * 0.5 - 2.0) <= 0.5
    assert region.contains((1.0, 1.5))
    assert not region.contains((3.5, 1.5))


def test_extract_region_keeps_largest_component():
    # one 3-cell blob and one isolated cell of the same label
    seeds = np.array([
        [0.25, 0.25], [0.75, 0.25], [0.25, 0.75],
        [3.75, 2.75],
    ])
    labels = np.ones(4, dtype=int)
    region = extract_region(labels, seeds, 1, UNIT, cell_size=0.5)
    assert region.grid.sum() == 3
    assert region.contains((0.3, 0.3))
    assert not region.contains((3.75, 2.75))


def test_extract_region_errors():
    seeds = grid_seeds()
    labels = np.zeros(len(seeds), dtype=int)
    with pytest.raises(ValueError, match="empty"):
        extract_region(labels, seeds, 3, UNIT)
    with pytest.raises(ValueError):
        extract_region(labels[:-1], seeds, 0, UNIT)
    # a label that exists but is outvoted in its only cell
    seeds3 = np.array([[0.2, 0.2], [0.3, 0.3], [0.25, 0.25]])
    labels3 = np.array([0, 0, 1])
    with pytest.raises(ValueError, match="majority"):
        extract_region(labels3, seeds3, 1, UNIT, cell_size=1.0)


def test_region_mask_geometry():
    grid = np.ones((3, 3), dtype=bool)
    region = RegionMask(grid=grid, domain=UNIT, cell_size=1.0, cluster_id=0)
    assert np.array_equal(region.cell_center(0, 0), [0.5, 0.5])
    assert np.array_equal(region.cell_center(2, 1), [1.5, 2.5])
    assert region.cell_of((1.7, 0.2)) == (0, 1)
    assert region.contains((2.9, 2.9))
    assert not region.contains((3.5, 0.5))  # col 3 is outside the raster
    # a full 3x3 block: everything except the center touches the edge
    boundary = set(region.boundary_cells())
    assert (1, 1) not in boundary
    assert len(boundary) == 8
    centers = region.boundary_centers()
    assert centers.shape == (8, 2)


def test_region_mask_requires_a_true_cell():
    with pytest.raises(ValueError):
        RegionMask(
            grid=np.zeros((2, 2), dtype=bool),
            domain=UNIT,
            cell_size=1.0,
            cluster_id=0,
        )


# ---------------------------------------------------------------------------
# plans
# ---------------------------------------------------------------------------

def square_region():
    grid = np.zeros((6, 8), dtype=bool)
    grid[2:4, 3:5] = True  # cells covering x in [1.5, 2.5], y in [1.0, 2.0]
    return RegionMask(grid=grid, domain=UNIT, cell_size=0.5, cluster_id=0)


def test_plan_threads_region():
    region = square_region()
    plan = plan_waypoints(region, np.array([0.2, 1.5]), np.array([3.8, 1.5]))
    assert plan.modes == [THRUST, DRIFT, THRUST]
    entry, exit_, goal = plan.waypoints
    # entry on the near (left) face, exit on the far (right) face
    assert entry[0] == pytest.approx(1.75)
    assert exit_[0] == pytest.approx(2.25)
    assert np.array_equal(goal, [3.8, 1.5])


def test_plan_collapses_when_start_is_at_goal():
    region = square_region()
    plan = plan_waypoints(
        region, np.array([1.0, 1.0]), np.array([1.05, 1.0]), waypoint_radius=0.2
    )
    assert plan.modes == [THRUST]
    assert len(plan.waypoints) == 1


def test_plan_collapses_coincident_entry_and_exit():
    region = square_region()
    # start and goal both nearest the same boundary cell
    plan = plan_waypoints(region, np.array([1.7, 0.2]), np.array([1.8, 0.3]))
    assert plan.modes == [THRUST, THRUST]


def test_plan_rejects_consecutive_drift():
    with pytest.raises(ValueError):
        Plan(
            waypoints=[np.zeros(2), np.ones(2), 2 * np.ones(2)],
            modes=[DRIFT, DRIFT, THRUST],
        )
    with pytest.raises(ValueError):
        Plan(waypoints=[np.zeros(2)], modes=["COAST"])
    with pytest.raises(ValueError):
        Plan(waypoints=[np.zeros(2)], modes=[THRUST, THRUST])


def test_vehicle_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(u_max=-0.1)
    with pytest.raises(ValueError):
        VehicleParams(omega_max=0.0)
    with pytest.raises(ValueError):
        VehicleParams(goal_radius=-1.0)
    VehicleParams(u_max=0.0)  # becalmed vehicles are representable


# ---------------------------------------------------------------------------
# mission simulation
# ---------------------------------------------------------------------------

def test_still_water_energy_tracks_distance():
    vp = VehicleParams(u_max=0.2, omega_max=1.0, goal_radius=0.1)
    plan = Plan(waypoints=[np.array([2.0, 0.5])], modes=[THRUST])
    res = simulate_mission(still, plan, np.array([0.0, 0.5]), vp, dt=0.05)
    assert res.reached
    # the heading starts aligned, so the path is straight and the energy
    # equals the distance covered up to the goal disk and one time step
    travelled = 2.0 - np.linalg.norm(res.final_position - plan.waypoints[0])
    assert res.energy == pytest.approx(travelled, abs=vp.u_max * 0.05 + 1e-9)
    assert res.energy == pytest.approx(0.2 * res.duration)


def test_drift_leg_costs_nothing():
    vp = VehicleParams(u_max=0.2, omega_max=1.0, goal_radius=0.15)
    plan = Plan(waypoints=[np.array([1.0, 0.0])], modes=[DRIFT])
    res = simulate_mission(uniform(0.1, 0.0), plan, np.zeros(2), vp, dt=0.05)
    assert res.reached
    assert res.energy == 0.0
    assert not res.recovery_used
    assert all(u == 0.0 for _, _, _, u in res.trajectory)


def test_drift_timeout_triggers_thrust_recovery():
    vp = VehicleParams(u_max=0.2, omega_max=2.0, goal_radius=0.15)
    plan = Plan(waypoints=[np.array([1.0, 0.0])], modes=[DRIFT])
    # flow pushes away from the waypoint, so the drift leg can never
    # make contact and the deadline must fire
    res = simulate_mission(uniform(-0.05, 0.0), plan, np.zeros(2), vp, dt=0.05)
    assert res.recovery_used
    assert res.reached
    assert res.energy > 0


def test_becalmed_vehicle_never_moves():
    vp = VehicleParams(u_max=0.0, omega_max=1.0, goal_radius=0.15)
    plan = Plan(waypoints=[np.array([1.0, 0.0])], modes=[THRUST])
    res = simulate_mission(still, plan, np.zeros(2), vp, dt=0.1, t_max=5.0)
    assert not res.reached
    assert res.energy == 0.0
    assert np.array_equal(res.final_position, np.zeros(2))
    assert res.duration == pytest.approx(5.0)


def test_energy_decomposes_over_legs():
    vp = VehicleParams(u_max=0.2, omega_max=2.0, goal_radius=0.1,
                       waypoint_radius=0.1)
    region = square_region()
    plan = plan_waypoints(region, np.array([0.2, 1.5]), np.array([3.8, 1.5]))
    res = simulate_mission(
        uniform(0.12, 0.0), plan, np.array([0.2, 1.5]), vp, dt=0.05,
        region=region,
    )
    assert res.reached
    assert len(res.leg_energies) == len(plan.waypoints)
    assert sum(res.leg_energies) == pytest.approx(res.energy, abs=1e-12)
    assert res.leg_energies[1] == 0.0  # the drift leg


def test_mission_times_out_honestly():
    vp = VehicleParams(u_max=0.1, omega_max=1.0, goal_radius=0.05)
    plan = Plan(waypoints=[np.array([3.0, 0.0])], modes=[THRUST])
    res = simulate_mission(uniform(-0.2, 0.0), plan, np.zeros(2), vp,
                           dt=0.05, t_max=10.0)
    assert not res.reached
    assert res.duration == pytest.approx(10.0)


def test_naive_controller_crabs_across_flow():
    vp = VehicleParams(u_max=0.2, omega_max=2.0, goal_radius=0.1)
    res = naive_controller(uniform(0.0, 0.1), np.zeros(2), np.array([1.5, 0.0]), vp)
    assert res.reached
    assert res.energy == pytest.approx(0.2 * res.duration)


def test_simulate_rejects_bad_dt():
    vp = VehicleParams()
    plan = Plan(waypoints=[np.ones(2)], modes=[THRUST])
    with pytest.raises(ValueError):
        simulate_mission(still, plan, np.zeros(2), vp, dt=0.0)


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def test_write_mask_pgm(tmp_path):
    region = square_region()
    path = tmp_path / "mask.pgm"
    write_mask_pgm(region, path)
    data = path.read_bytes()
    header = b"P5\n8 6\n255\n"
    assert data.startswith(header)
    body = data[len(header):]
    assert len(body) == 48
    img = np.frombuffer(body, dtype=np.uint8).reshape(6, 8)
    # row 0 of the file is the top of the domain, so the mask rows flip
    assert np.array_equal(img[::-1] == 255, region.grid)


def test_mission_csv_and_summary(tmp_path):
    vp = VehicleParams(u_max=0.2, omega_max=1.0, goal_radius=0.1)
    plan = Plan(waypoints=[np.array([0.5, 0.0])], modes=[THRUST])
    res = simulate_mission(still, plan, np.zeros(2), vp, dt=0.05)
    csv_path = tmp_path / "mission.csv"
    mission_to_csv(res, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,x,y,theta,u"
    assert len(lines) == len(res.trajectory) + 1
    first = [float(v) for v in lines[1].split(",")]
    assert first == [0.0, 0.0, 0.0, 0.0, 0.0]

    summary = mission_summary(res, tmp_path / "mission.json")
    assert summary["reached"] is True
    assert summary["energy"] == pytest.approx(res.energy)
    import json

    loaded = json.loads((tmp_path / "mission.json").read_text())
    assert loaded == summary


def test_mission_result_final_position():
    res = MissionResult(
        trajectory=[(0.0, np.zeros(2), 0.0, 0.0), (0.1, np.ones(2), 0.0, 0.2)],
        reached=True,
        energy=0.01,
        duration=0.1,
    )
    assert np.array_equal(res.final_position, np.ones(2))
