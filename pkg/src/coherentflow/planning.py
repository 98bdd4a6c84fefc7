"""Coherence-aware waypoint planning and a surface-vehicle simulator.

A detected cluster is rasterized to a cell mask, the plan rides the
flow through that region (motors off) and only thrusts to reach and
leave it. The vehicle is a kinematic unicycle driven by a bounded
proportional heading controller; energy is the time integral of the
commanded forward speed, so drift legs are free by construction.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._validation import as_float_array, check_positions
from .flows import Domain

__all__ = [
    "RegionMask",
    "VehicleParams",
    "Plan",
    "MissionResult",
    "extract_region",
    "plan_waypoints",
    "simulate_mission",
    "naive_controller",
    "default_cell_size",
    "write_mask_pgm",
    "mission_to_csv",
    "mission_summary",
]

THRUST = "THRUST"
DRIFT = "DRIFT"


def default_cell_size(domain):
    """Domain diagonal over 60, the default raster resolution."""
    ext = np.asarray(domain.extent())
    return float(np.sqrt(np.sum(ext**2)) / 60.0)


@dataclass
class RegionMask:
    """Boolean raster of one detected cluster over a 2-d domain.

    grid is indexed [row, col] with row 0 at the domain's lower y edge;
    cells tile the domain starting at its lower corner with square
    cells of side cell_size (the top row and right column may overhang
    the upper corner).
    """

    grid: np.ndarray
    domain: Domain
    cell_size: float
    cluster_id: int

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=bool)
        if self.grid.ndim != 2:
            raise ValueError("grid must be 2-d")
        if not self.grid.any():
            raise ValueError("region mask has no true cell")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def shape(self):
        return self.grid.shape

    def cell_center(self, row, col):
        lx, ly = self.domain.lower
        return np.array(
            [lx + (col + 0.5) * self.cell_size, ly + (row + 0.5) * self.cell_size]
        )

    def cell_of(self, point):
        lx, ly = self.domain.lower
        col = int(np.floor((point[0] - lx) / self.cell_size))
        row = int(np.floor((point[1] - ly) / self.cell_size))
        return row, col

    def contains(self, point):
        row, col = self.cell_of(point)
        ny, nx = self.grid.shape
        if 0 <= row < ny and 0 <= col < nx:
            return bool(self.grid[row, col])
        return False

    def boundary_cells(self):
        """True cells touching a false cell or the raster edge (4-neighborhood)."""
        padded = np.pad(self.grid, 1, constant_values=False)
        interior = (
            padded[:-2, 1:-1]
            & padded[2:, 1:-1]
            & padded[1:-1, :-2]
            & padded[1:-1, 2:]
        )
        rows, cols = np.nonzero(self.grid & ~interior)
        return list(zip(rows.tolist(), cols.tolist()))

    def boundary_centers(self):
        cells = self.boundary_cells()
        return np.array([self.cell_center(r, c) for r, c in cells])


@dataclass(frozen=True)
class VehicleParams:
    u_max: float = 0.2
    omega_max: float = 1.0
    goal_radius: float = 0.15
    waypoint_radius: float = 0.15

    def __post_init__(self):
        if self.u_max < 0:
            raise ValueError("u_max must be non-negative")
        for name in ("omega_max", "goal_radius", "waypoint_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class Plan:
    """Waypoint sequence with one propulsion mode per leg."""

    waypoints: list
    modes: list

    def __post_init__(self):
        if len(self.waypoints) != len(self.modes):
            raise ValueError("one mode per waypoint leg")
        for m in self.modes:
            if m not in (THRUST, DRIFT):
                raise ValueError(f"unknown mode {m!r}")
        for a, b in zip(self.modes, self.modes[1:]):
            if a == DRIFT and b == DRIFT:
                raise ValueError("consecutive drift legs are not allowed")


@dataclass
class MissionResult:
    trajectory: list  # (t, pos, heading, u) samples
    reached: bool
    energy: float
    duration: float
    recovery_used: bool = False
    leg_energies: list = field(default_factory=list)

    @property
    def final_position(self):
        return self.trajectory[-1][1]


def extract_region(labels, seed_positions, cluster_id, domain, cell_size=None):
    """Rasterize one cluster into a RegionMask.

    A cell is true when the majority of the seed particles whose
    initial position falls in it carry cluster_id; only the largest
    4-connected component survives.
    """
    lab = labels.labels if hasattr(labels, "labels") else np.asarray(labels)
    pos = check_positions(as_float_array(seed_positions, "seed_positions", ndim=2))
    if pos.shape[1] != 2:
        raise ValueError("extract_region supports 2-d positions")
    if lab.shape[0] != pos.shape[0]:
        raise ValueError("labels and seed_positions disagree on particle count")
    if not np.any(lab == cluster_id):
        raise ValueError(f"cluster {cluster_id} is empty")
    if cell_size is None:
        cell_size = default_cell_size(domain)
    lx, ly = domain.lower
    ex, ey = domain.extent()
    nx = max(1, int(math.ceil(ex / cell_size)))
    ny = max(1, int(math.ceil(ey / cell_size)))
    cols = np.clip(np.floor((pos[:, 0] - lx) / cell_size).astype(int), 0, nx - 1)
    rows = np.clip(np.floor((pos[:, 1] - ly) / cell_size).astype(int), 0, ny - 1)
    flat = rows * nx + cols
    total = np.bincount(flat, minlength=nx * ny)
    hits = np.bincount(flat[lab == cluster_id], minlength=nx * ny)
    grid = (2 * hits > total).reshape(ny, nx)
    if not grid.any():
        raise ValueError(f"cluster {cluster_id} holds no cell majority anywhere")
    comp, n_comp = ndimage.label(grid)
    if n_comp > 1:
        sizes = ndimage.sum_labels(grid, comp, index=np.arange(1, n_comp + 1))
        grid = comp == (1 + int(np.argmax(sizes)))
    return RegionMask(grid=grid, domain=domain, cell_size=cell_size, cluster_id=int(cluster_id))


def plan_waypoints(region, start, goal, waypoint_radius=0.0):
    """Three-leg plan threading the region between start and goal.

    Waypoints are [entry, exit, goal] where entry is the region
    boundary cell center nearest the start and exit the one nearest the
    goal, giving legs THRUST, DRIFT, THRUST. Degenerate geometries
    collapse: a start already within waypoint_radius of the goal yields
    one thrust leg, and coincident entry/exit drops the drift leg.
    """
    start = as_float_array(start, "start", ndim=1)
    goal = as_float_array(goal, "goal", ndim=1)
    if waypoint_radius and np.linalg.norm(goal - start) <= waypoint_radius:
        return Plan(waypoints=[goal], modes=[THRUST])
    centers = region.boundary_centers()
    entry = centers[np.argmin(np.linalg.norm(centers - start, axis=1))]
    exit_ = centers[np.argmin(np.linalg.norm(centers - goal, axis=1))]
    if np.array_equal(entry, exit_):
        return Plan(waypoints=[entry, goal], modes=[THRUST, THRUST])
    return Plan(waypoints=[entry, exit_, goal], modes=[THRUST, DRIFT, THRUST])


def _wrap_angle(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _step(field, pos, theta, u, omega, t, dt):
    """One RK4 step of the unicycle with controls held over the step."""

    def deriv(state, tau):
        x, y, th = state
        fx, fy = field(np.array([x, y]), tau)
        return np.array([u * math.cos(th) + fx, u * math.sin(th) + fy, omega])

    s = np.array([pos[0], pos[1], theta])
    k1 = deriv(s, t)
    k2 = deriv(s + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = deriv(s + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = deriv(s + dt * k3, t + dt)
    s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return s[:2], _wrap_angle(s[2])


def _drift_timeout(field, region, t):
    """Three estimated gyre revolutions, from flow sampled over the region."""
    rows, cols = np.nonzero(region.grid)
    centers = np.array([region.cell_center(r, c) for r, c in zip(rows, cols)])
    speeds = np.array([np.linalg.norm(field(p, t)) for p in centers])
    mean_speed = float(np.mean(speeds))
    ext = centers.max(axis=0) - centers.min(axis=0) + region.cell_size
    radius = float(np.mean(ext)) / 2.0
    if mean_speed <= 1e-12:
        return math.inf
    return 3.0 * (2.0 * math.pi * radius / mean_speed)


def simulate_mission(field, plan, start, vp, dt=0.05, t0=0.0, t_max=600.0, region=None):
    """Fly a waypoint plan through a flow field.

    Thrust legs command u = u_max with heading rate
    omega_max·sat(err/π) toward the active waypoint; drift legs cut
    both commands and end on waypoint_radius contact or on a timeout of
    three estimated revolutions, after which the leg finishes under
    thrust (recovery, flagged). The mission ends when the final
    waypoint is inside goal_radius or at t_max (reached=false).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = as_float_array(start, "start", ndim=1).copy()
    goal = plan.waypoints[-1]
    theta = math.atan2(*(plan.waypoints[0] - pos)[::-1])
    t = t0
    energy = 0.0
    leg_energies = [0.0 for _ in plan.waypoints]
    recovery = False
    traj = [(t, pos.copy(), theta, 0.0)]
    leg = 0
    drift_deadline = None
    drift_recovering = False
    reached = False
    while t < t0 + t_max - 1e-12:
        wp = plan.waypoints[leg]
        mode = plan.modes[leg]
        final_leg = leg == len(plan.waypoints) - 1
        radius = vp.goal_radius if final_leg else vp.waypoint_radius
        if np.linalg.norm(wp - pos) <= radius:
            if final_leg:
                reached = True
                break
            leg += 1
            drift_deadline = None
            drift_recovering = False
            continue
        if mode == DRIFT and not drift_recovering:
            if drift_deadline is None:
                drift_deadline = t + _drift_timeout(
                    field, region, t
                ) if region is not None else t + 3.0 * (
                    2.0 * math.pi * np.linalg.norm(wp - pos) / max(vp.u_max, 1e-12)
                )
            if t >= drift_deadline:
                drift_recovering = True
                recovery = True
        if mode == THRUST or drift_recovering:
            u = vp.u_max
            err = _wrap_angle(math.atan2(*(wp - pos)[::-1]) - theta)
            omega = vp.omega_max * max(-1.0, min(1.0, err / math.pi))
        else:
            u = 0.0
            omega = 0.0
        pos, theta = _step(field, pos, theta, u, omega, t, dt)
        energy += u * dt
        leg_energies[leg] += u * dt
        t += dt
        traj.append((t, pos.copy(), theta, u))
    else:
        # loop exhausted t_max; check terminal contact once more
        reached = np.linalg.norm(goal - pos) <= vp.goal_radius
    return MissionResult(
        trajectory=traj,
        reached=reached,
        energy=energy,
        duration=t - t0,
        recovery_used=recovery,
        leg_energies=leg_energies,
    )


def naive_controller(field, start, goal, vp, dt=0.05, t0=0.0, t_max=600.0):
    """Always-thrust proportional-heading run straight at the goal."""
    goal = as_float_array(goal, "goal", ndim=1)
    plan = Plan(waypoints=[goal], modes=[THRUST])
    return simulate_mission(field, plan, start, vp, dt=dt, t0=t0, t_max=t_max)


def write_mask_pgm(region, path):
    """Binary PGM (P5) raster of the mask, row 0 at the top of the image."""
    ny, nx = region.grid.shape
    img = np.where(region.grid[::-1], 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def mission_to_csv(result, path):
    with open(path, "w") as fh:
        fh.write("t,x,y,theta,u\n")
        for t, pos, theta, u in result.trajectory:
            fields = (float(t), float(pos[0]), float(pos[1]), float(theta), float(u))
            fh.write(",".join(repr(v) for v in fields) + "\n")


def mission_summary(result, path=None):
    summary = {
        "reached": bool(result.reached),
        "energy": float(result.energy),
        "duration": float(result.duration),
        "recovery_used": bool(result.recovery_used),
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary
