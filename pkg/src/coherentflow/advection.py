"""Particle advection and trajectory snapshot handling.

``integrate_ensemble`` pushes a whole seed set through a flow and
records uniformly spaced snapshots, optionally wrapping periodic axes
after every output step. Snapshots, not solver internals, are the
product: everything downstream consumes the (n, T+1, d) position
array.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ._validation import check_positions
from .exceptions import IntegrationError
from .flows import _velocity_fn

__all__ = [
    "IntegratorConfig",
    "Ensemble",
    "advance",
    "integrate_ensemble",
    "wrap",
    "write_ensemble_csv",
    "read_ensemble_csv",
    "write_ensemble_bin",
    "read_ensemble_bin",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping choices for particle advection.

    method "rk45_adaptive" uses an embedded Runge-Kutta 4(5) pair with
    error control; "rk4_fixed" takes classical fourth-order steps of
    size ``fixed_step`` (one step per call when unset).
    """

    method: str = "rk45_adaptive"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = np.inf
    fixed_step: float = 0.0

    def __post_init__(self):
        if self.method not in ("rk45_adaptive", "rk4_fixed"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.fixed_step < 0:
            raise ValueError("fixed_step must be nonnegative")


@dataclass
class Ensemble:
    """Uniformly sampled trajectories of a particle set.

    Attributes
    ----------
    positions : ndarray, shape (n_particles, n_snapshots, d)
    t0 : float
        Time of the first snapshot.
    dt_out : float
        Spacing between snapshots.
    domain : Domain or None
        Carried along for wrapping metadata; optional.
    """

    positions: np.ndarray
    t0: float
    dt_out: float
    domain: object = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 3:
            raise ValueError("positions must have shape (n, T+1, d)")
        if self.positions.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        if self.dt_out <= 0:
            raise ValueError("dt_out must be positive")

    @property
    def n_particles(self):
        return self.positions.shape[0]

    @property
    def n_snapshots(self):
        return self.positions.shape[1]

    @property
    def dim(self):
        return self.positions.shape[2]

    def times(self):
        return self.t0 + self.dt_out * np.arange(self.n_snapshots)

    def snapshot(self, index):
        return self.positions[:, index, :]


def wrap(pos, domain):
    """Map coordinates on periodic axes into [lower, upper).

    Non-periodic axes pass through untouched. Works on single positions
    and on arrays with trailing coordinate axis.
    """
    out = np.array(pos, dtype=float, copy=True)
    for ax in domain.wrap_axes:
        lo = domain.lower[ax]
        period = domain.upper[ax] - domain.lower[ax]
        out[..., ax] = lo + np.mod(out[..., ax] - lo, period)
    return out


def _rk4_steps(fn, y, t, dt, n_sub):
    h = dt / n_sub
    for i in range(n_sub):
        ti = t + i * h
        k1 = fn(ti, y)
        k2 = fn(ti + 0.5 * h, y + 0.5 * h * k1)
        k3 = fn(ti + 0.5 * h, y + 0.5 * h * k2)
        k4 = fn(ti + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _segment(fn, y0, t, dt, cfg, what):
    """Advance a flat state vector from t to t+dt."""
    if cfg.method == "rk4_fixed":
        sub = cfg.fixed_step if cfg.fixed_step > 0 else dt
        n_sub = max(1, int(round(dt / sub)))
        return _rk4_steps(fn, y0, t, dt, n_sub)
    sol = solve_ivp(
        fn,
        (t, t + dt),
        y0,
        method="RK45",
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=min(cfg.max_step, dt),
    )
    if sol.status != 0:
        raise IntegrationError(f"adaptive step failed for {what}: {sol.message}")
    return sol.y[:, -1]


def advance(field, pos, t, dt, cfg=IntegratorConfig()):
    """Advance one position through the flow from t to t+dt.

    Parameters
    ----------
    field : flow params record or callable(pos, t) -> velocity
    pos : array_like, shape (d,) or (n, d)
    t, dt : float
    cfg : IntegratorConfig

    Returns
    -------
    ndarray, same shape as ``pos``
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    vel = _velocity_fn(field)
    pos = np.asarray(pos, dtype=float)
    shape = pos.shape

    def fn(s, y):
        return np.asarray(vel(y.reshape(shape), s), dtype=float).ravel()

    out = _segment(fn, pos.ravel().copy(), float(t), float(dt), cfg, "position")
    if not np.all(np.isfinite(out)):
        raise IntegrationError("advance produced non-finite coordinates")
    return out.reshape(shape)


def integrate_ensemble(field, seeds, t0, t_end, dt_out, cfg=IntegratorConfig(),
                       domain=None):
    """Advect a seed set and collect uniformly spaced snapshots.

    All particles are integrated as one stacked system per output
    segment, so the velocity field is evaluated in vectorized form.
    When ``domain`` has periodic axes, wrapping is applied to each
    stored snapshot and integration continues from the wrapped state;
    substeps may leave the window freely since the fields are periodic
    there.

    Parameters
    ----------
    field : flow params record or callable(pos, t) -> velocity
    seeds : ndarray, shape (n, d)
    t0, t_end : float
        Window with ``t_end > t0``.
    dt_out : float
        Snapshot spacing; must divide the window within 1e-9.
    cfg : IntegratorConfig
    domain : Domain, optional

    Returns
    -------
    Ensemble
    """
    seeds = check_positions(seeds, "seeds")
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    span = float(t_end) - float(t0)
    n_steps = int(round(span / dt_out))
    if n_steps < 1 or abs(n_steps * dt_out - span) > 1e-9:
        raise ValueError("dt_out must divide the time window")
    vel = _velocity_fn(field)
    n, d = seeds.shape

    def fn(s, y):
        return np.asarray(vel(y.reshape(n, d), s), dtype=float).ravel()

    state = seeds.copy()
    if domain is not None:
        state = wrap(state, domain)
    out = np.empty((n, n_steps + 1, d))
    out[:, 0] = state
    for step in range(n_steps):
        t = t0 + step * dt_out
        flat = _segment(fn, state.ravel(), t, dt_out, cfg, f"segment {step}")
        state = flat.reshape(n, d)
        bad = ~np.all(np.isfinite(state), axis=1)
        if bad.any():
            raise IntegrationError(
                f"particle {int(np.flatnonzero(bad)[0])} diverged in segment {step}"
            )
        if domain is not None:
            state = wrap(state, domain)
        out[:, step + 1] = state
    return Ensemble(out, float(t0), float(dt_out), domain)


_MAGIC = b"CFE1"


def write_ensemble_bin(ensemble, path):
    """Write an ensemble in the compact binary layout.

    Layout: magic "CFE1", then little-endian u32 n, u32 T+1, u32 d,
    f64 t0, f64 dt_out, then all positions as f64 in particle-major
    order.
    """
    p = ensemble.positions
    n, t1, d = p.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIIdd", n, t1, d, ensemble.t0, ensemble.dt_out))
        fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def read_ensemble_bin(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an ensemble file (bad magic {magic!r})")
        n, t1, d, t0, dt_out = struct.unpack("<IIIdd", fh.read(28))
        data = np.frombuffer(fh.read(n * t1 * d * 8), dtype="<f8")
    if data.size != n * t1 * d:
        raise ValueError(f"{path}: truncated ensemble payload")
    return Ensemble(data.reshape(n, t1, d).copy(), t0, dt_out)


def write_ensemble_csv(ensemble, path):
    """Write an ensemble as rows of particle_id,step,t,x0..x{d-1}."""
    p = ensemble.positions
    n, t1, d = p.shape
    times = ensemble.times()
    cols = ",".join(f"x{j}" for j in range(d))
    with open(path, "w") as fh:
        fh.write(f"particle_id,step,t,{cols}\n")
        for i in range(n):
            for s in range(t1):
                coords = ",".join(repr(float(v)) for v in p[i, s])
                fh.write(f"{i},{s},{float(times[s])!r},{coords}\n")


def read_ensemble_csv(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["particle_id", "step", "t"]:
            raise ValueError(f"{path}: unexpected ensemble CSV header {header}")
        d = len(header) - 3
        rows = {}
        tvals = {}
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            i, s = int(parts[0]), int(parts[1])
            tvals[s] = float(parts[2])
            rows[(i, s)] = [float(v) for v in parts[3:3 + d]]
    n = max(i for i, _ in rows) + 1
    t1 = max(s for _, s in rows) + 1
    p = np.empty((n, t1, d))
    for (i, s), xyz in rows.items():
        p[i, s] = xyz
    t0 = tvals.get(0, 0.0)
    dt_out = tvals[1] - tvals[0] if t1 > 1 else 1.0
    return Ensemble(p, t0, dt_out)
