"""Analytic benchmark velocity fields and particle seeding.

Three time-dependent planar flows are provided: an oscillating double
gyre on [0, 2] x [0, 1], a meandering zonal jet with traveling waves on
a periodic channel, and a steady single-cell gyre for the navigation
scenario. Each flow is described by a frozen parameter record with a
``velocity(pos, t)`` method; the free functions below carry the actual
formulas and are vectorized over leading axes of ``pos``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_float_array

__all__ = [
    "Domain",
    "DoubleGyreParams",
    "BickleyParams",
    "SingleGyreParams",
    "double_gyre_velocity",
    "bickley_velocity",
    "single_gyre_velocity",
    "seed_grid",
    "make_flow",
]


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box with optional periodic axes.

    Parameters
    ----------
    lower, upper : tuple of float
        Box corners, ``lower < upper`` componentwise.
    wrap_axes : tuple of int, optional
        Axis indices treated as periodic with period ``upper - lower``.
    """

    lower: tuple
    upper: tuple
    wrap_axes: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have the same dimension")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("domain corners must satisfy lower < upper")
        wrap = tuple(sorted(int(a) for a in set(self.wrap_axes)))
        if any(a < 0 or a >= len(lo) for a in wrap):
            raise ValueError("wrap axis index out of range")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "wrap_axes", wrap)

    @property
    def dim(self):
        return len(self.lower)

    def extent(self):
        return tuple(b - a for a, b in zip(self.lower, self.upper))


@dataclass(frozen=True)
class DoubleGyreParams:
    """Oscillating double gyre on [0, 2] x [0, 1]."""

    eps: float = 0.25
    alpha: float = 0.25
    amp: float = 0.25
    omega: float = 2.0 * math.pi

    def __post_init__(self):
        if self.amp <= 0 or self.omega <= 0:
            raise ValueError("amp and omega must be positive")

    def velocity(self, pos, t):
        return double_gyre_velocity(pos, t, self)

    def default_domain(self):
        return Domain((0.0, 0.0), (2.0, 1.0))


_U0 = 5.4138
_L0 = 1.77
_R0 = 6.371


@dataclass(frozen=True)
class BickleyParams:
    """Meandering zonal jet with three traveling Rossby-like waves."""

    u0: float = _U0
    l0: float = _L0
    c1: float = 0.1446 * _U0
    c2: float = 0.2053 * _U0
    c3: float = 0.4561 * _U0
    eps1: float = 0.075
    eps2: float = 0.4
    eps3: float = 0.3
    r0: float = _R0
    k1: float = 2.0 / _R0
    k2: float = 4.0 / _R0
    k3: float = 6.0 / _R0

    def velocity(self, pos, t):
        return bickley_velocity(pos, t, self)

    def default_domain(self):
        return Domain((0.0, -3.0), (20.0, 3.0), wrap_axes=(0,))


@dataclass(frozen=True)
class SingleGyreParams:
    """Steady one-cell recirculation filling a rectangular tank."""

    amp: float = 0.1
    domain: Domain = field(
        default_factory=lambda: Domain((0.0, 0.0), (4.5, 3.0))
    )

    def __post_init__(self):
        if self.amp <= 0:
            raise ValueError("amp must be positive")

    def velocity(self, pos, t):
        return single_gyre_velocity(pos, t, self)

    def default_domain(self):
        return self.domain


def double_gyre_velocity(pos, t, p=DoubleGyreParams()):
    """Velocity of the oscillating double gyre.

    The stream pattern is ``sin(pi f(x, t)) sin(pi y)`` where
    ``f(x, t) = eps sin(omega t) x^2 + (1 - 2 eps sin(omega t)) x``
    sloshes the internal separatrix left and right once per period.
    All four walls of [0, 2] x [0, 1] are invariant.

    Parameters
    ----------
    pos : array_like, shape (..., 2)
        Evaluation positions.
    t : float
        Time.
    p : DoubleGyreParams

    Returns
    -------
    ndarray, shape (..., 2)
        Velocity (dx/dt, dy/dt) at each position.
    """
    pos = np.asarray(pos, dtype=float)
    x = pos[..., 0]
    y = pos[..., 1]
    s = math.sin(p.omega * t)
    f = p.eps * s * x * x + (1.0 - 2.0 * p.eps * s) * x
    dfdx = 2.0 * p.alpha * s * x + (1.0 - 2.0 * p.alpha * s)
    u = -math.pi * p.amp * np.sin(math.pi * f) * np.cos(math.pi * y)
    v = math.pi * p.amp * np.cos(math.pi * f) * np.sin(math.pi * y) * dfdx
    return np.stack([u, v], axis=-1)


def bickley_velocity(pos, t, p=BickleyParams()):
    """Velocity of the traveling-wave jet.

    Derived from the stream function
    ``psi = -u0 l0 tanh(y/l0) + u0 l0 sech^2(y/l0) sum_n eps_n cos(k_n (x - c_n t))``
    through the incompressible convention ``dx/dt = -dpsi/dy``,
    ``dy/dt = dpsi/dx``, which keeps the field divergence-free and the
    jet core eastward.

    Parameters
    ----------
    pos : array_like, shape (..., 2)
    t : float
    p : BickleyParams

    Returns
    -------
    ndarray, shape (..., 2)
    """
    pos = np.asarray(pos, dtype=float)
    x = pos[..., 0]
    y = pos[..., 1]
    ks = np.array([p.k1, p.k2, p.k3])
    cs = np.array([p.c1, p.c2, p.c3])
    es = np.array([p.eps1, p.eps2, p.eps3])
    sech2 = 1.0 / np.cosh(y / p.l0) ** 2
    th = np.tanh(y / p.l0)
    phase = ks * (x[..., None] - cs * t)
    wave = (es * np.cos(phase)).sum(axis=-1)
    wave_x = (es * ks * np.sin(phase)).sum(axis=-1)
    u = p.u0 * sech2 * (1.0 + 2.0 * th * wave)
    v = -p.u0 * p.l0 * sech2 * wave_x
    return np.stack([u, v], axis=-1)


def single_gyre_velocity(pos, t, p):
    """Velocity of the steady tank gyre.

    Stream function ``amp sin(pi xt) sin(pi yt)`` in coordinates
    rescaled to the unit square, so the normal velocity vanishes on
    every wall and the core stagnates at the tank center. Time is
    accepted for interface uniformity and ignored.
    """
    pos = np.asarray(pos, dtype=float)
    (lx, ly), (hx_, hy_) = p.domain.lower, p.domain.upper
    hx = hx_ - lx
    hy = hy_ - ly
    xt = (pos[..., 0] - lx) / hx
    yt = (pos[..., 1] - ly) / hy
    u = -math.pi * p.amp * np.sin(math.pi * xt) * np.cos(math.pi * yt) / hy
    v = math.pi * p.amp * np.cos(math.pi * xt) * np.sin(math.pi * yt) / hx
    return np.stack([u, v], axis=-1)


def seed_grid(domain, counts):
    """Uniform grid of seed positions covering a domain.

    Endpoints are included on every axis. The first axis varies
    fastest, so for a 2-D domain the result enumerates x within each y
    row: (x0, y0), (x1, y0), ..., (x0, y1), ...

    Parameters
    ----------
    domain : Domain
    counts : sequence of int
        Points per axis, each at least 2.

    Returns
    -------
    ndarray, shape (prod(counts), dim)
    """
    counts = [int(c) for c in counts]
    if len(counts) != domain.dim:
        raise ValueError("counts must give one entry per domain axis")
    if any(c < 2 for c in counts):
        raise ValueError("counts must be at least 2 per axis")
    axes = [
        np.linspace(lo, hi, c)
        for lo, hi, c in zip(domain.lower, domain.upper, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel(order="F") for g in mesh], axis=1)


_FLOWS = {
    "double_gyre": DoubleGyreParams,
    "bickley": BickleyParams,
    "single_gyre": SingleGyreParams,
}


def make_flow(name, **overrides):
    """Construct a named flow parameter record.

    Parameters
    ----------
    name : {"double_gyre", "bickley", "single_gyre"}
    **overrides
        Field values replacing the defaults.

    Returns
    -------
    Parameter record with ``velocity`` and ``default_domain`` methods.
    """
    try:
        cls = _FLOWS[name]
    except KeyError:
        raise ValueError(
            f"unknown flow {name!r}; expected one of {sorted(_FLOWS)}"
        ) from None
    return cls(**overrides)


def _velocity_fn(field_like):
    """Accept a params record or a bare callable(pos, t)."""
    if hasattr(field_like, "velocity"):
        return field_like.velocity
    if callable(field_like):
        return field_like
    raise TypeError("field must expose velocity(pos, t) or be callable")
