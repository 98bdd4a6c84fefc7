"""Ingestion of externally observed trajectories (crowd-style data).

Track files are CSV with header ``frame,agent_id,x,y`` (a z column is
accepted for 3-d data). Rows may arrive in any order; a trajectory is
the frame-sorted sequence of observations per agent. Only agents
observed at every frame of a requested window enter an Ensemble, since
the Gram matrices need every particle at every snapshot and
interpolating gaps would inject dynamics that the detector would then
happily find.
"""

import sys
from dataclasses import dataclass, field

import numpy as np

from .advection import Ensemble
from .exceptions import IngestError

__all__ = [
    "TrackSet",
    "read_tracks",
    "write_tracks",
    "window_ensemble",
    "window_agents",
    "synth_crowd",
]


@dataclass
class TrackSet:
    """Observed trajectories keyed by agent id.

    tracks maps agent id to a frame-sorted list of (frame, position)
    pairs; frame_dt is the real-time spacing of consecutive frames.
    groups optionally carries construction labels for synthetic
    fixtures.
    """

    tracks: dict
    frame_dt: float
    groups: dict = field(default=None)

    def __post_init__(self):
        if self.frame_dt <= 0:
            raise ValueError("frame_dt must be positive")

    @property
    def n_agents(self):
        return len(self.tracks)


def _parse_agent(token):
    try:
        return int(token)
    except ValueError:
        return token


def read_tracks(path, frame_dt):
    """Load a track CSV into a TrackSet.

    Raises IngestError naming the offending line for malformed rows and
    duplicate (frame, agent) observations; an empty file is an error.
    """
    with open(path) as fh:
        header = fh.readline().strip()
        cols = [c.strip() for c in header.split(",")]
        if cols[:2] != ["frame", "agent_id"] or len(cols) < 4:
            raise IngestError(
                f"{path}:1: expected header frame,agent_id,x,y[,z], got {header!r}"
            )
        dim = len(cols) - 2
        seen = {}
        tracks = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + dim:
                raise IngestError(
                    f"{path}:{lineno}: expected {2 + dim} fields, got {len(parts)}"
                )
            try:
                frame = int(parts[0])
                agent = _parse_agent(parts[1])
                pos = np.array([float(v) for v in parts[2:]])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: {exc}") from None
            key = (frame, agent)
            if key in seen:
                raise IngestError(
                    f"{path}:{lineno}: duplicate observation for agent {agent} "
                    f"at frame {frame} (first seen on line {seen[key]})"
                )
            seen[key] = lineno
            tracks.setdefault(agent, []).append((frame, pos))
    if not tracks:
        raise IngestError(f"{path}: no observations")
    for agent in tracks:
        tracks[agent].sort(key=lambda fp: fp[0])
    return TrackSet(tracks=tracks, frame_dt=float(frame_dt))


def write_tracks(ts, path):
    """Write a TrackSet in the same CSV layout read_tracks consumes."""
    dim = len(next(iter(ts.tracks.values()))[0][1])
    cols = ",".join(["x", "y", "z"][:dim])
    with open(path, "w") as fh:
        fh.write(f"frame,agent_id,{cols}\n")
        for agent in sorted(ts.tracks, key=str):
            for frame, pos in ts.tracks[agent]:
                coords = ",".join(repr(float(v)) for v in pos)
                fh.write(f"{frame},{agent},{coords}\n")


def window_agents(ts, frame0, n_frames):
    """Agents observed at every frame of the window, in sorted order."""
    wanted = set(range(frame0, frame0 + n_frames))
    kept = []
    for agent, obs in ts.tracks.items():
        frames = {f for f, _ in obs}
        if wanted <= frames:
            kept.append(agent)
    return sorted(kept, key=str)


def window_ensemble(ts, frame0, n_frames):
    """Complete-track window of a TrackSet as an Ensemble.

    Agents missing any frame in [frame0, frame0 + n_frames) are
    dropped; a one-line drop report goes to stderr. Positions are taken
    exactly as observed.
    """
    if n_frames < 2:
        raise ValueError("a window needs at least 2 frames")
    kept = window_agents(ts, frame0, n_frames)
    dropped = ts.n_agents - len(kept)
    print(
        f"window [{frame0}, {frame0 + n_frames}): kept {len(kept)} agents, "
        f"dropped {dropped}",
        file=sys.stderr,
    )
    if not kept:
        raise IngestError("no agent is observed over the whole window")
    frames = range(frame0, frame0 + n_frames)
    dim = len(next(iter(ts.tracks.values()))[0][1])
    pos = np.empty((len(kept), n_frames, dim))
    for i, agent in enumerate(kept):
        lookup = {f: p for f, p in ts.tracks[agent]}
        for j, f in enumerate(frames):
            pos[i, j] = lookup[f]
    return Ensemble(pos, t0=frame0 * ts.frame_dt, dt_out=ts.frame_dt)


def synth_crowd(seed=0, n_agents=60, n_frames=51, scenario="platform"):
    """Deterministic synthetic crowd with known behavior groups.

    The ``platform`` scenario produces three equal groups: a lingering
    cluster drifting around the scene center, a left-to-right stream in
    the lower band, and a right-to-left stream in the upper band, all
    with small Gaussian jitter. Group labels are stored in ``groups``.

    Parameters
    ----------
    seed : int
    n_agents : int
        Split as evenly as possible across the three groups.
    n_frames : int
    scenario : {"platform"}

    Returns
    -------
    TrackSet
    """
    if scenario != "platform":
        raise ValueError(f"unknown scenario {scenario!r}")
    if n_agents < 1:
        raise ValueError("n_agents must be at least 1")
    rng = np.random.default_rng(seed)
    frame_dt = 0.4
    horizon = (n_frames - 1) * frame_dt
    sizes = [n_agents - 2 * (n_agents // 3), n_agents // 3, n_agents // 3]
    tracks = {}
    groups = {}
    agent = 0
    for g, size in enumerate(sizes):
        for _ in range(size):
            if g == 0:
                # lingering cluster near the center
                anchor = np.array([5.0, 2.0]) + rng.normal(0, 0.35, size=2)
                steps = rng.normal(0, 0.03, size=(n_frames, 2))
                path = anchor + np.cumsum(steps, axis=0)
            elif g == 1:
                # left-to-right stream, lower band
                start = np.array([rng.uniform(0.0, 1.5), rng.uniform(0.6, 1.4)])
                speed = 8.5 / horizon * rng.uniform(0.9, 1.1)
                drift = np.array([speed, 0.0])
                path = start + drift * (np.arange(n_frames) * frame_dt)[:, None]
                path = path + rng.normal(0, 0.04, size=(n_frames, 2))
            else:
                # right-to-left stream, upper band
                start = np.array([rng.uniform(8.5, 10.0), rng.uniform(2.6, 3.4)])
                speed = 8.5 / horizon * rng.uniform(0.9, 1.1)
                drift = np.array([-speed, 0.0])
                path = start + drift * (np.arange(n_frames) * frame_dt)[:, None]
                path = path + rng.normal(0, 0.04, size=(n_frames, 2))
            tracks[agent] = [(f, path[f].copy()) for f in range(n_frames)]
            groups[agent] = g
            agent += 1
    return TrackSet(tracks=tracks, frame_dt=frame_dt, groups=groups)
