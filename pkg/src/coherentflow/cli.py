"""Command-line front end: simulate, detect, evaluate, plan, version.

Every command takes ``--config file.toml`` plus ``--section.key value``
overrides and writes its artifacts under the configured output
directory together with a manifest (config echo, per-file SHA-256,
combined content hash, timestamp). Outputs are deterministic for a
fixed config; only the manifest timestamp differs between reruns.

Exit codes: 0 success, 2 configuration error, 1 runtime failure.
"""

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .advection import (
    IntegratorConfig,
    integrate_ensemble,
    read_ensemble_bin,
    read_ensemble_csv,
    write_ensemble_bin,
    write_ensemble_csv,
)
from .cluster import Labeling
from .config import load_config
from .detection import detect_per_step
from .exceptions import CoherentFlowError, ConfigError
from .flows import make_flow, seed_grid
from .kernels import KernelSpec
from .metrics import (
    evaluate_run,
    format_score_table,
    ground_truth,
    report_to_json,
)
from .operators import OperatorConfig
from .planning import (
    VehicleParams,
    extract_region,
    mission_summary,
    mission_to_csv,
    naive_controller,
    plan_waypoints,
    simulate_mission,
    write_mask_pgm,
)
from .tracks import read_tracks, window_agents, window_ensemble

_thread_limiter = None


def _apply_thread_cap():
    global _thread_limiter
    cap = os.environ.get("COHERENTFLOW_THREADS")
    if not cap:
        return
    try:
        n = int(cap)
    except ValueError:
        raise ConfigError(f"COHERENTFLOW_THREADS must be an integer, got {cap!r}") from None
    if n < 1:
        raise ConfigError("COHERENTFLOW_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits

    _thread_limiter = threadpool_limits(limits=n)


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(outdir, command, cfg, files):
    per_file = {Path(f).name: _sha256(f) for f in files}
    combined = hashlib.sha256(
        "\n".join(f"{name}:{h}" for name, h in sorted(per_file.items())).encode()
    ).hexdigest()
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "files": per_file,
        "content_hash": combined,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    path = Path(outdir) / f"manifest_{command}.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _kernel_from(cfg):
    return KernelSpec(
        kind=cfg["kernel.kind"],
        sigma=cfg["kernel.sigma"],
        degree=cfg["kernel.degree"],
        offset=cfg["kernel.offset"],
    )


def _operator_from(cfg):
    return OperatorConfig(
        epsilon=cfg["operator.epsilon"],
        n_eigen=cfg["operator.n_eigen"],
        imag_tol=cfg["operator.imag_tol"],
    )


def _flow_from(cfg):
    env = cfg.environment
    if env == "single_gyre":
        flow = make_flow("single_gyre", amp=cfg["plan.amp"])
    else:
        flow = make_flow(env)
    return flow, flow.default_domain()


def _is_csv_env(cfg):
    return cfg.environment.startswith("csv:")


def _load_ensemble(cfg):
    """Ensemble for detection: simulated file or ingested track window."""
    if _is_csv_env(cfg):
        ts = read_tracks(cfg["tracks.path"], cfg["tracks.frame_dt"])
        return window_ensemble(ts, cfg["tracks.frame0"], cfg["tracks.n_frames"])
    outdir = Path(cfg.outdir)
    bin_path = outdir / "ensemble.cfe"
    csv_path = outdir / "ensemble.csv"
    if bin_path.exists():
        return read_ensemble_bin(bin_path)
    if csv_path.exists():
        return read_ensemble_csv(csv_path)
    raise CoherentFlowError(
        f"no ensemble under {outdir}; run the simulate command first"
    )


def cmd_simulate(cfg):
    if _is_csv_env(cfg):
        raise ConfigError("csv environments are ingested, not simulated")
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    flow, domain = _flow_from(cfg)
    seeds = seed_grid(domain, (cfg["grid.nx"], cfg["grid.ny"]))
    ens = integrate_ensemble(
        flow,
        seeds,
        cfg["time.t0"],
        cfg["time.t_end"],
        cfg["time.dt_out"],
        cfg=IntegratorConfig(),
        domain=domain,
    )
    bin_path = outdir / "ensemble.cfe"
    csv_path = outdir / "ensemble.csv"
    write_ensemble_bin(ens, bin_path)
    write_ensemble_csv(ens, csv_path)
    _write_manifest(outdir, "simulate", cfg, [bin_path, csv_path])
    print(
        f"simulate: {ens.n_particles} particles, {ens.n_snapshots} snapshots "
        f"-> {bin_path}"
    )
    return 0


def _write_labels_csv(labels, path):
    with open(path, "w") as fh:
        fh.write("particle_id,label\n")
        for i, lab in enumerate(np.asarray(labels, dtype=int)):
            fh.write(f"{i},{lab}\n")


def _read_labels_csv(path):
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "particle_id,label":
            raise CoherentFlowError(f"{path}: not a label file")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    rows.sort(key=lambda r: int(r[0]))
    return np.array([int(lab) for _, lab in rows])


def cmd_detect(cfg, mode):
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ens = _load_ensemble(cfg)
    per_step, eigen_trace = detect_per_step(
        ens,
        _kernel_from(cfg),
        _operator_from(cfg),
        cfg["cluster.k"],
        mode=mode,
        seed=cfg["run.seed"],
        restarts=cfg["cluster.restarts"],
    )
    label_dir = outdir / f"labels_{mode}"
    label_dir.mkdir(exist_ok=True)
    files = []
    index_rows = []
    for step, (t, lab) in enumerate(per_step, start=1):
        name = f"step_{step:04d}.csv"
        _write_labels_csv(lab.labels, label_dir / name)
        files.append(label_dir / name)
        index_rows.append((step, t, name))
    index_path = label_dir / "index.csv"
    with open(index_path, "w") as fh:
        fh.write("step,t,file\n")
        for step, t, name in index_rows:
            fh.write(f"{step},{float(t)!r},{name}\n")
    files.append(index_path)
    trace_path = outdir / f"eigenvalues_{mode}.csv"
    k_ev = len(eigen_trace[0][1])
    with open(trace_path, "w") as fh:
        fh.write("step,t," + ",".join(f"ev{j + 1}" for j in range(k_ev)) + "\n")
        for step, (t, evs) in enumerate(eigen_trace, start=1):
            fh.write(
                f"{step},{float(t)!r},"
                + ",".join(repr(float(v)) for v in evs)
                + "\n"
            )
    files.append(trace_path)
    _write_manifest(outdir, f"detect_{mode}", cfg, files)
    print(f"detect ({mode}): {len(per_step)} steps -> {label_dir}")
    return 0


def _truth_labeling(cfg, ens):
    if _is_csv_env(cfg) and cfg["tracks.labels"]:
        by_agent = {}
        with open(cfg["tracks.labels"]) as fh:
            header = fh.readline()
            if header.strip() != "particle_id,label":
                raise CoherentFlowError(f"{cfg['tracks.labels']}: not a label file")
            for line in fh:
                if line.strip():
                    agent, lab = line.strip().split(",")
                    by_agent[agent] = int(lab)
        ts = read_tracks(cfg["tracks.path"], cfg["tracks.frame_dt"])
        kept = window_agents(ts, cfg["tracks.frame0"], cfg["tracks.n_frames"])
        labels = np.array([by_agent[str(a)] for a in kept])
        return Labeling(labels=labels, k=int(labels.max()) + 1)
    return ground_truth(
        ens,
        _kernel_from(cfg),
        _operator_from(cfg),
        cfg["cluster.k"],
        cfg["truth.tau_index"],
        runs=cfg["truth.runs"],
        seed=cfg["run.seed"],
    )


def _read_per_step(outdir, mode, k):
    label_dir = Path(outdir) / f"labels_{mode}"
    index_path = label_dir / "index.csv"
    if not index_path.exists():
        raise CoherentFlowError(
            f"no {mode} detection outputs under {outdir}; run detect --mode {mode}"
        )
    per_step = []
    with open(index_path) as fh:
        fh.readline()
        for line in fh:
            if not line.strip():
                continue
            _, t, name = line.strip().split(",")
            labels = _read_labels_csv(label_dir / name)
            per_step.append((float(t), Labeling(labels=labels, k=k)))
    return per_step


def cmd_evaluate(cfg):
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ens = _load_ensemble(cfg)
    truth = _truth_labeling(cfg, ens)
    k = cfg["cluster.k"]
    reports = {}
    files = []
    for mode in ("offline", "online"):
        per_step = _read_per_step(outdir, mode, k)
        report = evaluate_run(per_step, truth)
        reports[mode] = report
        path = outdir / f"scores_{mode}.json"
        report_to_json(report, method=mode, environment=cfg.environment, path=path)
        files.append(path)
    table = format_score_table(reports)
    table_path = outdir / "scores_table.txt"
    table_path.write_text(table + "\n")
    files.append(table_path)
    _write_manifest(outdir, "evaluate", cfg, files)
    print(table)
    return 0


def _overlay_pgm(region, missions, path):
    """Graymap of the mask with mission tracks burned in, one byte per cell."""
    grid = np.where(region.grid, 96, 0).astype(np.uint8)
    shades = (255, 176)
    ny, nx = grid.shape
    for shade, mission in zip(shades, missions):
        for _, pos, _, _ in mission.trajectory:
            row, col = region.cell_of(pos)
            if 0 <= row < ny and 0 <= col < nx:
                grid[row, col] = shade
    img = grid[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def cmd_plan(cfg):
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    flow, domain = _flow_from(cfg)
    seeds = seed_grid(domain, (cfg["grid.nx"], cfg["grid.ny"]))
    ens = integrate_ensemble(
        flow,
        seeds,
        cfg["time.t0"],
        cfg["time.t_end"],
        cfg["time.dt_out"],
        cfg=IntegratorConfig(),
        domain=domain,
    )
    labeling = ground_truth(
        ens,
        _kernel_from(cfg),
        _operator_from(cfg),
        cfg["cluster.k"],
        cfg["truth.tau_index"],
        runs=cfg["truth.runs"],
        seed=cfg["run.seed"],
    )
    center = np.asarray(domain.lower) + 0.5 * np.asarray(domain.extent())
    core_particle = int(np.argmin(np.linalg.norm(seeds - center, axis=1)))
    cluster_id = int(labeling.labels[core_particle])
    cell_size = cfg["plan.cell_size"] or None
    region = extract_region(labeling, seeds, cluster_id, domain, cell_size)
    vp = VehicleParams(
        u_max=cfg["plan.u_max"],
        omega_max=cfg["plan.omega_max"],
        goal_radius=cfg["plan.goal_radius"],
        waypoint_radius=cfg["plan.waypoint_radius"],
    )
    start = np.array(cfg["plan.start"], dtype=float)
    goal = np.array(cfg["plan.goal"], dtype=float)
    plan = plan_waypoints(region, start, goal, waypoint_radius=vp.waypoint_radius)
    planned = simulate_mission(
        flow.velocity,
        plan,
        start,
        vp,
        dt=cfg["plan.dt"],
        t_max=cfg["plan.t_max"],
        region=region,
    )
    naive = naive_controller(
        flow.velocity, start, goal, vp, dt=cfg["plan.dt"], t_max=cfg["plan.t_max"]
    )
    files = []
    for name, mission in (("planned", planned), ("naive", naive)):
        csv_path = outdir / f"mission_{name}.csv"
        json_path = outdir / f"mission_{name}.json"
        mission_to_csv(mission, csv_path)
        mission_summary(mission, json_path)
        files.extend([csv_path, json_path])
    drift_time = sum(
        cfg["plan.dt"] for _, _, _, u in planned.trajectory[1:] if u == 0.0
    )
    comparison = {
        "planned": mission_summary(planned),
        "naive": mission_summary(naive),
        "energy_ratio_naive_over_planned": (
            float(naive.energy / planned.energy) if planned.energy > 0 else None
        ),
        "planned_drift_fraction": (
            float(drift_time / planned.duration) if planned.duration > 0 else 0.0
        ),
        "cluster_id": cluster_id,
    }
    cmp_path = outdir / "plan_comparison.json"
    with open(cmp_path, "w") as fh:
        json.dump(comparison, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files.append(cmp_path)
    mask_path = outdir / "region.pgm"
    write_mask_pgm(region, mask_path)
    files.append(mask_path)
    overlay_path = outdir / "plan_overlay.pgm"
    _overlay_pgm(region, [planned, naive], overlay_path)
    files.append(overlay_path)
    _write_manifest(outdir, "plan", cfg, files)
    print(
        f"plan: planned reached={planned.reached} energy={planned.energy:.3f} | "
        f"naive reached={naive.reached} energy={naive.energy:.3f}"
    )
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="coherentflow",
        description="Coherent set detection and coherence-aware mission planning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("simulate", "advect a particle grid and write the ensemble"),
        ("detect", "per-step coherent set labels from an ensemble"),
        ("evaluate", "score detections against the reference partition"),
        ("plan", "plan and fly the coherence-aware mission"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="TOML config file")
        p.add_argument(
            "--environment",
            help="double_gyre | bickley | single_gyre | csv:<path>",
        )
        if name == "detect":
            p.add_argument(
                "--mode", choices=("online", "offline"), default="online"
            )
    sub.add_parser("version", help="print the package version")
    return parser


def _collect_overrides(extra):
    overrides = []
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(f"unrecognized argument {token!r}")
        if "=" in token:
            dotted, raw = token[2:].split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {token!r} is missing a value")
            dotted, raw = token[2:], extra[i + 1]
            i += 1
        overrides.append((dotted, raw))
        i += 1
    return overrides


def main(argv=None):
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        _apply_thread_cap()
        overrides = _collect_overrides(extra)
        cfg = load_config(
            path=args.config, environment=args.environment, overrides=overrides
        )
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "detect":
            return cmd_detect(cfg, args.mode)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "plan":
            return cmd_plan(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CoherentFlowError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
