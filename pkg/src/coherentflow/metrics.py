"""External cluster-validation scores and the benchmark scoring protocol.

Detected partitions are scored against a reference partition with the
adjusted Rand index and the homogeneity / completeness / V-measure
family, per snapshot, then averaged arithmetically over snapshots. The
reference partition itself comes from the single-lag operator at the
known coherence horizon, stabilized by consensus over several k-means
runs.
"""

import json
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import (
    adjusted_rand_score,
    homogeneity_completeness_v_measure,
)

from ._validation import check_labels
from .cluster import Labeling, consensus
from .kernels import gram
from .operators import detect_coherent_sets, dominant_eigens, surrogate_matrix

__all__ = [
    "ScoreReport",
    "adjusted_rand",
    "homogeneity_completeness_v",
    "ground_truth",
    "evaluate_run",
    "report_to_json",
    "format_score_table",
]


def _labels(x, name):
    if isinstance(x, Labeling):
        return x.labels
    return check_labels(x, name)


def adjusted_rand(a, b):
    """Adjusted Rand index between two partitions.

    1 for identical partitions (up to label names), about 0 for
    independent random ones, negative for systematic disagreement.
    """
    la = _labels(a, "a")
    lb = _labels(b, "b")
    if la.size != lb.size:
        raise ValueError("labelings must cover the same particles")
    return float(adjusted_rand_score(la, lb))


def homogeneity_completeness_v(a_true, b_pred):
    """Homogeneity, completeness, and their harmonic mean.

    Natural-log entropies; h is 1 when the reference partition has zero
    entropy, and v is 0 when h + c is 0.
    """
    lt = _labels(a_true, "a_true")
    lp = _labels(b_pred, "b_pred")
    if lt.size != lp.size:
        raise ValueError("labelings must cover the same particles")
    h, c, v = homogeneity_completeness_v_measure(lt, lp)
    return float(h), float(c), float(v)


@dataclass
class ScoreReport:
    """Per-snapshot scores against a reference partition plus averages.

    per_step holds (t, ari, homogeneity, completeness, v_measure)
    tuples; averaged holds the arithmetic means keyed "ri", "h", "c",
    "v".
    """

    per_step: list
    averaged: dict

    @classmethod
    def from_steps(cls, per_step):
        arr = np.array([[s[1], s[2], s[3], s[4]] for s in per_step])
        means = arr.mean(axis=0)
        return cls(
            per_step=list(per_step),
            averaged={
                "ri": float(means[0]),
                "h": float(means[1]),
                "c": float(means[2]),
                "v": float(means[3]),
            },
        )


def evaluate_run(per_step_labels, truth):
    """Score a sequence of per-snapshot labelings against a reference.

    Parameters
    ----------
    per_step_labels : list of (t, Labeling)
    truth : Labeling

    Returns
    -------
    ScoreReport
    """
    if not per_step_labels:
        raise ValueError("no per-step labelings to score")
    steps = []
    for t, lab in per_step_labels:
        ari = adjusted_rand(truth, lab)
        h, c, v = homogeneity_completeness_v(truth, lab)
        steps.append((float(t), ari, h, c, v))
    return ScoreReport.from_steps(steps)


def ground_truth(ensemble, kernel, cfg, k, tau_index, runs=10, seed=0):
    """Reference partition from the single-lag operator at the horizon.

    Builds the detection operator between snapshot 0 and snapshot
    ``tau_index``, extracts ``k`` eigenpairs, clusters ``runs`` times
    with distinct seeds, and returns the aligned majority vote.

    Parameters
    ----------
    ensemble : Ensemble
    kernel : KernelSpec
    cfg : OperatorConfig
    k : int
        Cluster count and eigenpair count.
    tau_index : int
        Snapshot index of the coherence horizon (negative indices count
        from the end).
    runs : int
        Number of consensus k-means runs.
    seed : int
        Base seed; run i uses seed + i.

    Returns
    -------
    Labeling
    """
    n_snap = ensemble.n_snapshots
    if tau_index < 0:
        tau_index += n_snap
    if not 0 < tau_index < n_snap:
        raise ValueError(f"tau_index {tau_index} outside 1..{n_snap - 1}")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    g_xx = gram(kernel, ensemble.snapshot(0))
    g_yy = gram(kernel, ensemble.snapshot(tau_index))
    m = surrogate_matrix(g_xx, g_yy, cfg)
    spectral = dominant_eigens(m, k, cfg, g_xx=g_xx)
    labelings = [
        detect_coherent_sets(spectral, k, seed=seed + i) for i in range(runs)
    ]
    return consensus(labelings)


def report_to_json(report, method=None, environment=None, path=None):
    """Serialize a ScoreReport; optionally write it to a file."""
    doc = {
        "method": method,
        "environment": environment,
        "per_step": [
            {"t": t, "ri": ri, "h": h, "c": c, "v": v}
            for t, ri, h, c, v in report.per_step
        ],
        "averaged": dict(report.averaged),
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return doc


def format_score_table(reports):
    """Plain-text comparison table, one row per method.

    Parameters
    ----------
    reports : dict mapping method name -> ScoreReport
    """
    lines = [f"{'method':<10s} {'RI':>8s} {'H':>8s} {'V':>8s}"]
    for name, rep in reports.items():
        a = rep.averaged
        lines.append(
            f"{name:<10s} {a['ri']:>8.3f} {a['h']:>8.3f} {a['v']:>8.3f}"
        )
    return "\n".join(lines)
