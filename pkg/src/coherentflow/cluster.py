"""Restarted k-means, label alignment, and consensus labelings."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from ._validation import check_labels

__all__ = ["Labeling", "kmeans", "align_labels", "consensus"]


@dataclass
class Labeling:
    """A hard partition of n particles into k clusters.

    inertia is the sum of squared distances to assigned centers for
    partitions produced by k-means, and None for derived labelings
    (alignments inherit it, consensus votes have none).
    """

    labels: np.ndarray
    k: int
    inertia: float = None

    def __post_init__(self):
        self.labels = check_labels(self.labels)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.labels.max() >= self.k:
            raise ValueError("label value exceeds k - 1")

    @property
    def n(self):
        return self.labels.size


def kmeans(points, k, restarts=20, seed=0):
    """Best-of-restarts k-means partition of a point set.

    Parameters
    ----------
    points : ndarray, shape (n, m)
    k : int
        Cluster count, at most n.
    restarts : int
        Independent k-means++ initializations; the lowest-inertia run
        wins.
    seed : int
        Makes the whole procedure deterministic.

    Returns
    -------
    Labeling
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    km = KMeans(
        n_clusters=k,
        n_init=restarts,
        init="k-means++",
        max_iter=300,
        tol=1e-12,
        random_state=seed,
        algorithm="lloyd",
    ).fit(pts)
    return Labeling(km.labels_.astype(int), k, float(km.inertia_))


def _contingency(a, b, k):
    c = np.zeros((k, k), dtype=int)
    np.add.at(c, (a, b), 1)
    return c


def align_labels(ref, other):
    """Permute cluster names of ``other`` to best match ``ref``.

    The optimal assignment on the k x k contingency table maximizes the
    number of agreeing particles. Which particles share a label never
    changes, only the names.
    """
    if ref.n != other.n:
        raise ValueError("labelings must cover the same particles")
    if ref.k != other.k:
        raise ValueError("labelings must have the same k")
    c = _contingency(ref.labels, other.labels, ref.k)
    rows, cols = linear_sum_assignment(-c)
    perm = np.empty(ref.k, dtype=int)
    perm[cols] = rows
    return Labeling(perm[other.labels], other.k, other.inertia)


def consensus(labelings):
    """Majority-vote combination of several labelings.

    All inputs are aligned to the first, then each particle takes the
    most frequent label, ties resolved toward the lowest label index.
    """
    if not labelings:
        raise ValueError("consensus needs at least one labeling")
    first = labelings[0]
    aligned = [first.labels] + [align_labels(first, lb).labels for lb in labelings[1:]]
    votes = np.stack(aligned)
    out = np.empty(first.n, dtype=int)
    for i in range(first.n):
        out[i] = np.bincount(votes[:, i], minlength=first.k).argmax()
    return Labeling(out, first.k, None)
