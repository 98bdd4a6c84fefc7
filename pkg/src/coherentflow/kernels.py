"""Kernel evaluation and Gram matrix assembly.

Gram matrices are returned as plain (n, n) float arrays, symmetric by
construction. The Gaussian kernel is the squared-exponential
``exp(-||x - y||^2 / (2 sigma^2))``; the polynomial kernel is the
inhomogeneous form ``(x . y + offset)^degree``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._validation import check_positions

__all__ = ["KernelSpec", "eval_kernel", "gram", "median_heuristic"]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its shape parameters.

    Parameters
    ----------
    kind : {"gaussian", "polynomial"}
    sigma : float
        Gaussian bandwidth, positive.
    degree : int
        Polynomial degree, at least 1.
    offset : float
        Polynomial additive constant, non-negative.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "polynomial"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ValueError("gaussian kernel needs sigma > 0")
        if self.kind == "polynomial":
            if self.degree < 1:
                raise ValueError("polynomial degree must be at least 1")
            if self.offset < 0:
                raise ValueError("polynomial offset must be non-negative")


def eval_kernel(spec, x, y):
    """Evaluate the kernel on one pair of points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same dimension")
    if spec.kind == "gaussian":
        diff = x - y
        return float(np.exp(-np.dot(diff, diff) / (2.0 * spec.sigma**2)))
    return float((np.dot(x, y) + spec.offset) ** spec.degree)


def gram(spec, points):
    """Pairwise kernel matrix over a point set.

    Parameters
    ----------
    spec : KernelSpec
    points : ndarray, shape (n, d)

    Returns
    -------
    ndarray, shape (n, n)
        Symmetric kernel matrix; unit diagonal for the Gaussian kind.
    """
    pts = check_positions(points)
    if spec.kind == "gaussian":
        d2 = squareform(pdist(pts, "sqeuclidean"))
        return np.exp(-d2 / (2.0 * spec.sigma**2))
    k = (pts @ pts.T + spec.offset) ** spec.degree
    return 0.5 * (k + k.T)


def median_heuristic(points, max_pairs=1_000_000, seed=0):
    """Median pairwise distance, a default bandwidth when none is given.

    Uses every pair when n^2 fits under ``max_pairs``, otherwise a
    fixed-seed sample of that many pairs.
    """
    pts = check_positions(points)
    n = pts.shape[0]
    if n < 2:
        raise ValueError("median_heuristic needs at least two points")
    if n * n <= max_pairs:
        dists = pdist(pts)
    else:
        rng = np.random.default_rng(seed)
        ii = rng.integers(0, n, size=max_pairs)
        jj = rng.integers(0, n - 1, size=max_pairs)
        jj[jj >= ii] += 1
        dists = np.linalg.norm(pts[ii] - pts[jj], axis=1)
    med = float(np.median(dists))
    if med == 0.0:
        raise ValueError("all points coincide; no usable bandwidth")
    return med
