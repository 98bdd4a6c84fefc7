"""End-to-end detection pipelines and scikit-learn style estimators.

The functional driver ``detect_per_step`` walks an ensemble snapshot
by snapshot and emits one Labeling per snapshot, either recomputing the
single-lag operator each time (offline mode) or absorbing snapshots
into the running-mean state and labeling after every update (online
mode). The initial Gramian is factored once and reused across all
steps; for large ensembles the operator is never materialized, its
action is composed from triangular solves inside the iterative
eigensolver.

``CoherentSetDetector`` and ``OnlineCoherentSetDetector`` wrap the same
machinery in the fit / partial_fit idiom for interactive use.
"""

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator
from sklearn.base import BaseEstimator, ClusterMixin

from .exceptions import OperatorError
from .kernels import KernelSpec, gram
from .operators import (
    OperatorConfig,
    OperatorState,
    detect_coherent_sets,
    dominant_eigens,
    online_update,
    _normalized_gram,
    _ridged,
)

__all__ = [
    "detect_per_step",
    "CoherentSetDetector",
    "OnlineCoherentSetDetector",
]

# Below this size the per-step operator is materialized and handed to
# the dense eigensolver; above it, matrix-free iteration wins.
_DENSE_LIMIT = 512


class _SharedFactor:
    """Initial-snapshot Gramian with its ridge factorization."""

    def __init__(self, g_xx, cfg):
        self.g_xx = g_xx
        self.cfg = cfg
        self.cf = _ridged(g_xx, cfg.epsilon, "G_XX")
        self.n = g_xx.shape[0]

    def spectral(self, middle, k):
        """Eigenpairs of (G_XX + n eps I)^-1 middle G_XX."""
        if self.n <= _DENSE_LIMIT or k > self.n - 3:
            m = sla.cho_solve(self.cf, middle @ self.g_xx)
            return dominant_eigens(m, k, self.cfg, g_xx=self.g_xx)
        op = LinearOperator(
            (self.n, self.n),
            matvec=lambda v: sla.cho_solve(self.cf, middle @ (self.g_xx @ v)),
            dtype=float,
        )
        return dominant_eigens(op, k, self.cfg, g_xx=self.g_xx, solver="arpack")


def detect_per_step(ensemble, kernel, cfg, k_clusters, mode="online",
                    seed=0, restarts=20):
    """Label every snapshot of an ensemble, one partition per step.

    Parameters
    ----------
    ensemble : Ensemble
    kernel : KernelSpec
    cfg : OperatorConfig
    k_clusters : int
        Cluster count; also the number of eigenpairs extracted.
    mode : {"online", "offline"}
        online absorbs each snapshot into the running-mean operator and
        labels after the update; offline labels each snapshot from its
        own single-lag operator independently.
    seed, restarts : int
        k-means determinism and restart count, shared by every step.

    Returns
    -------
    per_step : list of (t, Labeling)
        One entry per snapshot index >= 1.
    eigen_trace : list of (t, ndarray)
        Dominant eigenvalues at each step.
    """
    if mode not in ("online", "offline"):
        raise ValueError(f"unknown mode {mode!r}")
    g_xx = gram(kernel, ensemble.snapshot(0))
    shared = _SharedFactor(g_xx, cfg)
    times = ensemble.times()
    state = OperatorState(g_xx=g_xx, epsilon=cfg.epsilon)
    per_step = []
    eigen_trace = []
    for step in range(1, ensemble.n_snapshots):
        g_yy = gram(kernel, ensemble.snapshot(step))
        if mode == "online":
            state = online_update(state, g_yy, cfg)
            middle = state.running_mean
        else:
            middle = _normalized_gram(g_yy, cfg.epsilon)
        try:
            spectral = shared.spectral(middle, k_clusters)
        except OperatorError as exc:
            raise OperatorError(f"step {step}: {exc}") from exc
        lab = detect_coherent_sets(spectral, k_clusters, seed=seed,
                                   restarts=restarts)
        per_step.append((float(times[step]), lab))
        eigen_trace.append((float(times[step]), spectral.eigenvalues.copy()))
    return per_step, eigen_trace


def _build_kernel(kernel, sigma, degree, offset):
    return KernelSpec(kind=kernel, sigma=sigma, degree=degree, offset=offset)


class CoherentSetDetector(ClusterMixin, BaseEstimator):
    """Single-lag coherent set detection over a trajectory array.

    Fits on trajectories shaped (n_particles, n_snapshots, dim): a
    Gramian is built from the first snapshot and from the snapshot at
    ``lag``, the detection operator between them is decomposed, and the
    dominant eigenfunction samples are clustered.

    Parameters
    ----------
    n_clusters : int
        Number of coherent sets (and eigenpairs).
    kernel : {"gaussian", "polynomial"}
    sigma, degree, offset : float
        Kernel shape parameters, see KernelSpec.
    epsilon : float
        Ridge regularization scale.
    lag : int
        Snapshot index compared against the first; -1 is the last.
    restarts, seed : int
        k-means settings.

    Attributes
    ----------
    labels_ : ndarray of shape (n_particles,)
    eigenvalues_ : ndarray of shape (n_clusters,)
    eigenfunctions_ : ndarray of shape (n_particles, n_clusters)
    """

    def __init__(self, n_clusters=3, kernel="gaussian", sigma=1.0, degree=2,
                 offset=1.0, epsilon=1e-2, lag=-1, restarts=20, seed=0):
        self.n_clusters = n_clusters
        self.kernel = kernel
        self.sigma = sigma
        self.degree = degree
        self.offset = offset
        self.epsilon = epsilon
        self.lag = lag
        self.restarts = restarts
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3:
            raise ValueError("X must be (n_particles, n_snapshots, dim)")
        n_snap = X.shape[1]
        lag = self.lag if self.lag >= 0 else self.lag + n_snap
        if not 0 < lag < n_snap:
            raise ValueError(f"lag {self.lag} outside the snapshot range")
        spec = _build_kernel(self.kernel, self.sigma, self.degree, self.offset)
        cfg = OperatorConfig(epsilon=self.epsilon, n_eigen=self.n_clusters)
        g_xx = gram(spec, X[:, 0])
        g_yy = gram(spec, X[:, lag])
        shared = _SharedFactor(g_xx, cfg)
        middle = _normalized_gram(g_yy, cfg.epsilon)
        spectral = shared.spectral(middle, self.n_clusters)
        lab = detect_coherent_sets(spectral, self.n_clusters, seed=self.seed,
                                   restarts=self.restarts)
        self.labels_ = lab.labels
        self.eigenvalues_ = spectral.eigenvalues
        self.eigenfunctions_ = spectral.eigenfunctions
        self.inertia_ = lab.inertia
        return self


class OnlineCoherentSetDetector(ClusterMixin, BaseEstimator):
    """Streaming coherent set detection with running-mean updates.

    The first ``partial_fit`` call fixes the reference snapshot; each
    later call absorbs one snapshot into the running mean. ``fit``
    replays a whole trajectory array through the same path. Labels are
    recomputed from the current state after every absorption.

    Parameters are as in CoherentSetDetector, minus the lag (the state
    always spans everything absorbed so far).

    Attributes
    ----------
    labels_ : ndarray of shape (n_particles,)
        Labels after the most recent update.
    eigenvalues_ : ndarray
    n_steps_ : int
        Snapshots absorbed so far.
    """

    def __init__(self, n_clusters=3, kernel="gaussian", sigma=1.0, degree=2,
                 offset=1.0, epsilon=1e-2, restarts=20, seed=0):
        self.n_clusters = n_clusters
        self.kernel = kernel
        self.sigma = sigma
        self.degree = degree
        self.offset = offset
        self.epsilon = epsilon
        self.restarts = restarts
        self.seed = seed

    def _spec(self):
        return _build_kernel(self.kernel, self.sigma, self.degree, self.offset)

    def _cfg(self):
        return OperatorConfig(epsilon=self.epsilon, n_eigen=self.n_clusters)

    def partial_fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("partial_fit consumes one (n, d) snapshot")
        spec = self._spec()
        cfg = self._cfg()
        if not hasattr(self, "_shared"):
            g_xx = gram(spec, X)
            self._shared = _SharedFactor(g_xx, cfg)
            self._state = OperatorState(g_xx=g_xx, epsilon=cfg.epsilon)
            self._n = X.shape[0]
            self.n_steps_ = 0
            return self
        if X.shape[0] != self._n:
            raise ValueError("snapshot particle count changed mid-stream")
        g_yy = gram(spec, X)
        self._state = online_update(self._state, g_yy, cfg)
        self.n_steps_ = self._state.t
        spectral = self._shared.spectral(self._state.running_mean,
                                         self.n_clusters)
        lab = detect_coherent_sets(spectral, self.n_clusters, seed=self.seed,
                                   restarts=self.restarts)
        self.labels_ = lab.labels
        self.eigenvalues_ = spectral.eigenvalues
        return self

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3:
            raise ValueError("X must be (n_particles, n_snapshots, dim)")
        for attr in ("_shared", "_state"):
            if hasattr(self, attr):
                delattr(self, attr)
        for s in range(X.shape[1]):
            self.partial_fit(X[:, s])
        return self
