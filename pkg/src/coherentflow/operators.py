"""Transfer-operator estimation from kernel Gram matrices.

Coherence of a particle set over a time window is read off the
dominant spectrum of the forward-backward composition of the estimated
transfer operator. With Gaussian or polynomial Gram matrices G_XX (the
initial snapshot against itself) and G_YY (a later snapshot), the
n x n surrogate

    (G_XX + n eps I)^-1 (G_YY + n eps I)^-1 G_YY G_XX

has the squared singular values of that composition as eigenvalues and
per-particle eigenfunction samples reachable through G_XX. The online
variant replaces the single-lag middle factor with a running mean of
normalized Gramians over all snapshots seen so far, so one detection
state absorbs a stream of snapshots at constant cost per step.

Regularized inverses are realized as Cholesky solves against the
ridge-shifted Gramians; nothing is ever inverted explicitly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigs

from ._validation import check_square, check_same_shape
from .exceptions import ComplexSpectrumError, OperatorError

__all__ = [
    "OperatorConfig",
    "OperatorState",
    "SpectralResult",
    "surrogate_matrix",
    "online_update",
    "assemble_online_operator",
    "dominant_eigens",
    "detect_coherent_sets",
    "export_eigenvalues_csv",
    "export_eigenfunctions_csv",
]


@dataclass(frozen=True)
class OperatorConfig:
    """Regularization and spectral extraction settings.

    epsilon scales the ridge n*epsilon added to every Gramian before
    solving; n_eigen is the number of dominant eigenpairs extracted;
    imag_tol bounds the imaginary contamination tolerated before the
    spectrum is declared complex and rejected.
    """

    epsilon: float = 1e-2
    n_eigen: int = 3
    imag_tol: float = 1e-9

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_eigen < 1:
            raise ValueError("n_eigen must be at least 1")
        if self.imag_tol <= 0:
            raise ValueError("imag_tol must be positive")


@dataclass
class OperatorState:
    """Running-mean detection state over absorbed snapshots.

    Holds the fixed initial Gramian g_xx, the mean of normalized later
    Gramians (G_YY + n eps I)^-1 G_YY over the t snapshots absorbed so
    far, and the ridge scale epsilon the state was built with.
    """

    g_xx: np.ndarray
    epsilon: float
    running_mean: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.g_xx = check_square(self.g_xx, "g_xx")
        if self.running_mean is None:
            self.running_mean = np.zeros_like(self.g_xx)
        else:
            self.running_mean = check_square(self.running_mean, "running_mean")
            check_same_shape(self.running_mean, self.g_xx, "running_mean", "g_xx")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def n(self):
        return self.g_xx.shape[0]


@dataclass
class SpectralResult:
    """Dominant eigenpairs of a detection operator.

    eigenvalues are sorted descending; eigenvectors holds the raw
    coefficient vectors (unit columns) that solve the surrogate
    eigenproblem; eigenfunctions holds the per-particle samples of the
    corresponding functions (unit columns), which is what clustering
    consumes; residuals holds ||M v - lambda v|| per pair.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eigenfunctions: np.ndarray
    residuals: np.ndarray


def _ridged(g, epsilon, name):
    a = np.array(g, dtype=float, copy=True)
    a[np.diag_indices_from(a)] += a.shape[0] * epsilon
    try:
        return sla.cho_factor(a, lower=True)
    except sla.LinAlgError as exc:
        raise OperatorError(
            f"regularized {name} is not positive definite: {exc}"
        ) from exc


def _normalized_gram(g_yy, epsilon):
    """(G_YY + n eps I)^-1 G_YY via one Cholesky factorization."""
    cf = _ridged(g_yy, epsilon, "G_YY")
    return sla.cho_solve(cf, g_yy)


def surrogate_matrix(g_xx, g_yy, cfg):
    """Single-lag detection operator for one snapshot pair.

    Parameters
    ----------
    g_xx, g_yy : ndarray, shape (n, n)
        Gramians of the initial and the lagged snapshot.
    cfg : OperatorConfig

    Returns
    -------
    ndarray, shape (n, n)
        (G_XX + n eps I)^-1 (G_YY + n eps I)^-1 G_YY G_XX.
    """
    g_xx = check_square(g_xx, "g_xx")
    g_yy = check_square(g_yy, "g_yy")
    check_same_shape(g_xx, g_yy, "g_xx", "g_yy")
    w = _normalized_gram(g_yy, cfg.epsilon)
    cf_xx = _ridged(g_xx, cfg.epsilon, "G_XX")
    return sla.cho_solve(cf_xx, w @ g_xx)


def online_update(state, g_yy_t, cfg):
    """Absorb one snapshot Gramian into the running mean.

    Returns a new OperatorState; the input state is not modified.
    """
    g_yy_t = check_square(g_yy_t, "g_yy_t")
    check_same_shape(g_yy_t, state.g_xx, "g_yy_t", "g_xx")
    if cfg.epsilon != state.epsilon:
        raise OperatorError(
            "state was built with a different epsilon; refusing to mix "
            f"{state.epsilon} and {cfg.epsilon}"
        )
    w = _normalized_gram(g_yy_t, cfg.epsilon)
    new_mean = (state.t * state.running_mean + w) / (state.t + 1)
    return OperatorState(
        g_xx=state.g_xx,
        epsilon=state.epsilon,
        running_mean=new_mean,
        t=state.t + 1,
    )


def assemble_online_operator(state):
    """Materialize the detection operator for the absorbed snapshots.

    Returns (G_XX + n eps I)^-1 running_mean G_XX. Requires at least
    one absorbed snapshot.
    """
    if state.t < 1:
        raise OperatorError("no snapshots absorbed; nothing to assemble")
    cf_xx = _ridged(state.g_xx, state.epsilon, "G_XX")
    return sla.cho_solve(cf_xx, state.running_mean @ state.g_xx)


def _arpack_eigens(op, n, k, ncv=None):
    v0 = np.full(n, 1.0 / np.sqrt(n))
    vals, vecs = eigs(
        op, k=k, which="LR", v0=v0,
        ncv=min(n, ncv if ncv else max(4 * k + 4, 24)),
    )
    return vals, vecs


def _dense_eigens(m):
    return sla.eig(m)


def dominant_eigens(m, k, cfg, g_xx=None, solver="auto"):
    """Top-k eigenpairs of a (generally nonsymmetric) real operator.

    Parameters
    ----------
    m : ndarray or scipy LinearOperator, shape (n, n)
        The operator; a LinearOperator avoids materializing the matrix.
    k : int
        Number of dominant pairs, sorted by real part descending.
    cfg : OperatorConfig
        Supplies imag_tol.
    g_xx : ndarray, optional
        Initial-snapshot Gramian. When given, eigenfunction samples are
        computed as G_XX v with unit-normalized columns; otherwise the
        coefficient vectors themselves serve as the samples.
    solver : {"auto", "dense", "arpack"}
        "auto" picks the dense solver for small or nearly full
        extractions and the iterative one otherwise.

    Returns
    -------
    SpectralResult

    Raises
    ------
    ComplexSpectrumError
        If a retained eigenvalue or eigenvector carries imaginary parts
        beyond ``imag_tol`` relative to the spectral scale.
    """
    is_array = isinstance(m, np.ndarray)
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise ValueError("operator must be square")
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, n]")
    if solver not in ("auto", "dense", "arpack"):
        raise ValueError(f"unknown solver {solver!r}")
    if solver == "dense" and not is_array:
        raise ValueError("dense solver requires a materialized matrix")
    if solver == "auto":
        use_dense = is_array and (n <= 512 or k > n - 2)
    else:
        use_dense = solver == "dense"
    if not use_dense and k > n - 2:
        raise ValueError("iterative solver needs k <= n - 2")

    try:
        if use_dense:
            vals, vecs = _dense_eigens(np.asarray(m, dtype=float))
        else:
            vals, vecs = _arpack_eigens(m, n, k)
    except (sla.LinAlgError, ArithmeticError) as exc:
        raise OperatorError(f"eigensolver failed: {exc}") from exc

    order = np.argsort(-vals.real)[:k]
    vals = vals[order]
    vecs = vecs[:, order]

    scale = float(np.max(np.abs(vals))) or 1.0
    if np.any(np.abs(vals.imag) > cfg.imag_tol * scale):
        worst = float(np.max(np.abs(vals.imag)))
        raise ComplexSpectrumError(
            f"retained eigenvalues have imaginary parts up to {worst:.3e} "
            f"(tolerance {cfg.imag_tol * scale:.3e}); adjust epsilon or the kernel"
        )

    eigenvalues = vals.real.copy()
    eigenvectors = np.empty((n, k))
    for j in range(k):
        w = vecs[:, j]
        pivot = w[np.argmax(np.abs(w))]
        w = w * np.conj(pivot) / abs(pivot)
        if np.linalg.norm(w.imag) > cfg.imag_tol * np.linalg.norm(w):
            raise ComplexSpectrumError(
                f"eigenvector {j} is complex beyond tolerance; "
                "adjust epsilon or the kernel"
            )
        wr = w.real
        eigenvectors[:, j] = wr / np.linalg.norm(wr)

    matvec = (lambda v: m @ v) if is_array else m.matvec
    residuals = np.array([
        np.linalg.norm(matvec(eigenvectors[:, j]) - eigenvalues[j] * eigenvectors[:, j])
        for j in range(k)
    ])

    if g_xx is not None:
        f = g_xx @ eigenvectors
        norms = np.linalg.norm(f, axis=0)
        norms[norms == 0] = 1.0
        eigenfunctions = f / norms
    else:
        eigenfunctions = eigenvectors.copy()

    return SpectralResult(eigenvalues, eigenvectors, eigenfunctions, residuals)


def detect_coherent_sets(spectral, k_clusters, seed, restarts=20):
    """Partition particles by clustering dominant eigenfunction samples.

    Runs restarted k-means on the first ``k_clusters`` eigenfunction
    columns of ``spectral`` and returns the resulting Labeling.
    """
    from .cluster import kmeans

    feats = spectral.eigenfunctions
    if feats.shape[1] < k_clusters:
        raise ValueError(
            f"need at least {k_clusters} eigenfunctions, have {feats.shape[1]}"
        )
    return kmeans(feats[:, :k_clusters], k_clusters, restarts=restarts, seed=seed)


def export_eigenvalues_csv(spectral, path):
    with open(path, "w") as fh:
        fh.write("index,eigenvalue,residual\n")
        for i, (v, r) in enumerate(zip(spectral.eigenvalues, spectral.residuals)):
            fh.write(f"{i},{v!r},{r!r}\n")


def export_eigenfunctions_csv(spectral, path):
    f = spectral.eigenfunctions
    cols = ",".join(f"f{j}" for j in range(f.shape[1]))
    with open(path, "w") as fh:
        fh.write(f"particle_id,{cols}\n")
        for i in range(f.shape[0]):
            fh.write(f"{i}," + ",".join(repr(float(v)) for v in f[i]) + "\n")
