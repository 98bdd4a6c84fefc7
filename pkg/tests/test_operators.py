import numpy as np
import pytest

from coherentflow.exceptions import ComplexSpectrumError, OperatorError
from coherentflow.operators import (
    OperatorConfig,
    OperatorState,
    SpectralResult,
    assemble_online_operator,
    detect_coherent_sets,
    dominant_eigens,
    online_update,
    surrogate_matrix,
)


def random_spd(n, rng, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a @ a.T) + n * 0.05 * np.eye(n)


# ---------------------------------------------------------------------------
# surrogate_matrix
# ---------------------------------------------------------------------------

def test_scalar_surrogate_value():
    # n=1, G=1, eps=0.1: ((1+0.1)^-1)^2 * 1 * 1 = 1/1.21
    cfg = OperatorConfig(epsilon=0.1, n_eigen=1)
    m = surrogate_matrix(np.array([[1.0]]), np.array([[1.0]]), cfg)
    assert abs(m[0, 0] - 0.8264462809917354) < 1e-12


def test_identity_dynamics_spectrum():
    # with X = Y the surrogate shares eigenvectors with the Gram matrix
    # and maps each Gram eigenvalue g to (g/(g+n*eps))^2
    rng = np.random.default_rng(4)
    n = 12
    g = random_spd(n, rng)
    cfg = OperatorConfig(epsilon=1e-2, n_eigen=3)
    m = surrogate_matrix(g, g, cfg)
    got = np.sort(np.linalg.eigvals(m).real)[::-1]
    gw = np.linalg.eigvalsh(g)
    expected = np.sort((gw / (gw + n * cfg.epsilon)) ** 2)[::-1]
    assert np.allclose(got, expected, atol=1e-10)


def test_surrogate_shape_checks():
    cfg = OperatorConfig()
    with pytest.raises(ValueError):
        surrogate_matrix(np.eye(3), np.eye(4), cfg)


# ---------------------------------------------------------------------------
# online averaging
# ---------------------------------------------------------------------------

def test_assembled_operator_equals_mean_of_single_lag():
    # the time-averaged operator must coincide with the arithmetic mean
    # of the per-snapshot operators sharing the same start Gramian
    rng = np.random.default_rng(7)
    n, T = 20, 5
    cfg = OperatorConfig(epsilon=5e-2, n_eigen=3)
    g_xx = random_spd(n, rng)
    g_yys = [random_spd(n, rng) for _ in range(T)]
    state = OperatorState(g_xx=g_xx, epsilon=cfg.epsilon)
    for g_yy in g_yys:
        state = online_update(state, g_yy, cfg)
    assert state.t == T
    assembled = assemble_online_operator(state)
    mean_direct = np.mean(
        [surrogate_matrix(g_xx, g_yy, cfg) for g_yy in g_yys], axis=0
    )
    assert np.max(np.abs(assembled - mean_direct)) < 1e-10


def test_online_update_is_order_invariant():
    rng = np.random.default_rng(8)
    n, T = 15, 6
    cfg = OperatorConfig(epsilon=1e-2, n_eigen=2)
    g_xx = random_spd(n, rng)
    g_yys = [random_spd(n, rng) for _ in range(T)]

    def run(seq):
        state = OperatorState(g_xx=g_xx, epsilon=cfg.epsilon)
        for g in seq:
            state = online_update(state, g, cfg)
        return state.running_mean

    fwd = run(g_yys)
    rev = run(g_yys[::-1])
    assert np.max(np.abs(fwd - rev)) < 1e-10


def test_single_update_matches_single_lag():
    rng = np.random.default_rng(9)
    n = 10
    cfg = OperatorConfig(epsilon=1e-2, n_eigen=2)
    g_xx = random_spd(n, rng)
    g_yy = random_spd(n, rng)
    state = online_update(OperatorState(g_xx=g_xx, epsilon=cfg.epsilon), g_yy, cfg)
    assembled = assemble_online_operator(state)
    direct = surrogate_matrix(g_xx, g_yy, cfg)
    assert np.max(np.abs(assembled - direct)) < 1e-12


def test_online_update_refuses_epsilon_mismatch():
    rng = np.random.default_rng(10)
    g = random_spd(5, rng)
    state = OperatorState(g_xx=g, epsilon=0.1)
    with pytest.raises(OperatorError):
        online_update(state, g, OperatorConfig(epsilon=0.2, n_eigen=1))


def test_assemble_requires_at_least_one_update():
    rng = np.random.default_rng(11)
    state = OperatorState(g_xx=random_spd(4, rng), epsilon=0.1)
    with pytest.raises(OperatorError):
        assemble_online_operator(state)


# ---------------------------------------------------------------------------
# dominant_eigens
# ---------------------------------------------------------------------------

def _matrix_with_spectrum(eigenvalues, rng):
    n = len(eigenvalues)
    b = rng.normal(size=(n, n)) + np.eye(n) * 2.0
    return b @ np.diag(eigenvalues) @ np.linalg.inv(b)


def test_dominant_eigens_orders_by_real_part():
    rng = np.random.default_rng(12)
    vals = np.array([0.95, 0.7, 0.5, 0.2, 0.05])
    m = _matrix_with_spectrum(vals, rng)
    cfg = OperatorConfig(n_eigen=3, imag_tol=1e-8)
    res = dominant_eigens(m, 3, cfg)
    assert np.allclose(res.eigenvalues, vals[:3], atol=1e-9)
    assert res.eigenvectors.shape == (5, 3)
    assert res.residuals.max() < 1e-8


def test_dense_and_arpack_paths_agree():
    rng = np.random.default_rng(13)
    n = 60
    vals = np.linspace(0.99, 0.01, n)
    m = _matrix_with_spectrum(vals, rng)
    cfg = OperatorConfig(n_eigen=4, imag_tol=1e-7)
    dense = dominant_eigens(m, 4, cfg, solver="dense")
    arpack = dominant_eigens(m, 4, cfg, solver="arpack")
    assert np.allclose(dense.eigenvalues, arpack.eigenvalues, atol=1e-8)
    for j in range(4):
        a = dense.eigenvectors[:, j]
        b = arpack.eigenvectors[:, j]
        assert min(np.linalg.norm(a - b), np.linalg.norm(a + b)) < 1e-6


def test_complex_spectrum_is_an_error():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    cfg = OperatorConfig(n_eigen=1, imag_tol=1e-9)
    with pytest.raises(ComplexSpectrumError):
        dominant_eigens(rot, 1, cfg)


def test_sign_convention_largest_entry_positive():
    rng = np.random.default_rng(14)
    m = _matrix_with_spectrum(np.array([0.9, 0.4, 0.1]), rng)
    cfg = OperatorConfig(n_eigen=2)
    res = dominant_eigens(m, 2, cfg)
    for j in range(2):
        v = res.eigenvectors[:, j]
        assert v[np.argmax(np.abs(v))] > 0
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_eigenfunctions_are_gram_weighted():
    rng = np.random.default_rng(15)
    m = _matrix_with_spectrum(np.array([0.8, 0.3, 0.05]), rng)
    g = random_spd(3, rng)
    cfg = OperatorConfig(n_eigen=2)
    res = dominant_eigens(m, 2, cfg, g_xx=g)
    for j in range(2):
        f = g @ res.eigenvectors[:, j]
        f = f / np.linalg.norm(f)
        if f[np.argmax(np.abs(f))] < 0:
            f = -f
        assert np.allclose(res.eigenfunctions[:, j], f, atol=1e-12)


def test_spectral_result_consumed_by_clustering():
    # two separated blocks in the eigenfunction samples give a clean
    # two-way split
    eigenfunctions = np.vstack(
        [np.tile([1.0, 0.0], (6, 1)), np.tile([0.0, 1.0], (6, 1))]
    )
    spectral = SpectralResult(
        eigenvalues=np.array([0.9, 0.8]),
        eigenvectors=eigenfunctions.copy(),
        eigenfunctions=eigenfunctions,
        residuals=np.zeros(2),
    )
    lab = detect_coherent_sets(spectral, 2, seed=0)
    assert len(set(lab.labels[:6])) == 1
    assert len(set(lab.labels[6:])) == 1
    assert lab.labels[0] != lab.labels[-1]


def test_operator_config_validation():
    with pytest.raises(ValueError):
        OperatorConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        OperatorConfig(n_eigen=0)
    with pytest.raises(ValueError):
        OperatorConfig(imag_tol=-1.0)


def test_operator_state_counts_updates():
    rng = np.random.default_rng(16)
    g = random_spd(6, rng)
    cfg = OperatorConfig(epsilon=1e-2)
    state = OperatorState(g_xx=g, epsilon=cfg.epsilon)
    assert state.t == 0
    assert state.n == 6
    s1 = online_update(state, g, cfg)
    s2 = online_update(s1, g, cfg)
    assert (state.t, s1.t, s2.t) == (0, 1, 2)
    # the original state is untouched by later updates
    assert np.array_equal(state.running_mean, np.zeros((6, 6)))
