import numpy as np
import pytest
from sklearn.base import clone

from coherentflow.advection import Ensemble
from coherentflow.detection import (
    CoherentSetDetector,
    OnlineCoherentSetDetector,
    detect_per_step,
)
from coherentflow.kernels import KernelSpec
from coherentflow.metrics import adjusted_rand
from coherentflow.operators import OperatorConfig


def two_stream_positions(n_per=20, n_snap=5, seed=1):
    rng = np.random.default_rng(seed)
    a0 = np.array([0.0, 0.0]) + 0.05 * rng.normal(size=(n_per, 2))
    b0 = np.array([0.0, 2.0]) + 0.05 * rng.normal(size=(n_per, 2))
    pos = np.empty((2 * n_per, n_snap, 2))
    for s in range(n_snap):
        pos[:n_per, s] = a0 + [0.3 * s, 0.0]
        pos[n_per:, s] = b0 + [-0.3 * s, 0.0]
    return pos, np.repeat([0, 1], n_per)


def make_ensemble(pos):
    return Ensemble(positions=pos, t0=0.0, dt_out=0.1)


KERNEL = KernelSpec(kind="gaussian", sigma=0.8)
CFG = OperatorConfig(epsilon=1e-3, n_eigen=2)


# ---------------------------------------------------------------------------
# functional driver
# ---------------------------------------------------------------------------

def test_per_step_output_shape():
    pos, _ = two_stream_positions()
    per_step, trace = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2)
    assert len(per_step) == pos.shape[1] - 1
    assert len(trace) == pos.shape[1] - 1
    times = [t for t, _ in per_step]
    assert times == pytest.approx([0.1, 0.2, 0.3, 0.4])
    for _, ev in trace:
        assert ev.shape == (2,)
        assert np.all(np.diff(ev) <= 1e-12)


def test_first_step_online_equals_offline():
    # after a single absorbed snapshot the running mean holds exactly one
    # term, so both modes must produce the same partition
    pos, _ = two_stream_positions()
    on, trace_on = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, mode="online")
    off, trace_off = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, mode="offline")
    assert np.array_equal(on[0][1].labels, off[0][1].labels)
    assert np.allclose(trace_on[0][1], trace_off[0][1], atol=1e-12)


def test_both_modes_recover_separable_streams():
    pos, truth = two_stream_positions()
    for mode in ("online", "offline"):
        per_step, _ = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, mode=mode)
        for _, lab in per_step:
            assert adjusted_rand(lab, truth) == 1.0


def test_per_step_is_deterministic():
    pos, _ = two_stream_positions()
    a, _ = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, seed=7)
    b, _ = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, seed=7)
    for (_, la), (_, lb) in zip(a, b):
        assert np.array_equal(la.labels, lb.labels)


def test_per_step_rejects_unknown_mode():
    pos, _ = two_stream_positions()
    with pytest.raises(ValueError):
        detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, mode="batch")


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def test_detector_fit_recovers_streams():
    pos, truth = two_stream_positions()
    det = CoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3)
    det.fit(pos)
    assert adjusted_rand(det.labels_, truth) == 1.0
    assert det.eigenvalues_.shape == (2,)
    assert det.eigenfunctions_.shape == (pos.shape[0], 2)
    assert det.inertia_ >= 0


def test_detector_get_set_params_and_clone():
    det = CoherentSetDetector(n_clusters=4, sigma=2.0, epsilon=1e-4)
    params = det.get_params()
    assert params["n_clusters"] == 4
    assert params["sigma"] == 2.0
    twin = clone(det)
    assert twin.get_params() == params
    det.set_params(n_clusters=2)
    assert det.n_clusters == 2


def test_detector_lag_validation():
    pos, _ = two_stream_positions(n_snap=4)
    with pytest.raises(ValueError):
        CoherentSetDetector(n_clusters=2, lag=0).fit(pos)
    with pytest.raises(ValueError):
        CoherentSetDetector(n_clusters=2, lag=4).fit(pos)
    with pytest.raises(ValueError):
        CoherentSetDetector(n_clusters=2).fit(pos[:, 0])


def test_detector_explicit_lag_matches_truncated_input():
    pos, _ = two_stream_positions()
    a = CoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3, lag=2).fit(pos)
    b = CoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3, lag=-1).fit(
        pos[:, : 3]
    )
    assert np.array_equal(a.labels_, b.labels_)


def test_online_estimator_streams_snapshots():
    pos, truth = two_stream_positions()
    det = OnlineCoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3)
    det.partial_fit(pos[:, 0])
    assert det.n_steps_ == 0
    for s in range(1, pos.shape[1]):
        det.partial_fit(pos[:, s])
    assert det.n_steps_ == pos.shape[1] - 1
    assert adjusted_rand(det.labels_, truth) == 1.0


def test_online_fit_replays_partial_fit():
    pos, _ = two_stream_positions()
    streamed = OnlineCoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3)
    for s in range(pos.shape[1]):
        streamed.partial_fit(pos[:, s])
    batch = OnlineCoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3).fit(pos)
    assert np.array_equal(streamed.labels_, batch.labels_)
    assert np.allclose(streamed.eigenvalues_, batch.eigenvalues_, atol=1e-12)
    assert streamed.n_steps_ == batch.n_steps_


def test_online_estimator_matches_functional_driver():
    pos, _ = two_stream_positions()
    det = OnlineCoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3).fit(pos)
    per_step, _ = detect_per_step(make_ensemble(pos), KERNEL, CFG, 2, mode="online")
    assert np.array_equal(det.labels_, per_step[-1][1].labels)


def test_online_estimator_input_checks():
    pos, _ = two_stream_positions()
    det = OnlineCoherentSetDetector(n_clusters=2)
    with pytest.raises(ValueError):
        det.partial_fit(pos)
    det.partial_fit(pos[:, 0])
    with pytest.raises(ValueError):
        det.partial_fit(pos[:5, 1])


def test_online_refit_resets_state():
    pos, _ = two_stream_positions()
    det = OnlineCoherentSetDetector(n_clusters=2, sigma=0.8, epsilon=1e-3)
    det.fit(pos)
    first = det.labels_.copy()
    det.fit(pos)
    assert np.array_equal(det.labels_, first)
    assert det.n_steps_ == pos.shape[1] - 1
