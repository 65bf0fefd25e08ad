import numpy as np
import pytest

from bilstm_crf.errors import ConfigError, StaleCacheError
from bilstm_crf.network import (BiLstmParams, LstmCellParams, forward_bilstm, lstm_step,
                                network_backward, project)

from gradcheck import FLOOR, TOLERANCE
from oracles import (central_difference, relative_error, scalar_bilstm, scalar_lstm_step,
                     scalar_project)


def random_params(rng, D, H, K, scale=0.5):
    cell = lambda: LstmCellParams(rng.normal(scale=scale, size=(4 * H, D)),
                                  rng.normal(scale=scale, size=(4 * H, H)),
                                  rng.normal(scale=scale, size=4 * H))
    return BiLstmParams(cell(), cell(), rng.normal(size=(K, 2 * H)), rng.normal(size=K))


def test_lstm_step_all_zero():
    cell = LstmCellParams.zeros(4, 3)
    h, c = lstm_step(cell, np.zeros(4), np.zeros(3), np.zeros(3))
    assert np.all(h == 0) and np.all(c == 0)


def test_lstm_step_forget_saturation_keeps_memory():
    H = 3
    cell = LstmCellParams.zeros(2, H)
    cell.b[H:2 * H] = 20.0
    c_prev = np.array([0.7, -0.3, 0.1])
    _, c = lstm_step(cell, np.zeros(2), np.zeros(H), c_prev)
    np.testing.assert_allclose(c, c_prev, atol=1e-6)


def test_lstm_step_matches_scalar_reference():
    rng = np.random.default_rng(0)
    cell = LstmCellParams(rng.normal(size=(12, 4)), rng.normal(size=(12, 3)), rng.normal(size=12))
    x, h0, c0 = rng.normal(size=4), rng.normal(size=3), rng.normal(size=3)
    h, c = lstm_step(cell, x, h0, c0)
    h_ref, c_ref = scalar_lstm_step(cell.W.tolist(), cell.U.tolist(), cell.b.tolist(),
                                    x.tolist(), h0.tolist(), c0.tolist())
    np.testing.assert_allclose(h, h_ref, atol=1e-13)
    np.testing.assert_allclose(c, c_ref, atol=1e-13)
    assert np.all(np.abs(h) < 1)


def test_gate_views_follow_ifog_order():
    cell = LstmCellParams.zeros(2, 3)
    W_f, U_f, b_f = cell.gate("f")
    b_f[:] = 1.0
    assert list(cell.b) == [0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0]


def test_init_forget_bias_and_ranges():
    rng = np.random.default_rng(0)
    p = BiLstmParams.init(30, 5, 7, rng, "uniform")
    assert np.all(p.forward.b[5:10] == 1.0) and np.all(p.forward.b[:5] == 0)
    assert np.abs(p.forward.W).max() <= 1 and np.abs(p.forward.W).max() > 0.9
    q = BiLstmParams.init(30, 5, 7, rng, "scaled")
    assert np.abs(q.forward.W).max() <= 1 / np.sqrt(30)
    with pytest.raises(ConfigError):
        BiLstmParams.init(30, 5, 7, rng, "gaussian")


def test_shape_validation():
    with pytest.raises(ConfigError):
        LstmCellParams(np.zeros((8, 3)), np.zeros((8, 3)), np.zeros(8))


def test_forward_matches_scalar_reference():
    rng = np.random.default_rng(1)
    p = random_params(rng, 4, 3, 7)
    X = rng.normal(size=(5, 4))
    hidden, _ = forward_bilstm(p, X)
    ref = scalar_bilstm((p.forward.W.tolist(), p.forward.U.tolist(), p.forward.b.tolist()),
                        (p.backward.W.tolist(), p.backward.U.tolist(), p.backward.b.tolist()), X.tolist())
    np.testing.assert_allclose(hidden, ref, atol=1e-13)


def test_forward_single_position():
    rng = np.random.default_rng(2)
    p = random_params(rng, 4, 3, 7)
    x = rng.normal(size=(1, 4))
    hidden, _ = forward_bilstm(p, x)
    h_f, _ = lstm_step(p.forward, x[0], np.zeros(3), np.zeros(3))
    h_b, _ = lstm_step(p.backward, x[0], np.zeros(3), np.zeros(3))
    np.testing.assert_array_equal(hidden[0], np.concatenate([h_f, h_b]))


def test_bidirectional_symmetry_with_tied_cells():
    rng = np.random.default_rng(3)
    p = random_params(rng, 4, 3, 7)
    p = BiLstmParams(p.forward, p.forward, p.proj_W, p.proj_b)
    X = rng.normal(size=(5, 4))
    h, _ = forward_bilstm(p, X)
    h_rev, _ = forward_bilstm(p, X[::-1])
    np.testing.assert_allclose(h_rev[:, :3], h[::-1, 3:], atol=1e-14)


def test_forward_zero_params():
    p = BiLstmParams.zeros(4, 3, 7)
    h, _ = forward_bilstm(p, np.random.default_rng(0).normal(size=(6, 4)))
    assert np.all(h == 0)


def test_project_cases():
    rng = np.random.default_rng(4)
    p = random_params(rng, 4, 3, 7)
    hidden = rng.normal(size=(4, 6))
    infer = project(p, hidden)
    np.testing.assert_array_equal(project(p, hidden, np.ones((4, 6)), 1.0), infer)
    zeros = project(p, np.zeros((4, 6)))
    np.testing.assert_array_equal(zeros, np.tile(p.proj_b, (4, 1)))
    mask = rng.random((4, 6)) < 0.8
    got = project(p, hidden, mask, 0.8)
    ref = scalar_project(hidden.tolist(), p.proj_W.tolist(), p.proj_b.tolist(), mask.tolist(), 0.8)
    np.testing.assert_allclose(got, ref, atol=1e-13)
    np.testing.assert_allclose(infer, scalar_project(hidden.tolist(), p.proj_W.tolist(),
                                                     p.proj_b.tolist()), atol=1e-13)


@pytest.mark.parametrize("keep", [0.0, -0.1, 1.5])
def test_project_rejects_bad_keep_prob(keep):
    p = BiLstmParams.zeros(2, 1, 3)
    with pytest.raises(ConfigError):
        project(p, np.zeros((1, 2)), np.ones((1, 2)), keep)


def _backward(p, X, dE, mask=None, keep=1.0):
    hidden, cache = forward_bilstm(p, X)
    project(p, hidden, mask, keep, cache=cache)
    return network_backward(cache, dE)


def test_backward_zero_upstream_gives_zero_gradients():
    rng = np.random.default_rng(5)
    p = random_params(rng, 4, 3, 7)
    grads = _backward(p, rng.normal(size=(5, 4)), np.zeros((5, 7)))
    assert all(np.all(g == 0) for g in grads.values())


@pytest.mark.parametrize("use_mask", [False, True])
def test_backward_finite_differences(use_mask):
    rng = np.random.default_rng(6)
    T, D, H, K = 5, 9, 4, 7
    p = random_params(rng, D, H, K)
    X = rng.normal(size=(T, D))
    R = rng.normal(size=(T, K))        # loss = sum(R * emissions)
    mask = (rng.random((T, 2 * H)) < 0.7) if use_mask else None
    keep = 0.7 if use_mask else 1.0

    def loss():
        h, _ = forward_bilstm(p, X)
        return float(np.sum(R * project(p, h, mask, keep)))

    grads = _backward(p, X, R, mask, keep)
    arrays = dict(p.arrays(), inputs=X)
    for name, arr in arrays.items():
        for ix in np.ndindex(arr.shape):
            fd = central_difference(loss, arr, ix)
            assert relative_error(fd, grads[name][ix], FLOOR) < TOLERANCE, (name, ix)


def test_backward_detects_stale_cache():
    rng = np.random.default_rng(7)
    p = random_params(rng, 4, 3, 7)
    hidden, cache = forward_bilstm(p, rng.normal(size=(2, 4)))
    project(p, hidden, cache=cache)
    p.touch()
    with pytest.raises(StaleCacheError):
        network_backward(cache, np.zeros((2, 7)))


def test_backward_detects_shape_mismatch_and_missing_projection():
    rng = np.random.default_rng(8)
    p = random_params(rng, 4, 3, 7)
    hidden, cache = forward_bilstm(p, rng.normal(size=(2, 4)))
    with pytest.raises(StaleCacheError):
        network_backward(cache, np.zeros((2, 7)))
    project(p, hidden, cache=cache)
    with pytest.raises(StaleCacheError):
        network_backward(cache, np.zeros((3, 7)))


def test_forward_is_deterministic():
    rng = np.random.default_rng(9)
    p = random_params(rng, 4, 3, 7)
    X = rng.normal(size=(6, 4))
    a = project(p, forward_bilstm(p, X)[0])
    b = project(p, forward_bilstm(p, X)[0])
    assert a.tobytes() == b.tobytes()
