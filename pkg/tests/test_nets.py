"""Net kernel tests: forward against hand computation, backward against
central finite differences, SGD mechanics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eatcl.nets import (GradBundle, MLPModel, SGDConfig, add_grads, backward,
                        ce_loss_and_grads, forward, init_model, sgd_step,
                        softmax, softmax_ce)


def _rand_model(rng, sizes):
    m = init_model(sizes, seed=int(rng.integers(1 << 30)))
    # shift biases off zero so gradient checks exercise them
    return MLPModel(m.layer_sizes, [w.copy() for w in m.weights],
                    [b + rng.normal(0, 0.3, size=b.shape) for b in m.biases])


def test_forward_matches_hand_computation():
    # 2-2-2 net with simple numbers, worked out with relu by hand
    w0 = np.array([[1.0, -1.0], [0.5, 2.0]])
    b0 = np.array([0.0, -1.0])
    w1 = np.array([[1.0, 0.0], [-1.0, 1.0]])
    b1 = np.array([0.5, 0.0])
    model = MLPModel((2, 2, 2), [w0, w1], [b0, b1])
    x = np.array([[1.0, 2.0]])
    # pre = [1*1+2*0.5, 1*-1+2*2-1] = [2, 2]; relu -> [2, 2]
    # out = [2*1-2*1+0.5, 2*0+2*1] = [0.5, 2]
    np.testing.assert_allclose(forward(model, x), [[0.5, 2.0]])
    # negative pre-activation must clamp to zero
    x2 = np.array([[-1.0, 0.0]])
    # pre = [-1, 0]; relu -> [0, 0]; out = [0.5, 0]
    np.testing.assert_allclose(forward(model, x2), [[0.5, 0.0]])


def test_forward_rejects_nonfinite():
    model = init_model((2, 3, 2), seed=0)
    with pytest.raises(FloatingPointError):
        forward(model, np.array([[np.nan, 0.0]]))


def test_softmax_rows_sum_to_one_and_shift_invariant():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(32, 5)) * 50
    p = softmax(logits)
    np.testing.assert_allclose(p.sum(axis=1), np.ones(32), atol=1e-12)
    np.testing.assert_allclose(softmax(logits + 123.0), p, atol=1e-12)


def test_softmax_ce_against_direct_formula():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(16, 4))
    labels = rng.integers(0, 4, size=16)
    loss, dlogits = softmax_ce(logits, labels)
    ref = np.mean([np.log(np.sum(np.exp(logits[i] - logits[i].max())))
                   - (logits[i, labels[i]] - logits[i].max())
                   for i in range(16)])
    assert loss == pytest.approx(ref, rel=1e-12)
    # gradient rows sum to zero (softmax minus one-hot)
    np.testing.assert_allclose(dlogits.sum(axis=1), np.zeros(16), atol=1e-12)


def test_softmax_ce_rejects_bad_labels():
    logits = np.zeros((2, 3))
    with pytest.raises(ValueError):
        softmax_ce(logits, np.array([0, 3]))
    with pytest.raises(ValueError):
        softmax_ce(logits, np.array([-1, 0]))


def _fd_loss(model, x, y):
    loss, _ = softmax_ce(forward(model, x), y)
    return loss


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(7)
    h = 1e-5
    for sizes in [(2, 3, 2), (4, 5, 3), (3, 4, 4, 2)]:
        model = _rand_model(rng, sizes)
        x = rng.normal(size=(6, sizes[0]))
        y = rng.integers(0, sizes[-1], size=6)
        _, dlogits = softmax_ce(forward(model, x), y)
        g = backward(model, x, dlogits)
        for li in range(len(model.weights)):
            w = model.weights[li]
            for idx in [(0, 0), (w.shape[0] - 1, w.shape[1] - 1)]:
                wp = [a.copy() for a in model.weights]
                wm = [a.copy() for a in model.weights]
                wp[li][idx] += h
                wm[li][idx] -= h
                fp = _fd_loss(MLPModel(model.layer_sizes, wp, model.biases), x, y)
                fm = _fd_loss(MLPModel(model.layer_sizes, wm, model.biases), x, y)
                num = (fp - fm) / (2 * h)
                assert g.weight_grads[li][idx] == pytest.approx(
                    num, rel=1e-4, abs=1e-7)
            bp = [a.copy() for a in model.biases]
            bm = [a.copy() for a in model.biases]
            bp[li][0] += h
            bm[li][0] -= h
            fp = _fd_loss(MLPModel(model.layer_sizes, model.weights, bp), x, y)
            fm = _fd_loss(MLPModel(model.layer_sizes, model.weights, bm), x, y)
            assert g.bias_grads[li][0] == pytest.approx(
                (fp - fm) / (2 * h), rel=1e-4, abs=1e-7)


def test_input_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    model = _rand_model(rng, (3, 4, 2))
    x = rng.normal(size=(4, 3))
    y = rng.integers(0, 2, size=4)
    _, dlogits = softmax_ce(forward(model, x), y)
    g = backward(model, x, dlogits)
    h = 1e-5
    for i in range(4):
        for j in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i, j] += h
            xm[i, j] -= h
            num = (_fd_loss(model, xp, y) - _fd_loss(model, xm, y)) / (2 * h)
            assert g.input_grads[i, j] == pytest.approx(num, rel=1e-4, abs=1e-7)


def test_init_model_deterministic_and_seed_sensitive():
    a = init_model((3, 5, 2), seed=11)
    b = init_model((3, 5, 2), seed=11)
    c = init_model((3, 5, 2), seed=12)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)
    assert any(not np.array_equal(wa, wc)
               for wa, wc in zip(a.weights, c.weights))
    for bias in a.biases:
        assert np.all(bias == 0.0)


def test_init_model_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_model((3,), seed=0)
    with pytest.raises(ValueError):
        init_model((3, 0, 2), seed=0)


def test_sgd_step_is_pure_and_exact():
    model = init_model((2, 3, 2), seed=3)
    x = np.array([[0.3, -0.2], [1.0, 0.4]])
    y = np.array([0, 1])
    _, g = ce_loss_and_grads(model, x, y)
    before = [w.copy() for w in model.weights]
    lr = 0.05
    stepped = sgd_step(model, g, SGDConfig(learning_rate=lr))
    for w, w0 in zip(model.weights, before):
        np.testing.assert_array_equal(w, w0)  # input untouched
    for wn, w0, gw in zip(stepped.weights, before, g.weight_grads):
        np.testing.assert_allclose(wn, w0 - lr * gw, atol=0)


def test_sgd_step_rejects_mismatched_grads():
    model = init_model((2, 3, 2), seed=3)
    other = init_model((2, 4, 2), seed=3)
    x = np.array([[0.1, 0.2]])
    y = np.array([0])
    _, g = ce_loss_and_grads(other, x, y)
    with pytest.raises(ValueError):
        sgd_step(model, g, SGDConfig())


def test_add_grads_sums_terms():
    model = init_model((2, 3, 2), seed=4)
    x = np.array([[0.5, -0.5]])
    y = np.array([1])
    _, g1 = ce_loss_and_grads(model, x, y)
    _, g2 = ce_loss_and_grads(model, x * 2, y)
    s = add_grads(g1, g2)
    for a, b, c in zip(s.weight_grads, g1.weight_grads, g2.weight_grads):
        np.testing.assert_allclose(a, b + c, atol=0)


def test_sgd_config_validation():
    with pytest.raises(ValueError):
        SGDConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        SGDConfig(learning_rate=-1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 5), st.integers(1, 4))
def test_forward_rows_are_independent(seed, batch, dim):
    rng = np.random.default_rng(seed)
    model = init_model((dim, 3, 2), seed=seed)
    x = rng.normal(size=(batch, dim))
    full = forward(model, x)
    for i in range(batch):
        row = forward(model, x[i:i + 1])[0]
        np.testing.assert_allclose(full[i], row, atol=1e-12)
