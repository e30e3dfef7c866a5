import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roal import model as M
from roal.errors import ConfigError, ContractError, ShapeError
from roal.ewc import EwcState, estimate_fisher
from roal.model import Batch, ModelConfig, OptimizerConfig

from conftest import central_diff, logistic_model, random_batch, random_model, rel_err


def test_param_count_logistic():
    assert M.init_model(ModelConfig(2, (), 2), 0).param_count == 6


def test_param_count_one_hidden():
    assert M.init_model(ModelConfig(4, (8,), 3), 0).param_count == 4 * 8 + 8 + 8 * 3 + 3


def test_init_deterministic_and_scaled():
    cfg = ModelConfig(5, (7,), 3, weight_init_scale=0.5)
    a, b = M.init_model(cfg, 3), M.init_model(cfg, 3)
    assert np.array_equal(a.params, b.params)
    (W1, b1), (W2, b2) = a.layers()
    assert np.all(np.abs(W1) <= 0.5 / math.sqrt(5))
    assert np.all(np.abs(W2) <= 0.5 / math.sqrt(7))
    assert not b1.any() and not b2.any()


@pytest.mark.parametrize("kwargs", [
    dict(input_dim=0), dict(input_dim=2, hidden_dims=(0,)), dict(input_dim=2, num_classes=1),
    dict(input_dim=2, dropout_rate=1.0), dict(input_dim=2, weight_init_scale=0.0),
])
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        ModelConfig(**kwargs)


def test_zero_weights_uniform_output():
    m = M.init_model(ModelConfig(3, (4,), 4), 0)
    m = m.with_params(np.zeros(m.param_count))
    p = M.forward(m, np.random.default_rng(0).random((5, 3)))
    assert np.allclose(p, 0.25, atol=0)


def test_zero_logit_is_half():
    assert np.allclose(M.forward(logistic_model([1.0, 0.0]), [[0.0, 0.0]]), 0.5)


def test_binary_logit_two():
    p = M.forward(logistic_model([2.0, 0.0]), [[1.0, 0.0]])
    assert p[0, 1] == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-12)
    assert p[0, 1] == pytest.approx(0.8807970779778823, abs=1e-12)


def test_shape_mismatch():
    with pytest.raises(ShapeError):
        M.forward(M.init_model(ModelConfig(3), 0), np.zeros((2, 4)))


def test_loss_values():
    m = M.init_model(ModelConfig(3, (), 4), 0)
    m = m.with_params(np.zeros(m.param_count))
    b = Batch(np.random.default_rng(1).random((6, 3)), [0, 1, 2, 3, 0, 1])
    assert M.loss(m, b) == pytest.approx(math.log(4))
    half = logistic_model([1.0, -1.0])
    assert M.loss(half, Batch([[0.3, 0.3], [0.5, 0.5]], [1, 0])) == pytest.approx(math.log(2))
    confident = logistic_model([100.0, 0.0])
    assert M.loss(confident, Batch([[1.0, 0.0]], [1])) == pytest.approx(0.0, abs=1e-12)


def test_loss_empty_batch():
    with pytest.raises(ContractError):
        M.loss(M.init_model(ModelConfig(2), 0), Batch(np.zeros((0, 2)), []))


def test_logistic_closed_form_param_grad():
    x = np.array([0.2, 0.7, 0.4])
    g = M.param_grad(logistic_model(np.zeros(3)), Batch([x], [1]))
    W_grad = g[:6].reshape(3, 2)
    assert np.allclose(W_grad[:, 1], -0.5 * x)
    assert np.allclose(W_grad[:, 0], 0.5 * x)
    assert np.allclose(g[6:], [0.5, -0.5])


def test_logistic_closed_form_input_grad():
    m = logistic_model([1.0, -1.0])
    g = M.input_grad(m, [0.4, 0.4], 1)
    assert np.allclose(g, [-0.5, 0.5])


def test_zero_weight_input_grad():
    m = M.init_model(ModelConfig(4, (5,), 3), 0)
    m = m.with_params(np.zeros(m.param_count))
    assert not M.input_grad(m, np.full(4, 0.3), 2).any()


def test_param_grad_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = random_model(rng)
        b = random_batch(rng, m)
        fd = central_diff(lambda th: M.loss(m.with_params(th), b), m.params)
        assert rel_err(M.param_grad(m, b), fd) < 1e-4


def test_input_grad_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = random_model(rng)
        x = rng.random(m.config.input_dim)
        y = int(rng.integers(m.config.num_classes))
        fd = central_diff(lambda v: M.loss(m, Batch([v], [y])), x)
        assert rel_err(M.input_grad(m, x, y), fd) < 1e-4


def test_mean_squared_example_grad_matches_loop():
    rng = np.random.default_rng(2)
    m = random_model(rng, hidden=(5, 4))
    b = random_batch(rng, m, n=7)
    per = [M.param_grad(m, Batch(b.inputs[i:i + 1], b.labels[i:i + 1])) ** 2 for i in range(7)]
    assert np.allclose(M.mean_squared_example_grad(m, b), np.mean(per, axis=0), atol=1e-14)


def test_gradient_vanishes_at_convergence():
    # overlapping labels keep the optimum finite, so plain SGD reaches it
    b = Batch([[0.2, 0.8], [0.2, 0.8], [0.8, 0.2], [0.8, 0.2], [0.8, 0.2]], [0, 1, 0, 1, 1])
    m = M.init_model(ModelConfig(2, (), 2), 0)
    m, _ = M.train(m, b, opt=OptimizerConfig(epochs=4000, batch_size=5, learning_rate=2.0), seed=0)
    assert np.linalg.norm(M.param_grad(m, b)) < 1e-6


@given(arrays(np.float64, (3, 4), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_shift_invariance(z, c):
    assert np.allclose(M.softmax(z), M.softmax(z + c), atol=1e-12, rtol=0)


@given(st.integers(0, 2**31 - 1))
def test_probabilities_on_simplex(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    m = m.with_params(m.params * rng.uniform(0.1, 30))
    p = M.forward(m, rng.random((5, m.config.input_dim)))
    assert np.all(p >= 0)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_train_zero_lr_identity():
    rng = np.random.default_rng(3)
    m = random_model(rng, hidden=(4,), dropout=0.3)
    b = random_batch(rng, m, n=10)
    out, _ = M.train(m, b, opt=OptimizerConfig(epochs=1, learning_rate=0.0), seed=1)
    assert np.array_equal(out.params, m.params)


def test_train_rejects_zero_epochs():
    with pytest.raises(ConfigError):
        OptimizerConfig(epochs=0)


def test_train_deterministic():
    rng = np.random.default_rng(4)
    m = random_model(rng, hidden=(6,), dropout=0.2)
    b = random_batch(rng, m, n=30)
    adv = random_batch(rng, m, n=12)
    opt = OptimizerConfig(epochs=3, batch_size=7)
    a, la = M.train(m, b, adv, opt=opt, seed=9)
    c, lc = M.train(m, b, adv, opt=opt, seed=9)
    assert np.array_equal(a.params, c.params) and la == lc


def test_train_separable_blobs(blobs):
    train_set, _ = blobs
    m = M.init_model(ModelConfig(6, (), 3), 0)
    m, final = M.train(m, train_set.as_batch(), opt=OptimizerConfig(epochs=50, learning_rate=0.5), seed=0)
    acc = np.mean(M.predict(m, train_set.inputs) == train_set.labels)
    assert acc >= 0.95
    assert np.isfinite(final)


def test_train_huge_ewc_pins_params():
    rng = np.random.default_rng(5)
    m = random_model(rng, hidden=(4,))
    b = random_batch(rng, m, n=20)
    ewc = EwcState(m.params, estimate_fisher(m, b), 1e9)
    out, _ = M.train(m, b, ewc=ewc, opt=OptimizerConfig(epochs=5, learning_rate=0.1), seed=0)
    assert np.max(np.abs(out.params - m.params)) < 1e-3
    free, _ = M.train(m, b, opt=OptimizerConfig(epochs=5, learning_rate=0.1), seed=0)
    assert np.max(np.abs(free.params - m.params)) > 1e-2


def test_train_zero_lambda_matches_plain_sgd():
    rng = np.random.default_rng(10)
    m = random_model(rng, hidden=(4,))
    b = random_batch(rng, m, n=20)
    ewc = EwcState(m.params + 1.0, np.ones(m.param_count), 0.0)
    opt = OptimizerConfig(epochs=3, learning_rate=0.1)
    a, la = M.train(m, b, ewc=ewc, opt=opt, seed=0)
    c, lc = M.train(m, b, opt=opt, seed=0)
    assert np.array_equal(a.params, c.params) and la == lc


def test_train_divergence_raises():
    rng = np.random.default_rng(6)
    m = random_model(rng, hidden=(4,))
    b = random_batch(rng, m, n=20)
    with pytest.raises(M.TrainingError) as info:
        M.train(m, b, opt=OptimizerConfig(epochs=50, learning_rate=1e300), seed=0)
    assert info.value.iteration >= 0


def test_mc_forward_no_dropout_matches_forward():
    rng = np.random.default_rng(7)
    m = random_model(rng, hidden=(5,))
    X = rng.random((4, m.config.input_dim))
    samples = M.mc_forward(m, X, 3, seed=0)
    assert len(samples) == 3
    for s in samples:
        assert np.array_equal(s, M.forward(m, X))
    assert len(M.mc_forward(m, X, 1, seed=0)) == 1


def test_mc_forward_mean_approaches_forward():
    cfg = ModelConfig(4, (32,), 3, dropout_rate=0.3, weight_init_scale=0.5)
    m = M.init_model(cfg, 0)
    X = np.random.default_rng(8).random((6, 4))
    mean = np.mean(M.mc_forward(m, X, 1000, seed=1), axis=0)
    assert np.max(np.abs(mean - M.forward(m, X))) < 0.05
    again = M.mc_forward(m, X, 2, seed=1)
    assert np.array_equal(again[0], M.mc_forward(m, X, 2, seed=1)[0])
