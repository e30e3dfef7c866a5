import hypothesis
import numpy as np
import pytest

from roal.data import make_blobs_split
from roal.model import Batch, ModelConfig, OptimizerConfig, init_model, train

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile("default")


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at vector x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1e-8, np.max(np.abs(a)), np.max(np.abs(b)))


def logistic_model(w1, b1=0.0):
    """Binary softmax model with class-0 weights at zero: p(1|x) = sigmoid(w1.x + b1)."""
    w1 = np.asarray(w1, dtype=np.float64)
    d = w1.size
    W = np.zeros((d, 2))
    W[:, 1] = w1
    params = np.concatenate([W.ravel(), [0.0, b1]])
    return init_model(ModelConfig(d, (), 2), 0).with_params(params)


def random_model(rng, input_dim=None, hidden=None, classes=None, dropout=0.0):
    input_dim = input_dim or int(rng.integers(2, 7))
    hidden = hidden if hidden is not None else tuple(int(h) for h in rng.integers(2, 9, size=rng.integers(0, 3)))
    classes = classes or int(rng.integers(2, 5))
    cfg = ModelConfig(input_dim, hidden, classes, dropout_rate=dropout, weight_init_scale=2.0)
    m = init_model(cfg, int(rng.integers(1 << 30)))
    # nonzero biases exercise the full layout
    return m.with_params(m.params + 0.1 * rng.standard_normal(m.param_count))


def random_batch(rng, model, n=None):
    n = n or int(rng.integers(1, 8))
    return Batch(rng.random((n, model.config.input_dim)),
                 rng.integers(0, model.config.num_classes, size=n))


@pytest.fixture(scope="session")
def blobs():
    return make_blobs_split(400, 200, 3, 6, 0.15, seed=11)


@pytest.fixture(scope="session")
def trained_blobs_model(blobs):
    train_set, _ = blobs
    m = init_model(ModelConfig(6, (16,), 3), 5)
    m, _ = train(m, train_set.as_batch(), opt=OptimizerConfig(epochs=60, batch_size=32, learning_rate=0.2), seed=1)
    return m
