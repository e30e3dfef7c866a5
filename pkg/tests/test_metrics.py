import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roal import metrics as E
from roal.attacks import AttackSpec, default_spec
from roal.data import Dataset
from roal.errors import ContractError
from roal.loop import IterationRecord
from roal.model import forward
from roal.metrics import ConfusionCounts, aggregate, improvement_pct, mean_improvement

from conftest import random_model
from test_acquisition import const_model


def test_counts_accuracy():
    assert ConfusionCounts(8, 7, 3, 2).accuracy == 0.75
    assert E.accuracy_from_counts(ConfusionCounts(5, 5, 0, 0)) == 1.0


def test_binary_confusion_cells():
    c = E.confusion_counts([1, 1, 0, 0, 1], [1, 0, 0, 1, 1], 2)
    assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 1, 1)
    assert c.total == 5


@given(st.integers(0, 2**31 - 1))
def test_accuracy_matches_confusion_oracle(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng)
    n = int(rng.integers(1, 40))
    test = Dataset(rng.random((n, m.config.input_dim)), rng.integers(0, m.config.num_classes, n),
                   m.config.num_classes)
    pred = np.argmax(forward(m, test.inputs), axis=1)
    cm = np.zeros((m.config.num_classes,) * 2, dtype=int)
    np.add.at(cm, (test.labels, pred), 1)
    acc = E.accuracy(m, test)
    assert acc == np.trace(cm) / cm.sum()
    assert acc == E.confusion_counts(test.labels, pred, m.config.num_classes).accuracy
    assert 0 <= acc <= 1


def test_random_predictor_accuracy():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 10, 10_000)
    guess = rng.integers(0, 10, 10_000)
    assert abs(E.confusion_counts(y, guess, 10).accuracy - 0.10) <= 0.01


def test_constant_model_on_balanced_classes():
    m = const_model(np.full(10, 0.1) + np.eye(10)[3] * 0.01, input_dim=2)
    test = Dataset(np.zeros((100, 2)), np.arange(100) % 10, 10)
    assert E.accuracy(m, test) == 0.10
    assert E.robust_accuracy(m, test) == E.accuracy(m, test)


def test_empty_test_set():
    m = const_model([0.5, 0.5])
    with pytest.raises(ContractError):
        E.accuracy(m, Dataset(np.zeros((0, 2)), [], 2))


def test_adversarial_test_construction(blobs, trained_blobs_model):
    _, test = blobs
    adv = E.build_adversarial_test(trained_blobs_model, test, default_spec("pgd", 0.1), 3)
    assert len(adv) == len(test) and np.array_equal(adv.labels, test.labels)
    again = E.build_adversarial_test(trained_blobs_model, test, default_spec("pgd", 0.1), 3)
    assert np.array_equal(adv.inputs, again.inputs)


@pytest.mark.parametrize("family", ["pgd", "pgd_l2", "jitter", "vni_fgsm", "fab"])
def test_null_perturbation_keeps_accuracy(blobs, trained_blobs_model, family):
    _, test = blobs
    adv = E.build_adversarial_test(trained_blobs_model, test, AttackSpec(family, 1e-12), 0)
    assert abs(E.robust_accuracy(trained_blobs_model, adv) - E.accuracy(trained_blobs_model, test)) <= 1e-6


def test_pgd_robust_below_clean(blobs, trained_blobs_model):
    _, test = blobs
    clean = E.accuracy(trained_blobs_model, test)
    for seed in range(10):
        adv = E.build_adversarial_test(trained_blobs_model, test, default_spec("pgd", 0.3), seed)
        assert E.robust_accuracy(trained_blobs_model, adv) <= clean


def _rec(v):
    return IterationRecord(1, "PGD", v, v, 1, 0.0, 0)


def test_aggregate_values():
    s = aggregate([[_rec(0.4)], [_rec(0.6)]])
    assert s.mean["clean_accuracy"][0] == pytest.approx(0.5)
    assert s.std["clean_accuracy"][0] == pytest.approx(0.1)
    assert s.repetitions == 2
    one = aggregate([[_rec(0.3), _rec(0.7)]])
    assert not one.std["robust_accuracy"].any()


def test_aggregate_ragged():
    with pytest.raises(ContractError):
        aggregate([[_rec(0.4)], [_rec(0.6), _rec(0.7)]])
    with pytest.raises(ContractError):
        aggregate([])


@given(st.lists(st.lists(st.floats(0, 1), min_size=3, max_size=3), min_size=1, max_size=8), st.randoms())
def test_aggregate_matches_two_pass(rows, rnd):
    runs = [[{"clean_accuracy": v} for v in r] for r in rows]
    s = aggregate(runs, ("clean_accuracy",))
    for i in range(3):
        col = [r[i] for r in rows]
        mu = sum(col) / len(col)
        sd = (sum((v - mu) ** 2 for v in col) / len(col)) ** 0.5
        assert abs(s.mean["clean_accuracy"][i] - mu) <= 1e-12
        assert abs(s.std["clean_accuracy"][i] - sd) <= 1e-12
    shuffled = list(runs)
    rnd.shuffle(shuffled)
    t = aggregate(shuffled, ("clean_accuracy",))
    assert np.allclose(t.mean["clean_accuracy"], s.mean["clean_accuracy"], atol=1e-15, rtol=0)
    assert np.allclose(t.std["clean_accuracy"], s.std["clean_accuracy"], atol=1e-12, rtol=0)


def test_improvement_values():
    assert improvement_pct(0.45, 0.37) == 21.62
    assert mean_improvement([0, 14.29, 21.62, 5.41, 14.29, 9.68]) == 10.88
    assert mean_improvement([12.05, 3.70, 18.42, 8.33, 9.09, 13.33]) == 10.82
    with pytest.raises(ContractError):
        improvement_pct(0.5, 0.0)


@given(st.floats(1e-6, 1e6))
def test_improvement_of_equal_is_zero(x):
    assert improvement_pct(x, x) == 0
