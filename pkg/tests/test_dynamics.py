import time

import numpy as np
import pytest

from iher import diffnet
from iher.dynamics import (EnsembleModel, Normalizer, STD_FLOOR, UntrainedModelError, predict_all, predict_next,
                           train_models)
from iher.replay import Episode, EpisodeBuffer

T = 50


def linear_buffer(n_eps=100, seed=0):
    """Episodes of s' = s + 0.1 a in two dimensions."""
    rng = np.random.default_rng(seed)
    buf = EpisodeBuffer(10_000, T, 2, 2, 2)
    for _ in range(n_eps):
        a = rng.uniform(-1, 1, size=(T, 2))
        s = np.zeros((T + 1, 2))
        s[0] = rng.uniform(-1, 1, size=2)
        for t in range(T):
            s[t + 1] = s[t] + 0.1 * a[t]
        buf.store_episode(Episode(s, s.copy(), np.zeros(2), a, np.zeros(T), True, 1))
    return buf


def trained(seed=1, steps=20, hidden=(16, 16), k=5, buf=None):
    ens = EnsembleModel(2, 2, k, hidden, rng=seed)
    train_models(ens, buf or linear_buffer(10), steps, 64, 1, 2.0, np.random.default_rng(seed),
                 first_call_multiplier=1)
    return ens


def test_learns_linear_system_within_budget():
    buf = linear_buffer()
    ens = EnsembleModel(2, 2, 5, (128, 128), rng=1)
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    rep = train_models(ens, buf, 500, 256, 1, 2.0, rng, first_call_multiplier=1)
    elapsed = time.perf_counter() - start
    assert rep.steps_run == 500
    s = rng.uniform(-1, 1, size=(1000, 2))
    a = rng.uniform(-1, 1, size=(1000, 2))
    err = np.abs(predict_all(ens, s, a) - (s + 0.1 * a)).mean(axis=1)
    assert err.max() < 1e-3
    assert elapsed < 60


def test_first_call_runs_warmup_multiple():
    ens = EnsembleModel(2, 2, 2, (8,), rng=0)
    buf = linear_buffer(5)
    rng = np.random.default_rng(0)
    assert train_models(ens, buf, 3, 16, 1, 2.0, rng).steps_run == 15
    assert train_models(ens, buf, 3, 16, 1, 2.0, rng).steps_run == 3
    assert ens.generation == 2


def test_zero_steps_is_a_no_op():
    ens = EnsembleModel(2, 2, 2, (8,), rng=0)
    before = [p.copy() for m in ens.members for p in m.params()]
    rep = train_models(ens, linear_buffer(2), 0, 16, 1, 2.0, np.random.default_rng(0))
    assert rep.steps_run == 0 and np.isnan(rep.mean_loss_end)
    assert all(np.array_equal(a, b) for a, b in zip(before, [p for m in ens.members for p in m.params()]))
    assert ens.generation == 0


def test_empty_buffer_rejected():
    with pytest.raises(ValueError):
        train_models(EnsembleModel(2, 2, 2, (8,), rng=0), EpisodeBuffer(100, T, 2, 2, 2), 5, 16, 1, 2.0,
                     np.random.default_rng(0))


def test_untrained_ensemble_refuses_variance():
    from iher.curiosity import ensemble_variance
    with pytest.raises(UntrainedModelError):
        ensemble_variance(EnsembleModel(2, 2, 2, (8,), rng=0), np.zeros((1, 2)), np.zeros((1, 2)))


def test_training_lowers_loss():
    rep = train_models(EnsembleModel(2, 2, 3, (32,), rng=0), linear_buffer(20), 200, 64, 1, 2.0,
                       np.random.default_rng(0), first_call_multiplier=1)
    assert rep.mean_loss_end < 0.5 * rep.mean_loss_start


def test_training_does_not_touch_buffer():
    buf = linear_buffer(5)
    obs, actions = buf.obs.copy(), buf.actions.copy()
    trained(buf=buf)
    assert np.array_equal(buf.obs, obs) and np.array_equal(buf.actions, actions)


def test_prediction_is_pure():
    ens = trained()
    s, a = np.full((3, 2), 0.2), np.full((3, 2), -0.4)
    first = predict_next(ens, 2, s, a)
    assert np.array_equal(first, predict_next(ens, 2, s, a))
    assert np.array_equal(s, np.full((3, 2), 0.2))


def test_member_index_out_of_range():
    ens = trained()
    with pytest.raises(IndexError):
        predict_next(ens, 5, np.zeros(2), np.zeros(2))


def test_zeroed_member_predicts_mean_delta():
    ens = trained()
    m = ens.members[0]
    for p in m.params():
        p[...] = 0.0
    s = np.array([[0.3, -0.1]])
    expected = s + ens.delta_normalizer.mean
    np.testing.assert_allclose(predict_next(ens, 0, s, np.zeros((1, 2))), expected, atol=1e-15)


def test_members_differ():
    ens = trained()
    x = np.random.default_rng(3).uniform(-1, 1, size=(10, 2))
    preds = predict_all(ens, x, x)
    assert np.all(preds.var(axis=0).sum(axis=-1) > 0)


def test_training_is_reproducible():
    a, b = trained(seed=4), trained(seed=4)
    for ma, mb in zip(a.members, b.members):
        assert all(np.array_equal(x, y) for x, y in zip(ma.params(), mb.params()))


def test_normalizer_round_trip_and_floor():
    data = np.random.default_rng(0).normal(3.0, 2.0, size=(500, 3))
    data[:, 2] = 7.0
    n = Normalizer.fit(data)
    assert n.std[2] == STD_FLOOR
    np.testing.assert_allclose(n.denormalize(n.normalize(data)), data, rtol=1e-12)
    z = n.normalize(data)
    np.testing.assert_allclose(z[:, :2].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(z[:, :2].std(axis=0), 1, atol=1e-12)


def test_members_are_double_precision():
    ens = trained()
    assert all(p.dtype == np.float64 for m in ens.members for p in m.params())
    assert predict_next(ens, 0, np.zeros(2), np.zeros(2)).dtype == np.float64


def test_member_gradients_check_out():
    ens = trained(hidden=(8,))
    x = ens.model_inputs(np.array([[0.1, 0.2], [-0.3, 0.5]]), np.array([[0.4, -0.2], [0.9, 0.1]]))
    assert diffnet.gradient_check(ens.members[1], x).max_rel_error < 1e-4
