"""Ensemble of one-step delta-predicting dynamics models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffnet
from .replay import EpisodeBuffer, sample_biased_for_model

STD_FLOOR = 1e-6


class UntrainedModelError(RuntimeError):
    pass


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    @classmethod
    def fit(cls, data):
        data = np.asarray(data, dtype=np.float64)
        return cls(data.mean(axis=0), np.maximum(data.std(axis=0), STD_FLOOR))

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, z):
        return z * self.std + self.mean


@dataclass
class ModelTrainReport:
    steps_run: int
    mean_loss_start: float
    mean_loss_end: float


class EnsembleModel:
    """``k`` MLPs mapping normalized ``(state, action)`` to normalized deltas."""

    def __init__(self, state_dim, action_dim, k=5, hidden=(128, 128), lr=1e-3, rng=None):
        rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        sizes = [self.state_dim + self.action_dim, *hidden, self.state_dim]
        seeds = rng.integers(0, 2**63 - 1, size=k)
        self.members = [diffnet.init_mlp(sizes, int(s), "relu", "identity") for s in seeds]
        self.adam_states = [diffnet.AdamState.for_net(m, lr) for m in self.members]
        self.input_normalizer = Normalizer.identity(sizes[0])
        self.delta_normalizer = Normalizer.identity(self.state_dim)
        # number of completed train_models calls; tags imaginary data
        self.generation = 0

    @property
    def k(self):
        return len(self.members)

    def _check_trained(self):
        if self.generation == 0:
            raise UntrainedModelError("dynamics ensemble has not been trained yet")

    def model_inputs(self, state, action):
        x = np.concatenate([np.atleast_2d(state), np.atleast_2d(action)], axis=1)
        return self.input_normalizer.normalize(x)

    def member_outputs(self, state, action):
        """Normalized delta predictions, shape ``(k, batch, state_dim)``."""
        x = self.model_inputs(state, action)
        return np.stack([diffnet.forward(m, x) for m in self.members])


def predict_next(ensemble: EnsembleModel, member_index, state, action):
    if not 0 <= member_index < ensemble.k:
        raise IndexError(f"member index {member_index} out of range for k={ensemble.k}")
    state = np.atleast_2d(np.asarray(state, dtype=np.float64))
    z = diffnet.forward(ensemble.members[member_index], ensemble.model_inputs(state, action))
    return state + ensemble.delta_normalizer.denormalize(z)


def predict_all(ensemble: EnsembleModel, state, action):
    """Next-state predictions of every member, shape ``(k, batch, state_dim)``."""
    return np.stack([predict_next(ensemble, m, state, action) for m in range(ensemble.k)])


def _flatten_buffer(buffer: EpisodeBuffer):
    obs = buffer.obs
    s = obs[:, :-1].reshape(-1, obs.shape[-1])
    a = buffer.actions.reshape(-1, buffer.actions.shape[-1])
    d = (obs[:, 1:] - obs[:, :-1]).reshape(-1, obs.shape[-1])
    return s, a, d


def _loss(net, x, y):
    err = diffnet.forward(net, x) - y
    return float(np.mean(np.sum(err * err, axis=1)))


def train_models(ensemble: EnsembleModel, real_buffer: EpisodeBuffer, steps, batch_size,
                 current_epoch, bias, rng, eval_size=1024, first_call_multiplier=5) -> ModelTrainReport:
    """Fit every member to one-step deltas drawn from ``real_buffer``.

    Normalizer statistics are refit to the whole buffer first. Members are
    warm-started from their current weights; the very first call runs
    ``first_call_multiplier * steps`` updates. Each member draws its own
    recency-biased batches.
    Loss is mean squared L2 error in normalized-delta space, measured before
    and after on a fixed uniform evaluation batch.
    """
    if len(real_buffer) == 0:
        raise ValueError("cannot train dynamics on an empty buffer")
    steps = int(steps)
    if steps == 0:
        return ModelTrainReport(0, float("nan"), float("nan"))
    if ensemble.generation == 0:
        steps *= first_call_multiplier

    s, a, d = _flatten_buffer(real_buffer)
    ensemble.input_normalizer = Normalizer.fit(np.concatenate([s, a], axis=1))
    ensemble.delta_normalizer = Normalizer.fit(d)

    held = rng.choice(len(s), size=min(eval_size, len(s)), replace=False)
    x_eval = ensemble.model_inputs(s[held], a[held])
    y_eval = ensemble.delta_normalizer.normalize(d[held])
    start = [_loss(m, x_eval, y_eval) for m in ensemble.members]

    for member, adam in zip(ensemble.members, ensemble.adam_states):
        for _ in range(steps):
            b = sample_biased_for_model(real_buffer, batch_size, current_epoch, bias, rng)
            x = ensemble.model_inputs(b.obs, b.actions)
            y = ensemble.delta_normalizer.normalize(b.next_obs - b.obs)
            cache = diffnet.forward_cache(member, x)
            grads, _ = diffnet.backward(member, x, 2.0 * (cache[-1] - y), cache=cache)
            diffnet.adam_update(member, grads, adam)

    end = [_loss(m, x_eval, y_eval) for m in ensemble.members]
    ensemble.generation += 1
    return ModelTrainReport(steps, float(np.mean(start)), float(np.mean(end)))
