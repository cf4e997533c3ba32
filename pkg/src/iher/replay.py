"""Episode replay buffers, hindsight relabeling and batch mixing."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .envs import GoalObservation

REAL, IMAG = 0, 1


@dataclass
class Episode:
    """One fixed-length episode.

    ``obs`` and ``ag`` carry ``T + 1`` rows (the last is the state after the
    final action); ``actions``, ``rewards`` and ``members`` carry ``T``.
    ``members`` records which ensemble member produced each imaginary step
    (-1 for real steps). ``policy_id`` tags the generating policy and
    ``model_epoch`` the ensemble generation used (0 for real data).
    """

    obs: np.ndarray
    ag: np.ndarray
    g: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    is_real: bool
    epoch: int = 1
    policy_id: int = -1
    model_epoch: int = 0
    members: np.ndarray | None = None

    def __post_init__(self):
        if self.members is None:
            self.members = np.full(len(self.actions), -1, dtype=np.int64)

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class Transition:
    obs: GoalObservation
    action: np.ndarray
    next_obs: GoalObservation
    extrinsic_reward: float
    is_real: bool
    epoch_collected: int


@dataclass
class Batch:
    """A flat batch of transitions plus where each one came from."""

    obs: np.ndarray
    ag: np.ndarray
    g: np.ndarray
    actions: np.ndarray
    next_obs: np.ndarray
    next_ag: np.ndarray
    rewards: np.ndarray
    is_real: np.ndarray
    source: np.ndarray
    episode: np.ndarray
    t: np.ndarray
    relabeled: np.ndarray

    def __len__(self):
        return len(self.rewards)

    @staticmethod
    def concat(batches):
        return Batch(**{f.name: np.concatenate([getattr(b, f.name) for b in batches])
                        for f in fields(Batch)})


class EpisodeBuffer:
    """Ring of whole episodes with oldest-first eviction.

    ``capacity`` is in transitions. ``n_total`` counts every transition ever
    stored with ``count=True`` and is never decreased by eviction or
    :meth:`clear`.
    """

    _GROW = 64

    def __init__(self, capacity, episode_length, obs_dim, goal_dim, action_dim, is_real=True):
        self.T = int(episode_length)
        self.max_episodes = int(capacity) // self.T
        if self.max_episodes < 1:
            raise ValueError("capacity smaller than one episode")
        self.capacity = int(capacity)
        self.dims = (int(obs_dim), int(goal_dim), int(action_dim))
        self.is_real = bool(is_real)
        self.n_total = 0
        self._alloc(0)
        self.clear()

    def _alloc(self, n):
        od, gd, adim = self.dims
        T = self.T
        shapes = {
            "obs": ((n, T + 1, od), np.float64),
            "ag": ((n, T + 1, gd), np.float64),
            "g": ((n, gd), np.float64),
            "actions": ((n, T, adim), np.float64),
            "rewards": ((n, T), np.float64),
            "epoch": ((n,), np.int64),
            "policy_id": ((n,), np.int64),
            "model_epoch": ((n,), np.int64),
            "members": ((n, T), np.int64),
            "order": ((n,), np.int64),
        }
        old = getattr(self, "_data", None)
        data = {k: np.zeros(shape, dtype) for k, (shape, dtype) in shapes.items()}
        if old is not None:
            m = len(old["order"])
            for k in data:
                data[k][:m] = old[k]
        self._data = data

    def clear(self):
        """Drop all stored episodes; lifetime counter is kept."""
        self.n_episodes = 0
        self._head = 0
        self._inserted = 0

    def __len__(self):
        return self.n_episodes * self.T

    @property
    def size(self):
        return len(self)

    def __getattr__(self, name):
        data = self.__dict__.get("_data")
        if data is not None and name in data:
            return data[name][: self.n_episodes]
        raise AttributeError(name)

    def store_episode(self, ep: Episode, count=True):
        if len(ep.actions) != self.T or len(ep.obs) != self.T + 1:
            raise ValueError(f"episode length {len(ep.actions)} != buffer episode length {self.T}")
        if bool(ep.is_real) != self.is_real:
            raise ValueError("episode real/imaginary tag does not match buffer")
        if self.n_episodes < self.max_episodes:
            slot = self.n_episodes
            if slot >= len(self._data["order"]):
                self._alloc(min(self.max_episodes, max(self._GROW, 2 * len(self._data["order"]))))
            self.n_episodes += 1
        else:
            slot = self._head
            self._head = (self._head + 1) % self.max_episodes
        d = self._data
        d["obs"][slot] = ep.obs
        d["ag"][slot] = ep.ag
        d["g"][slot] = ep.g
        d["actions"][slot] = ep.actions
        d["rewards"][slot] = ep.rewards
        d["epoch"][slot] = ep.epoch
        d["policy_id"][slot] = ep.policy_id
        d["model_epoch"][slot] = ep.model_epoch
        d["members"][slot] = ep.members
        d["order"][slot] = self._inserted
        self._inserted += 1
        if count:
            self.n_total += self.T

    def slots_oldest_first(self):
        return np.argsort(self.order, kind="stable")

    def episode(self, slot) -> Episode:
        d = self._data
        return Episode(d["obs"][slot].copy(), d["ag"][slot].copy(), d["g"][slot].copy(),
                       d["actions"][slot].copy(), d["rewards"][slot].copy(), self.is_real,
                       int(d["epoch"][slot]), int(d["policy_id"][slot]),
                       int(d["model_epoch"][slot]), d["members"][slot].copy())

    def episodes(self):
        """Stored episodes, oldest first."""
        return [self.episode(s) for s in self.slots_oldest_first()]

    def transitions(self):
        """Iterate stored transitions, oldest episode first."""
        for ep in self.episodes():
            for t in range(self.T):
                yield Transition(
                    GoalObservation(ep.obs[t], ep.ag[t], ep.g),
                    ep.actions[t],
                    GoalObservation(ep.obs[t + 1], ep.ag[t + 1], ep.g),
                    float(ep.rewards[t]), ep.is_real, ep.epoch)

    def gather(self, ep_idx, t, source) -> Batch:
        d = self._data
        n = len(ep_idx)
        return Batch(
            obs=d["obs"][ep_idx, t], ag=d["ag"][ep_idx, t], g=d["g"][ep_idx].copy(),
            actions=d["actions"][ep_idx, t], next_obs=d["obs"][ep_idx, t + 1],
            next_ag=d["ag"][ep_idx, t + 1], rewards=d["rewards"][ep_idx, t],
            is_real=np.full(n, self.is_real), source=np.full(n, source, dtype=np.int64),
            episode=np.asarray(ep_idx, dtype=np.int64), t=np.asarray(t, dtype=np.int64),
            relabeled=np.zeros(n, dtype=bool))

    def sample(self, n, rng, source=None) -> Batch:
        """Uniform over stored transitions."""
        if self.n_episodes == 0:
            raise ValueError("cannot sample from an empty buffer")
        ep = rng.integers(0, self.n_episodes, size=n)
        t = rng.integers(0, self.T, size=n)
        return self.gather(ep, t, (REAL if self.is_real else IMAG) if source is None else source)


def her_relabel(batch: Batch, buffers, replay_k, rng, reward_fn) -> Batch:
    """Hindsight "future" relabeling.

    Each transition is relabeled with probability ``replay_k / (replay_k + 1)``
    to the achieved goal of a uniformly drawn later step ``t+1 .. T`` of its
    own episode; rewards are then recomputed with ``reward_fn``. ``buffers``
    maps a batch ``source`` tag to the buffer holding the episode.
    """
    if replay_k < 0:
        raise ValueError("replay_k must be non-negative")
    n = len(batch)
    if replay_k == 0 or n == 0:
        return replace(batch)
    future_p = replay_k / (replay_k + 1.0)
    mask = rng.random(n) < future_p
    u = rng.random(n)
    g = batch.g.copy()
    for src in np.unique(batch.source):
        buf = buffers[int(src)]
        sel = np.flatnonzero(mask & (batch.source == src))
        if len(sel) == 0:
            continue
        t = batch.t[sel]
        future = t + 1 + np.floor(u[sel] * (buf.T - t)).astype(np.int64)
        future = np.minimum(future, buf.T)
        g[sel] = buf._data["ag"][batch.episode[sel], future]
    rewards = np.where(mask, reward_fn(batch.next_ag, g), batch.rewards)
    return replace(batch, g=g, rewards=rewards, relabeled=mask)


def imag_fraction(n_real, n_imag) -> float:
    total = n_real + n_imag
    return 0.0 if total == 0 else n_imag / total


def dual_sample(real: EpisodeBuffer, imag: EpisodeBuffer | None, batch_size, rng) -> Batch:
    """Mix real and imaginary transitions by lifetime collection counts."""
    if real.n_episodes == 0:
        raise ValueError("real buffer is empty")
    if imag is None or imag.n_episodes == 0:
        n_imag = 0
    else:
        n_imag = int(np.floor(batch_size * imag_fraction(real.n_total, imag.n_total) + 0.5))
    parts = [real.sample(batch_size - n_imag, rng, REAL)]
    if n_imag:
        parts.append(imag.sample(n_imag, rng, IMAG))
    return Batch.concat(parts)


def recency_weights(epochs, current_epoch, bias):
    """Sampling weights ``(E_i / E) * (b - 1)``."""
    if bias < 1:
        raise ValueError("bias must be >= 1")
    epochs = np.asarray(epochs, dtype=np.float64)
    return epochs / float(current_epoch) * (bias - 1.0)


def recency_probabilities(epochs, current_epoch, bias):
    w = recency_weights(epochs, current_epoch, bias)
    total = w.sum()
    if total <= 0:
        return np.full(len(w), 1.0 / len(w))
    return w / total


def sample_biased_for_model(buffer: EpisodeBuffer, batch_size, current_epoch, bias, rng) -> Batch:
    """Draw transitions with probability proportional to their recency weight.

    All transitions of an episode share its collection epoch, so an episode is
    drawn by weight and the step uniformly within it.
    """
    if buffer.n_episodes == 0:
        raise ValueError("cannot sample from an empty buffer")
    p = recency_probabilities(buffer.epoch, current_epoch, bias)
    ep = rng.choice(buffer.n_episodes, size=batch_size, p=p)
    t = rng.integers(0, buffer.T, size=batch_size)
    return buffer.gather(ep, t, REAL if buffer.is_real else IMAG)
