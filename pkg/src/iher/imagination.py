"""Imaginary rollouts through the learned ensemble and buffer regeneration."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .agent import Policy
from .dynamics import EnsembleModel, predict_next
from .envs import GoalEnv
from .replay import Episode, EpisodeBuffer


@dataclass
class PolicySnapshotStore:
    """Frozen policies, oldest first, each tagged with its capture cycle."""

    snapshots: list = None
    cycles: list = None

    def __post_init__(self):
        self.snapshots = [] if self.snapshots is None else self.snapshots
        self.cycles = [] if self.cycles is None else self.cycles

    def __len__(self):
        return len(self.snapshots)

    def add(self, policy: Policy, cycle_index: int):
        self.snapshots.append(policy.frozen(policy_id=len(self.snapshots) + 1))
        self.cycles.append(int(cycle_index))

    def newest_first(self):
        return list(reversed(self.snapshots))


def snapshot_policy(store: PolicySnapshotStore, policy: Policy, cycle_index, cadence=50) -> bool:
    """Store a frozen copy when ``cycle_index`` is a positive multiple of ``cadence``."""
    if cycle_index > 0 and cycle_index % cadence == 0:
        store.add(policy, cycle_index)
        return True
    return False


@dataclass(frozen=True)
class ImagRolloutRequest:
    episode_count: int
    explore: bool = True
    # bit fed to the policy; each episode is flipped with probability flip_fraction
    env_is_real_input: int = 0
    flip_fraction: float = 0.0
    random_eps: float = 0.3
    noise_eps: float = 0.2
    epoch: int = 1


def rollout_imaginary(ensemble: EnsembleModel, policy: Policy, initial_states, env: GoalEnv,
                      request: ImagRolloutRequest, rng) -> list[Episode]:
    """Roll ``request.episode_count`` episodes through the ensemble in one batch.

    Start states are drawn from ``initial_states`` (recorded real starts) and
    goals from ``env.sample_goal``. Every step each episode draws a member
    uniformly; rewards use the known reward function.
    """
    ensemble._check_trained()
    initial_states = np.asarray(initial_states)
    if len(initial_states) == 0:
        raise ValueError("no recorded initial states to start imaginary rollouts from")
    n = int(request.episode_count)
    if n <= 0:
        return []
    T = env.spec.episode_length
    s = initial_states[rng.integers(0, len(initial_states), size=n)].astype(np.float64)
    g = np.stack([env.sample_goal(s[i], rng) for i in range(n)])
    flip = rng.random(n) < request.flip_fraction
    bits = np.where(flip, 1 - request.env_is_real_input, request.env_is_real_input).astype(np.float64)

    obs = np.empty((n, T + 1, s.shape[1]))
    actions = np.empty((n, T, env.spec.action_dim))
    members = np.empty((n, T), dtype=np.int64)
    obs[:, 0] = s
    for t in range(T):
        a = policy.act(s, g, bits, request.explore, rng, request.random_eps, request.noise_eps)
        m = rng.integers(0, ensemble.k, size=n)
        nxt = np.empty_like(s)
        for j in range(ensemble.k):
            rows = np.flatnonzero(m == j)
            if len(rows):
                nxt[rows] = predict_next(ensemble, j, s[rows], a[rows])
        actions[:, t] = a
        members[:, t] = m
        obs[:, t + 1] = nxt
        s = nxt
    ag = env.achieved_goal(obs)
    rewards = env.compute_reward(ag[:, 1:], np.broadcast_to(g[:, None, :], ag[:, 1:].shape))
    return [Episode(obs[i], ag[i], g[i], actions[i], rewards[i], False, request.epoch,
                    policy.policy_id, ensemble.generation, members[i]) for i in range(n)]


def regenerate_imag_buffer(ensemble, imag_buffer: EpisodeBuffer, snapshot_store: PolicySnapshotStore,
                           current_policy: Policy, per_policy_quota, rng, initial_states, env,
                           request: ImagRolloutRequest) -> int:
    """Empty ``imag_buffer`` and refill it to its previous episode count.

    Policies are visited current first, then stored snapshots newest to
    oldest (cycling again if the quota runs out); each contributes up to
    ``per_policy_quota`` episodes. The lifetime counter is left unchanged.
    Returns the number of episodes generated.
    """
    target = imag_buffer.n_episodes
    if target == 0:
        return 0
    if per_policy_quota <= 0:
        raise ValueError("per_policy_quota must be positive")
    imag_buffer.clear()
    policies = [current_policy, *snapshot_store.newest_first()]
    made, i = 0, 0
    while made < target:
        n = min(int(per_policy_quota), target - made)
        eps = rollout_imaginary(ensemble, policies[i % len(policies)], initial_states, env,
                                replace(request, episode_count=n), rng)
        for ep in eps:
            imag_buffer.store_episode(ep, count=False)
        made += n
        i += 1
    return made
