"""
Hindsight relabeling and batch mixing
=====================================

Episodes are stored whole. Goals are rewritten only when a batch is drawn:
with ``replay_k = 4`` four out of five transitions get a goal the episode
actually reached later on, and their reward is recomputed.
"""

import numpy as np

from iher.envs import make_env
from iher.replay import IMAG, REAL, Episode, EpisodeBuffer, dual_sample, her_relabel

env = make_env("point-reach")
rng = np.random.default_rng(0)
T = env.spec.episode_length

real = EpisodeBuffer(100_000, T, 4, 2, 2, is_real=True)
for _ in range(20):
    o = env.reset(rng)
    obs, acts = [o.observation], []
    for _ in range(T):
        a = rng.uniform(-1, 1, 2)
        o, _, _ = env.step(a)
        obs.append(o.observation)
        acts.append(a)
    obs = np.array(obs)
    ag = obs[:, :2].copy()
    rewards = env.compute_reward(ag[1:], np.broadcast_to(o.desired_goal, (T, 2)))
    real.store_episode(Episode(obs, ag, o.desired_goal, np.array(acts), rewards, True, 1))

batch = real.sample(10_000, rng)
print("success rate of the original goals:", np.mean(batch.rewards == 0))
relabeled = her_relabel(batch, {REAL: real}, 4, rng, env.compute_reward)
print("fraction relabeled:", relabeled.relabeled.mean())
print("success rate after relabeling:", np.mean(relabeled.rewards == 0))

# with three times more imaginary than real data, three quarters of a batch is imaginary
imag = EpisodeBuffer(100_000, T, 4, 2, 2, is_real=False)
for ep in real.episodes():
    imag.store_episode(Episode(ep.obs, ep.ag, ep.g, ep.actions, ep.rewards, False, 1))
imag.n_total = 3 * real.n_total
mixed = dual_sample(real, imag, 256, rng)
print("imaginary rows in a batch of 256:", int((~mixed.is_real).sum()))
