"""Goal-conditioned DDPG with a real/imaginary input bit."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import diffnet


class RunningNormalizer:
    """Running mean/std per dimension with output clipping.

    Matches the usual HER-DDPG normalizer: ``std`` is floored at ``eps``.
    """

    def __init__(self, dim, clip=5.0, eps=1e-2):
        self.dim = int(dim)
        self.clip = float(clip)
        self.eps = float(eps)
        self.sum = np.zeros(self.dim)
        self.sumsq = np.zeros(self.dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.std = np.ones(self.dim)

    def update(self, x):
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        self.sum += x.sum(axis=0)
        self.sumsq += (x * x).sum(axis=0)
        self.count += len(x)
        self.mean = self.sum / self.count
        var = np.maximum(self.eps**2, self.sumsq / self.count - self.mean**2)
        self.std = np.sqrt(var)

    def normalize(self, x):
        return np.clip((x - self.mean) / self.std, -self.clip, self.clip)


@dataclass
class Policy:
    """Actor plus the input statistics it was trained with."""

    actor: diffnet.Mlp
    obs_norm: RunningNormalizer
    goal_norm: RunningNormalizer
    policy_id: int = 0

    def inputs(self, obs, goal, bit):
        obs = np.atleast_2d(obs)
        bit = np.broadcast_to(np.asarray(bit, dtype=np.float64), (len(obs),))
        return np.concatenate([self.obs_norm.normalize(obs), self.goal_norm.normalize(np.atleast_2d(goal)),
                               bit[:, None]], axis=1)

    def act(self, obs, goal, bit, explore=False, rng=None, random_eps=0.3, noise_eps=0.2):
        u = diffnet.forward(self.actor, self.inputs(obs, goal, bit))
        if not explore:
            return u
        u = np.clip(u + noise_eps * rng.standard_normal(u.shape), -1.0, 1.0)
        uniform = rng.uniform(-1.0, 1.0, size=u.shape)
        pick = rng.random(len(u)) < random_eps
        return np.where(pick[:, None], uniform, u)

    def frozen(self, policy_id=None) -> "Policy":
        p = copy.deepcopy(self)
        if policy_id is not None:
            p.policy_id = policy_id
        return p


class DDPGAgent:
    def __init__(self, obs_dim, goal_dim, action_dim, hidden=(256, 256, 256), gamma=0.98, polyak=0.95,
                 actor_lr=1e-3, critic_lr=1e-3, action_l2=1.0, clip_obs=5.0, clip_return=(-50.0, 0.0),
                 rng=None):
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.obs_dim, self.goal_dim, self.action_dim = int(obs_dim), int(goal_dim), int(action_dim)
        in_dim = self.obs_dim + self.goal_dim + 1
        self.actor = diffnet.init_mlp([in_dim, *hidden, self.action_dim], rng, "relu", "tanh")
        self.critic = diffnet.init_mlp([in_dim + self.action_dim, *hidden, 1], rng, "relu", "identity")
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_adam = diffnet.AdamState.for_net(self.actor, actor_lr)
        self.critic_adam = diffnet.AdamState.for_net(self.critic, critic_lr)
        self.obs_norm = RunningNormalizer(self.obs_dim, clip_obs)
        self.goal_norm = RunningNormalizer(self.goal_dim, clip_obs)
        self.gamma = float(gamma)
        self.polyak = float(polyak)
        self.action_l2 = float(action_l2)
        self.clip_return = (float(clip_return[0]), float(clip_return[1]))

    @property
    def policy(self) -> Policy:
        return Policy(self.actor, self.obs_norm, self.goal_norm)

    def update_normalizer(self, obs, goals):
        """Feed statistics from REAL data only."""
        self.obs_norm.update(obs)
        self.goal_norm.update(goals)


def q_target_range(gamma, clip):
    """Bounds of any discounted return with rewards in ``[-1, clip]``."""
    return -1.0 / (1.0 - gamma), clip / (1.0 - gamma)


def select_action(agent, goal_observation, env_is_real, explore, rng, random_eps=0.3, noise_eps=0.2):
    """Action for one :class:`GoalObservation` (or arrays via :meth:`Policy.act`)."""
    u = agent.policy.act(goal_observation.observation, goal_observation.desired_goal, env_is_real,
                         explore, rng, random_eps, noise_eps)
    return u[0]


def actor_loss_and_grads(agent: DDPGAgent, inputs):
    """Actor objective ``-mean(Q(s, pi(s))) + l2 * mean(pi(s)^2)`` and its gradients."""
    a_cache = diffnet.forward_cache(agent.actor, inputs)
    pi = a_cache[-1]
    c_in = np.concatenate([inputs, pi], axis=1)
    c_cache = diffnet.forward_cache(agent.critic, c_in)
    q = c_cache[-1]
    loss = -float(q.mean()) + agent.action_l2 * float(np.mean(pi * pi))
    _, dq_dinput = diffnet.backward(agent.critic, c_in, np.ones_like(q), cache=c_cache, param_grads=False)
    dq_da = dq_dinput[:, -agent.action_dim:]
    upstream = -dq_da + agent.action_l2 * 2.0 * pi / agent.action_dim
    grads, _ = diffnet.backward(agent.actor, inputs, upstream, cache=a_cache)
    return loss, grads


def update(agent: DDPGAgent, batch, update_target=True):
    """One critic and one actor Adam step on ``batch`` (rewards already final).

    The policy sees each transition's true ``is_real`` bit. Returns a dict of
    diagnostics.
    """
    pol = agent.policy
    bit = batch.is_real.astype(np.float64)
    inp = pol.inputs(batch.obs, batch.g, bit)
    next_inp = pol.inputs(batch.next_obs, batch.g, bit)

    a_next = diffnet.forward(agent.actor_target, next_inp)
    q_next = diffnet.forward(agent.critic_target, np.concatenate([next_inp, a_next], axis=1))[:, 0]
    lo, hi = agent.clip_return
    y = np.clip(batch.rewards + agent.gamma * q_next, lo, hi)

    c_in = np.concatenate([inp, batch.actions], axis=1)
    c_cache = diffnet.forward_cache(agent.critic, c_in)
    td = c_cache[-1][:, 0] - y
    critic_loss = float(np.mean(td * td))
    critic_grads, _ = diffnet.backward(agent.critic, c_in, 2.0 * td[:, None], cache=c_cache)

    actor_loss, actor_grads = actor_loss_and_grads(agent, inp)
    if not (np.isfinite(critic_loss) and np.isfinite(actor_loss)):
        raise FloatingPointError(f"non-finite loss: critic={critic_loss}, actor={actor_loss}")

    diffnet.adam_update(agent.critic, critic_grads, agent.critic_adam)
    diffnet.adam_update(agent.actor, actor_grads, agent.actor_adam)
    if update_target:
        update_targets(agent)
    return {"critic_loss": critic_loss, "actor_loss": actor_loss,
            "q_target_min": float(y.min()), "q_target_max": float(y.max())}


def polyak_update(main: diffnet.Mlp, target: diffnet.Mlp, tau):
    """``target <- tau * target + (1 - tau) * main`` in place."""
    if main.layer_sizes != target.layer_sizes:
        raise ValueError("main and target networks differ in shape")
    for p, q in zip(main.params(), target.params()):
        q *= tau
        q += (1.0 - tau) * p


def update_targets(agent: DDPGAgent):
    polyak_update(agent.actor, agent.actor_target, agent.polyak)
    polyak_update(agent.critic, agent.critic_target, agent.polyak)
