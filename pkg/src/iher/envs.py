"""Deterministic 2-D multi-goal tasks with a sparse binary reward.

Three tasks share one interface:

* ``point-reach``: a point mass must reach a goal position.
* ``point-push``: the point must shove a box onto the goal (the box only
  moves on contact, so exploration has to find the box first).
* ``point-slide``: the point lives in the left half-plane and must flick a
  decaying-velocity box into goals on the right.

Each task's physics is a pure, vectorised ``transition(state, action)`` over a
batch of flat state vectors; :class:`GoalEnv` wraps a single instance and
:class:`VecGoalEnv` steps many instances at once. The full state equals the
observation vector, so learned models see a Markov state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WORKSPACE = 1.0
CONTACT_RADIUS = 0.1


def compute_reward(achieved_goal, desired_goal, tolerance=0.05):
    """0 where the goal is within ``tolerance`` (inclusive), -1 elsewhere.

    Works on single goals (returns a float) or on batches along the last axis.
    """
    a = np.asarray(achieved_goal, dtype=np.float64)
    d = np.asarray(desired_goal, dtype=np.float64)
    if a.shape != d.shape:
        raise ValueError(f"goal shapes differ: {a.shape} vs {d.shape}")
    dist = np.linalg.norm(a - d, axis=-1)
    r = -(dist > tolerance).astype(np.float64)
    return float(r) if r.ndim == 0 else r


def is_success(achieved_goal, desired_goal, tolerance=0.05):
    r = compute_reward(achieved_goal, desired_goal, tolerance)
    return r == 0.0 if np.ndim(r) == 0 else r == 0.0


@dataclass(frozen=True)
class GoalObservation:
    observation: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    name: str
    obs_dim: int
    action_dim: int
    goal_dim: int
    episode_length: int = 50
    success_tolerance: float = 0.05


class GoalEnv:
    """Single goal-conditioned environment instance.

    Subclasses provide ``transition``, ``sample_initial_state``,
    ``sample_goal`` and ``goal_slice``.
    """

    spec: EnvSpec
    goal_slice: slice
    # closed box the state must stay in, per state dimension
    state_low: np.ndarray
    state_high: np.ndarray

    def __init__(self, episode_length=50, success_tolerance=0.05):
        self.spec = EnvSpec(self.spec.name, self.spec.obs_dim, self.spec.action_dim,
                            self.spec.goal_dim, int(episode_length), float(success_tolerance))
        self.state = None
        self.goal = None
        self.t = 0

    # --- pure task definition -------------------------------------------------
    @staticmethod
    def transition(state: np.ndarray, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sample_initial_state(self, rng) -> np.ndarray:
        raise NotImplementedError

    def sample_goal(self, state, rng) -> np.ndarray:
        raise NotImplementedError

    def achieved_goal(self, state):
        return np.asarray(state)[..., self.goal_slice]

    def compute_reward(self, achieved_goal, desired_goal):
        return compute_reward(achieved_goal, desired_goal, self.spec.success_tolerance)

    def is_success(self, achieved_goal, desired_goal):
        return is_success(achieved_goal, desired_goal, self.spec.success_tolerance)

    # --- instance interface ---------------------------------------------------
    def _observe(self) -> GoalObservation:
        s = self.state.copy()
        return GoalObservation(s, self.achieved_goal(s).copy(), self.goal.copy())

    def reset(self, rng_seed=None) -> GoalObservation:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        self.state = self.sample_initial_state(rng)
        self.goal = self.sample_goal(self.state, rng)
        self.t = 0
        return self._observe()

    def step(self, action):
        if self.state is None:
            raise RuntimeError("step() called before reset()")
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.spec.action_dim,):
            raise ValueError(f"action must have shape ({self.spec.action_dim},), got {a.shape}")
        self.state = self.transition(self.state[None], a[None])[0]
        self.t += 1
        obs = self._observe()
        reward = self.compute_reward(obs.achieved_goal, obs.desired_goal)
        return obs, reward, self.t >= self.spec.episode_length


class PointReach(GoalEnv):
    """Point mass, state ``[x, y, vx, vy]``, acceleration actions."""

    spec = EnvSpec("point-reach", obs_dim=4, action_dim=2, goal_dim=2)
    goal_slice = slice(0, 2)
    state_low = np.array([-1, -1, -0.2, -0.2], dtype=np.float64)
    state_high = -state_low
    goal_range = 0.8
    accel = 0.05
    max_speed = 0.2

    @classmethod
    def _move_agent(cls, pos, vel, action):
        a = np.clip(action, -1.0, 1.0)
        vel = np.clip(vel + cls.accel * a, -cls.max_speed, cls.max_speed)
        pos = np.clip(pos + vel, -WORKSPACE, WORKSPACE)
        return pos, vel

    @staticmethod
    def transition(state, action):
        pos, vel = PointReach._move_agent(state[:, 0:2], state[:, 2:4], action)
        return np.concatenate([pos, vel], axis=1)

    def sample_initial_state(self, rng):
        return np.zeros(4)

    def sample_goal(self, state, rng):
        return rng.uniform(-self.goal_range, self.goal_range, size=2)


def resolve_contact(agent, box, radius=CONTACT_RADIUS):
    """Push boxes that overlap the agent out to ``radius`` along agent->box.

    Returns the new box positions and a boolean contact mask. A box exactly on
    top of the agent is pushed along +x.
    """
    diff = box - agent
    dist = np.linalg.norm(diff, axis=1)
    contact = dist < radius
    safe = np.where(dist > 1e-12, dist, 1.0)[:, None]
    direction = np.where((dist > 1e-12)[:, None], diff / safe, np.array([1.0, 0.0]))
    pushed = agent + radius * direction
    return np.where(contact[:, None], pushed, box), contact


class PointPush(GoalEnv):
    """Point mass plus a box it can shove; state ``[x, y, vx, vy, bx, by]``."""

    spec = EnvSpec("point-push", obs_dim=6, action_dim=2, goal_dim=2)
    goal_slice = slice(4, 6)
    state_low = np.array([-1, -1, -0.2, -0.2, -1, -1], dtype=np.float64)
    state_high = -state_low
    box_range = 0.3
    # goals share the box's range, as object and target ranges do in the Fetch push task
    goal_range = 0.3
    min_goal_separation = 0.1

    @staticmethod
    def transition(state, action):
        pos, vel = PointReach._move_agent(state[:, 0:2], state[:, 2:4], action)
        box, _ = resolve_contact(pos, state[:, 4:6])
        box = np.clip(box, -WORKSPACE, WORKSPACE)
        return np.concatenate([pos, vel, box], axis=1)

    def sample_initial_state(self, rng):
        while True:
            box = rng.uniform(-self.box_range, self.box_range, size=2)
            if np.linalg.norm(box) >= 2 * CONTACT_RADIUS:
                return np.concatenate([np.zeros(4), box])

    def sample_goal(self, state, rng):
        box = np.asarray(state)[4:6]
        while True:
            goal = rng.uniform(-self.goal_range, self.goal_range, size=2)
            if np.linalg.norm(goal - box) >= self.min_goal_separation:
                return goal


class PointSlide(GoalEnv):
    """Velocity-commanded point confined to ``x <= 0`` and a sliding box.

    State ``[x, y, vx, vy, bx, by, bvx, bvy]``. Contact pushes the box out of
    the agent and adds an impulse along the contact normal proportional to the
    agent's approach speed; the box velocity then decays by ``friction`` per
    step. Goals lie in ``x in [0.2, 0.9]``, out of the agent's reach.
    """

    spec = EnvSpec("point-slide", obs_dim=8, action_dim=2, goal_dim=2)
    goal_slice = slice(4, 6)
    state_low = np.array([-1, -1, -0.1, -0.1, -1, -1, -0.5, -0.5], dtype=np.float64)
    state_high = np.array([0, 1, 0.1, 0.1, 1, 1, 0.5, 0.5], dtype=np.float64)
    speed = 0.1
    friction = 0.9
    impulse_gain = 1.5
    max_box_speed = 0.5

    @staticmethod
    def transition(state, action):
        cls = PointSlide
        a = np.clip(action, -1.0, 1.0)
        vel = cls.speed * a
        pos = state[:, 0:2] + vel
        pos = np.stack([np.clip(pos[:, 0], -WORKSPACE, 0.0), np.clip(pos[:, 1], -WORKSPACE, WORKSPACE)], axis=1)
        vel = pos - state[:, 0:2]
        box, contact = resolve_contact(pos, state[:, 4:6])
        normal = box - pos
        norm = np.linalg.norm(normal, axis=1, keepdims=True)
        normal = normal / np.where(norm > 1e-12, norm, 1.0)
        approach = np.maximum(np.sum(vel * normal, axis=1, keepdims=True), 0.0)
        bvel = state[:, 6:8] + np.where(contact[:, None], cls.impulse_gain * approach * normal, 0.0)
        bvel = np.clip(bvel, -cls.max_box_speed, cls.max_box_speed)
        box = box + bvel
        hit_wall = np.abs(box) > WORKSPACE
        box = np.clip(box, -WORKSPACE, WORKSPACE)
        bvel = np.where(hit_wall, 0.0, bvel) * cls.friction
        return np.concatenate([pos, vel, box, bvel], axis=1)

    def sample_initial_state(self, rng):
        box = np.array([-0.2, rng.uniform(-0.3, 0.3)])
        agent = np.array([-0.5, rng.uniform(-0.3, 0.3)])
        return np.concatenate([agent, np.zeros(2), box, np.zeros(2)])

    def sample_goal(self, state, rng):
        return np.array([rng.uniform(0.2, 0.9), rng.uniform(-0.5, 0.5)])


TASKS = {"point-reach": PointReach, "point-push": PointPush, "point-slide": PointSlide}


def make_env(name: str, **overrides) -> GoalEnv:
    try:
        cls = TASKS[name]
    except KeyError:
        raise ValueError(f"unknown task {name!r}; choose from {sorted(TASKS)}") from None
    return cls(**overrides)


class VecGoalEnv:
    """A batch of independent instances of one task stepped together.

    Each instance gets its own RNG stream for resets.
    """

    def __init__(self, env: GoalEnv, n: int):
        self.env = env
        self.n = int(n)
        self.states = None
        self.goals = None
        self.t = 0

    @property
    def spec(self):
        return self.env.spec

    def reset(self, rngs):
        if len(rngs) != self.n:
            raise ValueError("need one RNG per instance")
        obs = [self.env.reset(r) for r in rngs]
        self.states = np.stack([o.observation for o in obs])
        self.goals = np.stack([o.desired_goal for o in obs])
        self.t = 0
        return self.states.copy(), self.env.achieved_goal(self.states).copy(), self.goals.copy()

    def step(self, actions):
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (self.n, self.spec.action_dim):
            raise ValueError(f"actions must have shape ({self.n}, {self.spec.action_dim})")
        self.states = self.env.transition(self.states, actions)
        self.t += 1
        ag = self.env.achieved_goal(self.states)
        reward = self.env.compute_reward(ag, self.goals)
        return self.states.copy(), ag.copy(), reward, self.t >= self.spec.episode_length
