import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iher.envs import (CONTACT_RADIUS, PointPush, PointReach, PointSlide, VecGoalEnv, compute_reward,
                       is_success, make_env)

TASK_NAMES = ["point-reach", "point-push", "point-slide"]


def pd_controller(obs, kp=4.0, kd=10.0):
    p, v = obs.observation[:2], obs.observation[2:4]
    return np.clip(kp * (obs.desired_goal - p) - kd * v, -1, 1)


def test_reach_reset_state_and_goal_range():
    env = make_env("point-reach")
    for seed in range(200):
        o = env.reset(seed)
        assert np.array_equal(o.observation, np.zeros(4))
        assert np.all(np.abs(o.desired_goal) <= 0.8)
        assert np.array_equal(o.achieved_goal, np.zeros(2))


def test_push_reset_separates_box_and_goal():
    env = make_env("point-push")
    for seed in range(1000):
        o = env.reset(seed)
        box = o.observation[4:6]
        assert np.all(np.abs(box) <= 0.3)
        assert np.array_equal(o.achieved_goal, box)
        assert np.linalg.norm(box - o.desired_goal) >= 0.1


@pytest.mark.parametrize("name", TASK_NAMES)
def test_equal_seeds_give_equal_resets(name):
    a, b = make_env(name).reset(42), make_env(name).reset(42)
    for x, y in zip((a.observation, a.achieved_goal, a.desired_goal), (b.observation, b.achieved_goal, b.desired_goal)):
        assert np.array_equal(x, y)


def test_reach_zero_action_at_rest_is_fixed_point():
    env = make_env("point-reach")
    env.reset(0)
    o, _, _ = env.step(np.zeros(2))
    assert np.array_equal(o.observation, np.zeros(4))


def test_reach_one_step_arithmetic():
    env = make_env("point-reach")
    env.reset(0)
    o, _, _ = env.step(np.array([1.0, 0.0]))
    np.testing.assert_allclose(o.observation, [0.05, 0.0, 0.05, 0.0])


def test_actions_are_clipped():
    s = np.zeros((1, 4))
    np.testing.assert_array_equal(PointReach.transition(s, np.array([[7.0, -3.0]])),
                                  PointReach.transition(s, np.array([[1.0, -1.0]])))


def test_push_contact_geometry():
    """Check pushes with geometry alone: no overlap, box on the agent->box ray, untouched otherwise."""
    rng = np.random.default_rng(0)
    contacts = 0
    while contacts < 1000:
        agent = rng.uniform(-0.8, 0.8, size=2)
        vel = rng.uniform(-0.2, 0.2, size=2)
        box = agent + vel + rng.uniform(-0.15, 0.15, size=2)
        if np.any(np.abs(box) > 0.85):
            continue
        action = rng.uniform(-1, 1, size=2)
        state = np.concatenate([agent, vel, box])[None]
        nxt = PointPush.transition(state, action[None])[0]
        agent2, box2 = nxt[:2], nxt[4:6]
        np.testing.assert_allclose(agent2, PointReach.transition(state[:, :4], action[None])[0, :2])
        before = np.linalg.norm(box - agent2)
        if before < CONTACT_RADIUS:
            contacts += 1
            assert np.linalg.norm(box2 - agent2) == pytest.approx(CONTACT_RADIUS, abs=1e-12)
            u, w = box - agent2, box2 - agent2
            assert abs(u[0] * w[1] - u[1] * w[0]) < 1e-12
            assert np.dot(u, w) > 0
        else:
            assert np.array_equal(box2, box)


@pytest.mark.parametrize("dist,expected", [(0.0, 0.0), (0.2, -1.0), (0.03, 0.0), (0.05, 0.0), (0.0500001, -1.0)])
def test_compute_reward(dist, expected):
    assert compute_reward([dist, 0.0], [0.0, 0.0], 0.05) == expected


def test_is_success_boundary_inclusive():
    assert is_success([0.05, 0.0], [0.0, 0.0], 0.05)
    assert is_success([0.3, 0.1], [0.3, 0.1], 0.05)


def test_compute_reward_rejects_length_mismatch():
    with pytest.raises(ValueError):
        compute_reward([0.0, 0.0], [0.0, 0.0, 0.0])


def test_compute_reward_batched():
    r = compute_reward(np.zeros((3, 2)), np.array([[0, 0], [1, 0], [0.01, 0.01]]))
    assert r.tolist() == [0.0, -1.0, 0.0]


@settings(max_examples=50)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_reward_reflexive(g):
    assert compute_reward(g, g) == 0.0


def test_step_rejects_bad_action():
    env = make_env("point-push")
    env.reset(0)
    with pytest.raises(ValueError):
        env.step(np.zeros(3))


def test_unknown_task():
    with pytest.raises(ValueError, match="point-reach"):
        make_env("fetch-reach")


def test_pd_oracle_solves_reach():
    env = make_env("point-reach")
    for seed in range(500):
        o = env.reset(seed)
        for _ in range(50):
            o, _, _ = env.step(pd_controller(o))
        assert env.is_success(o.achieved_goal, o.desired_goal)


@pytest.mark.parametrize("name", TASK_NAMES)
def test_rollouts_deterministic_and_bounded(name):
    env = make_env(name)
    rng = np.random.default_rng(1)
    for seed in range(20):
        actions = rng.uniform(-1.5, 1.5, size=(50, env.spec.action_dim))
        trajs = []
        for _ in range(2):
            o = env.reset(seed)
            traj = [o.observation]
            for t, a in enumerate(actions):
                o, r, done = env.step(a)
                assert done == (t == 49)
                assert r == env.compute_reward(o.achieved_goal, o.desired_goal)
                traj.append(o.observation)
            trajs.append(np.array(traj))
        assert np.array_equal(trajs[0], trajs[1])
        assert np.all(trajs[0] >= env.state_low - 1e-12) and np.all(trajs[0] <= env.state_high + 1e-12)


def test_episode_length_default():
    for name in TASK_NAMES:
        assert make_env(name).spec.episode_length == 50


def test_slide_agent_confined_and_box_decays():
    env = make_env("point-slide")
    o = env.reset(3)
    assert 0.2 <= o.desired_goal[0] <= 0.9
    rng = np.random.default_rng(0)
    for _ in range(50):
        o, _, _ = env.step(rng.uniform(-1, 1, size=2))
        assert o.observation[0] <= 0.0
    # free sliding box, agent far away
    s = np.array([[-0.9, -0.9, 0, 0, 0.0, 0.0, 0.2, 0.0]])
    nxt = PointSlide.transition(s, np.zeros((1, 2)))
    np.testing.assert_allclose(nxt[0, 4:6], [0.2, 0.0])
    np.testing.assert_allclose(nxt[0, 6:8], [0.18, 0.0])


def test_slide_impulse_sends_box_right():
    # agent just left of the box moving right at full speed
    s = np.array([[-0.2, 0.0, 0.0, 0.0, -0.05, 0.0, 0.0, 0.0]])
    nxt = PointSlide.transition(s, np.array([[1.0, 0.0]]))
    assert nxt[0, 6] > 0.1


def test_vec_env_matches_single_env():
    env = make_env("point-push")
    venv = VecGoalEnv(env, 3)
    rngs = [np.random.default_rng(s) for s in (5, 6, 7)]
    s, ag, g = venv.reset(rngs)
    singles = [make_env("point-push") for _ in range(3)]
    obs = [e.reset(np.random.default_rng(sd)) for e, sd in zip(singles, (5, 6, 7))]
    np.testing.assert_array_equal(s, np.stack([o.observation for o in obs]))
    a = np.random.default_rng(0).uniform(-1, 1, size=(3, 2))
    s2, _, r, _ = venv.step(a)
    for i, e in enumerate(singles):
        o, ri, _ = e.step(a[i])
        np.testing.assert_array_equal(s2[i], o.observation)
        assert r[i] == ri
