"""
The three point tasks
=====================

Reach moves a point mass to a goal. Push needs the agent to find and shove a
box. Slide confines the agent to the left half-plane, so the box has to be
flicked across to goals on the right.
"""

import numpy as np

from iher.envs import make_env

for name in ("point-reach", "point-push", "point-slide"):
    env = make_env(name)
    o = env.reset(0)
    print(name, env.spec)
    print("  first observation:", np.round(o.observation, 3))
    print("  achieved goal", o.achieved_goal, "desired goal", np.round(o.desired_goal, 3))

# a proportional-derivative controller solves reach from every start
env = make_env("point-reach")
wins = 0
for seed in range(100):
    o = env.reset(seed)
    for t in range(env.spec.episode_length):
        p, v = o.observation[:2], o.observation[2:]
        o, r, done = env.step(np.clip(4.0 * (o.desired_goal - p) - 10.0 * v, -1, 1))
    wins += env.is_success(o.achieved_goal, o.desired_goal)
print("PD controller on reach:", wins, "/ 100")

# random actions almost never push the box onto its goal
env = make_env("point-push")
rng = np.random.default_rng(1)
wins = touched = 0
for seed in range(200):
    o = env.reset(seed)
    box0 = o.achieved_goal.copy()
    for t in range(env.spec.episode_length):
        o, r, done = env.step(rng.uniform(-1, 1, 2))
    touched += not np.array_equal(box0, o.achieved_goal)
    wins += env.is_success(o.achieved_goal, o.desired_goal)
print(f"random policy on push: box moved in {touched}/200 episodes, solved {wins}/200")
