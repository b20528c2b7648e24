#!/usr/bin/env python3
"""Episodic replay with hindsight goal relabeling.

Failed trajectories become supervision for the goals they did reach: each
sampled transition is, with the configured probability, re-targeted at a
state achieved later in the same episode and its reward recomputed.
"""

import numpy as np

from landmarkrl import maze
from landmarkrl.replay import ReplayBuffer, her_sample

spec = maze.preset("u15")
rng = np.random.default_rng(1)
buf = ReplayBuffer(capacity=10_000, delta=spec.delta)

# collect a few random-walk episodes that (almost surely) fail
for ep in range(30):
    s, g = maze.reset(spec, rng)
    states, actions, rewards, paths = [s], [], [], []
    for t in range(spec.horizon):
        a = rng.uniform(-1, 1, 2)
        s = maze.step(spec, states[-1], a)
        r = maze.reward(s, g, spec.delta)
        states.append(s)
        actions.append(a)
        rewards.append(r)
        paths.append(np.stack([maze.goal_map(states[-2]), g]))
        if r == 0.0:
            break
    buf.add_episode(states, actions, rewards, g, paths, episode_id=ep)

stored_success = np.mean([buf.get(i).r == 0.0 for i in range(len(buf))])
print(f"stored {len(buf)} transitions from {buf.n_episodes} random episodes")
print(f"fraction with reward 0 as collected: {stored_success:.3f}")

batch = her_sample(buf, 256, ratio=0.8, future_range=50, rng=rng)
print(f"\nafter relabeling a 256-sample batch at ratio 0.8:")
print(f"  relabeled fraction: {batch.relabeled.mean():.2f}")
print(f"  fraction with reward 0 now:  {np.mean(batch.r == 0.0):.2f}")
print("  (hindsight turns failures into successes for the achieved goals)")

only_next = her_sample(buf, 64, ratio=1.0, future_range=1, rng=rng)
print(f"\nwith future_range=1 every relabeled goal is the very next state, "
      f"so rewards are all zero: {np.all(only_next.r == 0.0)}")
