"""Episodic ring replay buffer with hindsight goal relabeling.

Episodes are committed whole, occupying contiguous (mod capacity) slots, so
future-state lookups for relabeling never cross episode boundaries. The
planned subgoal path recorded at collection time rides along with every
transition; the distillation loss consumes it together with the original
episode goal, regardless of any relabeling applied to the RL losses.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .maze import goal_map


@dataclass
class Transition:
    """One stored environment step (copy, for inspection and tests)."""

    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    g: np.ndarray
    path: np.ndarray  # planned subgoal path (N, goal_dim), path[0]=phi(s), path[-1]=g
    done: bool
    episode_id: int
    t: int


@dataclass
class RelabeledBatch:
    """Minibatch after hindsight relabeling.

    ``g`` is the goal the RL losses should use (original or hindsight);
    ``g_orig``/``paths`` keep the stored episode goal and planned path for
    the distillation term. Rewards of relabeled samples are recomputed from
    the sparse goal-reaching rule.
    """

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    g: np.ndarray
    relabeled: np.ndarray
    g_orig: np.ndarray
    paths: list


class ReplayBuffer:
    def __init__(self, capacity: int, delta: float, state_dim=2, action_dim=2, goal_dim=2):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.delta = float(delta)
        cap = self.capacity
        self._s = np.zeros((cap, state_dim))
        self._a = np.zeros((cap, action_dim))
        self._r = np.zeros(cap)
        self._s_next = np.zeros((cap, state_dim))
        self._g = np.zeros((cap, goal_dim))
        self._done = np.zeros(cap, dtype=bool)
        self._eid = np.zeros(cap, dtype=np.int64)
        self._t = np.zeros(cap, dtype=np.int64)
        self._to_end = np.zeros(cap, dtype=np.int64)  # transitions to episode end, incl. self
        self._paths = [None] * cap
        self._episodes = deque()  # (start_slot, length)
        self._head = 0  # oldest valid slot
        self._write = 0  # next slot to write
        self._n = 0  # valid transitions
        self.total_added = 0
        self.episodes_added = 0

    def __len__(self):
        return self._n

    @property
    def n_episodes(self):
        return len(self._episodes)

    def add_episode(self, states, actions, rewards, goal, paths, episode_id=None):
        """Commit one finished episode.

        states: (T+1, sd) visited states; actions: (T, ad); rewards: (T,);
        goal: (gd,) the episode's target; paths: list of T planned paths.
        """
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        rewards = np.asarray(rewards, dtype=float)
        T = len(actions)
        if T == 0:
            return
        if T > self.capacity:
            raise ValueError("episode longer than buffer capacity")
        if len(states) != T + 1 or len(rewards) != T or len(paths) != T:
            raise ValueError("episode arrays disagree on length")
        while self._n + T > self.capacity:
            start, length = self._episodes.popleft()
            self._n -= length
            self._head = (start + length) % self.capacity
        if episode_id is None:
            episode_id = self.episodes_added
        start = self._write
        for t in range(T):
            i = (start + t) % self.capacity
            self._s[i] = states[t]
            self._a[i] = actions[t]
            self._r[i] = rewards[t]
            self._s_next[i] = states[t + 1]
            self._g[i] = goal
            self._done[i] = t == T - 1
            self._eid[i] = episode_id
            self._t[i] = t
            self._to_end[i] = T - t
            path = np.asarray(paths[t], dtype=float)
            if path.ndim != 2 or len(path) < 2:
                raise ValueError("stored path must have at least two nodes")
            self._paths[i] = path
        self._write = (start + T) % self.capacity
        self._n += T
        self.total_added += T
        self.episodes_added += 1
        self._episodes.append((start, T))

    def _slots(self, offsets):
        return (self._head + offsets) % self.capacity

    def get(self, offset: int) -> Transition:
        """Transition by age order (0 = oldest stored)."""
        if not 0 <= offset < self._n:
            raise IndexError("transition offset out of range")
        i = (self._head + offset) % self.capacity
        return Transition(
            s=self._s[i].copy(),
            a=self._a[i].copy(),
            r=float(self._r[i]),
            s_next=self._s_next[i].copy(),
            g=self._g[i].copy(),
            path=self._paths[i].copy(),
            done=bool(self._done[i]),
            episode_id=int(self._eid[i]),
            t=int(self._t[i]),
        )

    def sample_states(self, n: int, rng) -> np.ndarray:
        """n stored states, uniform with replacement (graph-pool sampling)."""
        if self._n == 0:
            raise ValueError("cannot sample from an empty buffer")
        if n == 0:
            return np.zeros((0, self._s.shape[1]))
        idx = self._slots(rng.integers(self._n, size=n))
        return self._s[idx].copy()


def her_sample(buf: ReplayBuffer, batch_size: int, ratio: float, future_range: int, rng) -> RelabeledBatch:
    """Uniform minibatch with future-state hindsight relabeling.

    Each sample is independently relabeled with probability ``ratio`` to the
    achieved goal of a uniformly chosen later state at most ``future_range``
    steps ahead in the same episode; its reward is then recomputed against
    the new goal. Draw order: slot indices, relabel mask, future offsets.
    """
    if batch_size > len(buf):
        raise ValueError(f"batch_size {batch_size} exceeds buffer occupancy {len(buf)}")
    if future_range < 1:
        raise ValueError("future_range must be >= 1")
    offs = rng.integers(len(buf), size=batch_size)
    idx = buf._slots(offs)
    relabel = rng.random(batch_size) < ratio
    # future offset j in [0, m): goal of state s_{t+1+j}
    m = np.minimum(buf._to_end[idx], future_range)
    j = np.floor(rng.random(batch_size) * m).astype(np.int64)
    fut = (idx + j) % buf.capacity

    s = buf._s[idx].copy()
    a = buf._a[idx].copy()
    r = buf._r[idx].copy()
    s_next = buf._s_next[idx].copy()
    g_orig = buf._g[idx].copy()
    g = g_orig.copy()

    if relabel.any():
        new_goals = np.stack([goal_map(x) for x in buf._s_next[fut[relabel]]])
        g[relabel] = new_goals
        d = np.linalg.norm(
            np.stack([goal_map(x) for x in s_next[relabel]]) - new_goals, axis=1
        )
        r[relabel] = np.where(d <= buf.delta, 0.0, -1.0)

    paths = [buf._paths[i] for i in idx]
    return RelabeledBatch(
        s=s, a=a, r=r, s_next=s_next, g=g, relabeled=relabel, g_orig=g_orig, paths=paths
    )
