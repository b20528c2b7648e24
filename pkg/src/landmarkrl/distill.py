"""Planner-to-policy distillation and stochastic subgoal skipping.

Two ideas live here. First, a self-imitation loss that pulls the
target-goal-conditioned action toward stop-gradient copies of the actions
the same policy produces when conditioned on each subgoal of the stored
planned path: for a path (l1, ..., lN),

    mean over batch of  1/(N-1) * sum_{k=2..N} ||pi(s, g) - SG(pi(s, l_k))||^2.

Gradients flow only through the pi(s, g) branch. Second, a skipping rule
for execution: starting from the nearest planned subgoal, repeatedly jump
one node further with probability min(alpha / latest_loss, 1), and condition
the policy on wherever the jumps stop. A well-distilled policy (small latest
loss) therefore gets pushed toward farther subgoals, up to the goal itself.

Note: some formulations of the skipping procedure list an additional
normalizing constant among its inputs that never enters the jump rule; it
is deliberately not part of this interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SkipConfig:
    """alpha >= 0 is the skipping temperature; 0 disables skipping."""

    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


class LossTracker:
    """Tracks the distillation loss of the most recent actor update.

    Starts at +inf so the jump probability is 0 until the first update has
    happened; afterwards keeps an exponential moving average (``smoothing``
    fraction of the old value is kept; 0 means use the raw latest loss).
    """

    def __init__(self, smoothing: float = 0.95):
        if not 0.0 <= smoothing < 1.0:
            raise ValueError("smoothing must be in [0, 1)")
        self.smoothing = smoothing
        self.latest = math.inf
        self.update_count = 0

    def update(self, value: float):
        value = float(value)
        if value < 0:
            raise ValueError("distillation loss cannot be negative")
        if self.update_count == 0:
            self.latest = value
        else:
            self.latest = self.smoothing * self.latest + (1.0 - self.smoothing) * value
        self.update_count += 1
        return self.latest


def pig_loss(policy, states, paths, goals, target_actions=None):
    """Distillation loss and its gradient contribution.

    policy must expose ``actions(states, goals) -> (B, da)`` evaluated with
    current parameters. Returns ``(loss, upstream)`` where upstream is
    d loss / d pi(s, g) with every subgoal branch held constant; feeding it
    into a backward pass over the (s, g) branch realizes the stop-gradient.

    paths: list of (N_i, gd) arrays with N_i >= 2 and path[-1] == goal.
    ``target_actions`` may pass in an already computed pi(s, g) batch.
    """
    states = np.asarray(states, dtype=float)
    goals = np.asarray(goals, dtype=float)
    B = len(states)
    if B == 0:
        raise ValueError("empty batch")
    counts = []
    flat_states = []
    flat_goals = []
    for i, path in enumerate(paths):
        path = np.asarray(path, dtype=float)
        if path.ndim != 2 or len(path) < 2:
            raise ValueError(f"path {i} must contain at least two nodes")
        n_sub = len(path) - 1  # l2..lN
        counts.append(n_sub)
        flat_states.append(np.repeat(states[i][None, :], n_sub, axis=0))
        flat_goals.append(path[1:])
    counts = np.asarray(counts)
    # pi(s, g), the trainable branch
    a_target = policy.actions(states, goals) if target_actions is None else target_actions
    sub_actions = policy.actions(np.concatenate(flat_states), np.concatenate(flat_goals))

    seg = np.repeat(np.arange(B), counts)
    diff = a_target[seg] - sub_actions  # (sum counts, da)
    per_term = np.sum(diff * diff, axis=1)
    per_sample = np.zeros(B)
    np.add.at(per_sample, seg, per_term)
    per_sample /= counts
    loss = float(per_sample.mean())

    # d/d a_target of mean_i (1/N_i) sum_k ||a_i - c_ik||^2, c held constant
    upstream = np.zeros_like(a_target)
    np.add.at(upstream, seg, diff)
    upstream *= (2.0 / B) / counts[:, None]
    return loss, upstream


def gcsl_loss(policy, states, actions, goals, actions_pred=None):
    """Relabeled behavioral cloning: mean ||pi(s, g) - a||^2.

    Used by the ablation runner in place of the distillation term. Returns
    (loss, upstream on pi(s, g)). ``actions_pred`` may pass in an already
    computed pi(s, g) batch to avoid a duplicate forward pass.
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    B = len(states)
    if B == 0:
        raise ValueError("empty batch")
    pred = policy.actions(states, goals) if actions_pred is None else actions_pred
    diff = pred - actions
    loss = float(np.mean(np.sum(diff * diff, axis=1)))
    return loss, (2.0 / B) * diff


def total_actor_loss(l_actor: float, l_pig: float, lam: float) -> float:
    """Composite policy objective: l_actor + lam * l_pig."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return l_actor + lam * l_pig


def jump_probability(alpha: float, latest_pig_loss: float) -> float:
    """min(alpha / latest_loss, 1); alpha = 0 hard-disables skipping, even
    for a zero latest loss."""
    if alpha < 0 or latest_pig_loss < 0:
        raise ValueError("alpha and latest loss must be >= 0")
    if alpha == 0.0:
        return 0.0
    if latest_pig_loss <= alpha:  # covers latest == 0
        return 1.0
    return alpha / latest_pig_loss


def skip_subgoal(path, skip: SkipConfig, tracker: LossTracker, rng):
    """Pick the execution subgoal from a planned path by stochastic jumps.

    Starts at the nearest node l2 and advances one node per successful
    Bernoulli(jump_probability) draw, stopping at the first failure or the
    final node. Returns (subgoal, jumps_taken). Degenerate probabilities
    short-circuit without consuming random draws, so a disabled-skipping
    run consumes the identical random stream as a build without this module.
    """
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or len(path) < 2:
        raise ValueError("path must contain at least two nodes")
    n = len(path)
    p = jump_probability(skip.alpha, tracker.latest)
    if p <= 0.0:
        return path[1].copy(), 0
    if p >= 1.0:
        return path[-1].copy(), n - 2
    idx = 1
    while idx < n - 1:
        if rng.random() < p:
            idx += 1
        else:
            break
    return path[idx].copy(), idx - 1


def skip_subgoal_random(path, rng):
    """Baseline skipping rule: uniform choice among l2..lN."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or len(path) < 2:
        raise ValueError("path must contain at least two nodes")
    idx = 1 + int(rng.integers(len(path) - 1))
    return path[idx].copy(), idx - 1
