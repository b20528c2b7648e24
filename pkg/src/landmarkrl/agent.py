"""Deterministic actor-critic with goal conditioning (UVFA style).

The actor maps (state, goal) features to a bounded action; the critic
scores (state, action, goal). Both keep Polyak-averaged target copies.
TD targets bootstrap through the target networks and are cut at success
(sparse 0 reward), so the critic's negated output doubles as a step-count
distance estimate for the landmark graph.

Positions are optionally mapped affinely to [-1, 1] per axis before
entering the networks; actions are scaled by their bound. This is pure
featurization: every public interface speaks raw coordinates.
"""

from __future__ import annotations

import numpy as np

from . import distill
from .nets import AdamState, Mlp, adam_step, init_mlp, polyak_update


class ActorCritic:
    def __init__(
        self,
        actor: Mlp,
        critic: Mlp,
        actor_target: Mlp,
        critic_target: Mlp,
        action_bound: float,
        extent,
        normalize_inputs: bool = True,
        gamma: float = 0.99,
    ):
        self.actor = actor
        self.critic = critic
        self.actor_target = actor_target
        self.critic_target = critic_target
        self.action_bound = float(action_bound)
        self.extent = np.asarray(extent, dtype=float)
        self.normalize_inputs = bool(normalize_inputs)
        self.gamma = float(gamma)

    @classmethod
    def create(
        cls,
        rng,
        extent,
        action_bound=1.0,
        state_dim=2,
        goal_dim=2,
        action_dim=2,
        actor_hidden_layers=4,
        critic_hidden_layers=5,
        hidden_units=400,
        normalize_inputs=True,
        gamma=0.99,
        dtype=np.float64,
    ) -> "ActorCritic":
        actor_dims = [state_dim + goal_dim] + [hidden_units] * actor_hidden_layers + [action_dim]
        critic_dims = [state_dim + action_dim + goal_dim] + [hidden_units] * critic_hidden_layers + [1]
        actor = init_mlp(actor_dims, rng, output_activation="tanh", bound=action_bound, dtype=dtype)
        critic = init_mlp(critic_dims, rng, output_activation="linear", dtype=dtype)
        return cls(
            actor=actor,
            critic=critic,
            actor_target=actor.copy(),
            critic_target=critic.copy(),
            action_bound=action_bound,
            extent=extent,
            normalize_inputs=normalize_inputs,
            gamma=gamma,
        )

    # ---- featurization ------------------------------------------------

    def _feat_pos(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if not self.normalize_inputs:
            return p
        return 2.0 * (p / self.extent) - 1.0

    def _feat_act(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a, dtype=float) / self.action_bound

    def _actor_input(self, states, goals):
        return np.hstack([self._feat_pos(states), self._feat_pos(goals)])

    def _critic_input(self, states, actions, goals):
        return np.hstack(
            [self._feat_pos(states), self._feat_act(actions), self._feat_pos(goals)]
        )

    # ---- inference -----------------------------------------------------

    _CHUNK = 2048  # keep huge inference batches cache-resident

    def actions(self, states, goals) -> np.ndarray:
        """pi(s, g) for batched raw states/goals."""
        x = self._actor_input(np.atleast_2d(states), np.atleast_2d(goals))
        if len(x) <= self._CHUNK:
            return self.actor.forward(x)
        return np.concatenate(
            [self.actor.forward(x[i : i + self._CHUNK]) for i in range(0, len(x), self._CHUNK)]
        )

    def act(self, s, g) -> np.ndarray:
        return self.actions(np.asarray(s)[None, :], np.asarray(g)[None, :])[0]

    def q_values(self, states, actions, goals) -> np.ndarray:
        x = self._critic_input(states, actions, goals)
        if len(x) <= self._CHUNK:
            return self.critic.forward(x)[:, 0]
        return np.concatenate(
            [self.critic.forward(x[i : i + self._CHUNK])[:, 0] for i in range(0, len(x), self._CHUNK)]
        )

    def distance_to(self, states, goals) -> np.ndarray:
        """Estimated steps-to-reach: max(0, -Q(s, pi(s, g), g))."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        goals = np.atleast_2d(np.asarray(goals, dtype=float))
        acts = self.actions(states, goals)
        q = self.q_values(states, acts, goals)
        return np.maximum(0.0, -q)

    def select_action(self, s, goal, noise_std: float, rng) -> np.ndarray:
        """Greedy action plus exploration noise, clamped to the bounds.
        noise_std = 0 is deterministic and consumes no randomness."""
        a = self.act(s, goal)
        if noise_std > 0.0:
            a = a + rng.normal(0.0, noise_std, size=a.shape)
        return np.clip(a, -self.action_bound, self.action_bound)

    # ---- updates ---------------------------------------------------------

    def td_targets(
        self,
        batch,
        literal_bootstrap: bool = False,
        clip_return: bool = True,
        clip_threshold: float | None = None,
    ) -> np.ndarray:
        """Constant TD targets y = r + gamma * Q'(s', pi'(s', g), g), with the
        bootstrap cut when the transition achieved its goal (r = 0). Horizon
        timeouts do not cut the bootstrap."""
        actor_net = self.actor if literal_bootstrap else self.actor_target
        critic_net = self.critic if literal_bootstrap else self.critic_target
        a_next = actor_net.forward(self._actor_input(batch.s_next, batch.g))
        q_next = critic_net.forward(self._critic_input(batch.s_next, a_next, batch.g))[:, 0]
        achieved = batch.r == 0.0
        y = batch.r + self.gamma * np.where(achieved, 0.0, q_next)
        if clip_return:
            y = np.clip(y, -1.0 / (1.0 - self.gamma), 0.0)
        if clip_threshold is not None:
            y = np.clip(y, -clip_threshold, 0.0)
        return y

    def critic_gradients(self, batch, y: np.ndarray):
        """(loss, grads) of mean squared TD error against constant targets."""
        x = self._critic_input(batch.s, batch.a, batch.g)
        q, cache = self.critic._forward_cached(x)
        diff = q[:, 0] - y
        loss = float(np.mean(diff * diff))
        upstream = (2.0 / len(diff)) * diff[:, None]
        grads = self.critic.backward(x, upstream, cache=cache).param_grads
        return loss, grads

    def critic_update(
        self,
        batch,
        opt: AdamState,
        literal_bootstrap: bool = False,
        clip_return: bool = True,
        clip_threshold: float | None = None,
    ) -> float:
        """One Adam step on the mean squared TD error; returns the pre-step
        loss (targets treated as constants)."""
        y = self.td_targets(batch, literal_bootstrap, clip_return, clip_threshold)
        loss, grads = self.critic_gradients(batch, y)
        adam_step(self.critic.parameters(), grads, opt)
        return loss

    def actor_gradients(
        self,
        batch,
        lam: float = 0.0,
        action_l2: float = 0.0,
        use_pig: bool = False,
        use_gcsl: bool = False,
        pig_paths=None,
        pig_goals=None,
    ):
        """Gradients of the composite policy objective

            -mean Q(s, pi(s, g), g) + lam * aux + action_l2 * mean ||pi(s, g)||^2

        where aux is the distillation term on the stored original goals and
        paths (gradients flow only through the pi(s, g) branch) or, for the
        ablation variant, the relabeled behavioral-cloning term. The critic
        is frozen for this computation: only its action-input gradient is
        used. Returns (rl loss, aux loss or None, grads). With lam = 0 the
        aux term is neither computed nor applied, so the gradient is exactly
        the plain DDPG one.
        """
        b = len(batch.s)
        x_used = self._actor_input(batch.s, batch.g)
        a_pred, cache_a = self.actor._forward_cached(x_used)

        xq = self._critic_input(batch.s, a_pred, batch.g)
        q, cache_q = self.critic._forward_cached(xq)
        l_actor = float(-np.mean(q[:, 0]))

        up_q = np.full((b, 1), -1.0 / b)
        dxq = self.critic.input_gradient(xq, up_q, cache=cache_q)
        sd = batch.s.shape[1]
        ad = a_pred.shape[1]
        upstream = dxq[:, sd : sd + ad] / self.action_bound  # chain through a/bound
        if action_l2 > 0.0:
            upstream = upstream + action_l2 * (2.0 / b) * a_pred

        l_aux = None
        if use_gcsl and lam > 0.0:
            l_aux, up_bc = distill.gcsl_loss(
                self, batch.s, batch.a, batch.g, actions_pred=a_pred
            )
            upstream = upstream + lam * up_bc
        grads = self.actor.backward(x_used, upstream, cache=cache_a).param_grads

        if use_pig and lam > 0.0:
            paths = batch.paths if pig_paths is None else pig_paths
            goals = batch.g_orig if pig_goals is None else pig_goals
            x_orig = self._actor_input(batch.s, goals)
            a_orig, cache_o = self.actor._forward_cached(x_orig)
            l_aux, up_pig = distill.pig_loss(
                self, batch.s, paths, goals, target_actions=a_orig
            )
            pig_grads = self.actor.backward(x_orig, lam * up_pig, cache=cache_o).param_grads
            grads = [g1 + g2 for g1, g2 in zip(grads, pig_grads)]
        return l_actor, l_aux, grads

    def actor_update(
        self,
        batch,
        opt: AdamState,
        lam: float = 0.0,
        action_l2: float = 0.0,
        use_pig: bool = False,
        use_gcsl: bool = False,
        pig_paths=None,
        pig_goals=None,
    ) -> tuple[float, float | None]:
        """One Adam step on the composite policy objective; returns the
        pre-step (rl loss, aux loss or None)."""
        l_actor, l_aux, grads = self.actor_gradients(
            batch, lam, action_l2, use_pig, use_gcsl, pig_paths, pig_goals
        )
        adam_step(self.actor.parameters(), grads, opt)
        return l_actor, l_aux

    def update_targets(self, rho: float):
        polyak_update(self.actor_target, self.actor, rho)
        polyak_update(self.critic_target, self.critic, rho)

    def copy(self) -> "ActorCritic":
        return ActorCritic(
            self.actor.copy(),
            self.critic.copy(),
            self.actor_target.copy(),
            self.critic_target.copy(),
            self.action_bound,
            self.extent.copy(),
            self.normalize_inputs,
            self.gamma,
        )
