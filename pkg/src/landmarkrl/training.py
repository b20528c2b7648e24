"""Training orchestration: the full collect/plan/skip/distill loop,
the evaluation protocol, the k-NN state-entropy diagnostic, metrics
logging and checkpoints.

Determinism: each run owns a single seeded numpy Generator. Consumers draw
in a fixed order: network initialization once, then per episode:
environment reset -> graph pool/FPS draws when the rebuild cadence fires ->
per step: subgoal-skipping draws, exploration noise, batch sampling
(indices, relabel mask, future offsets) -> evaluation episodes at metric
ticks. Runs with identical configs produce bit-identical metrics apart
from the wall-clock column. The state-entropy subsample uses its own
generator derived from (seed, env_step) so the diagnostic never perturbs
the main stream.
"""

from __future__ import annotations

import math
import os
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import maze as maze_mod
from .agent import ActorCritic
from .config import ConfigError, RunConfig, parse_config_text
from .distill import LossTracker, SkipConfig, skip_subgoal, skip_subgoal_random
from .graph import EpisodePlanner, LandmarkGraph, NoPathError, build_graph
from .maze import goal_map
from .nets import (
    AdamState,
    adam_arrays,
    adam_from_checkpoint,
    adam_meta,
    checkpoint_bytes,
    load_checkpoint,
    mlp_arrays,
    mlp_from_checkpoint,
    mlp_meta,
    parse_checkpoint,
)
from .replay import ReplayBuffer, her_sample

METRICS_COLUMNS = [
    "env_step",
    "episode",
    "eval_success_rate",
    "eval_success_rate_no_planner",
    "l_critic",
    "l_actor",
    "l_pig_latest",
    "mean_jump_count",
    "state_entropy",
    "wall_clock_s",
]


@dataclass
class MetricsRow:
    env_step: int
    episode: int
    eval_success_rate: float
    eval_success_rate_no_planner: float
    l_critic: float
    l_actor: float
    l_pig_latest: float
    mean_jump_count: float
    state_entropy: float
    wall_clock_s: float

    def to_csv(self) -> str:
        vals = [
            str(self.env_step),
            str(self.episode),
            repr(float(self.eval_success_rate)),
            repr(float(self.eval_success_rate_no_planner)),
            repr(float(self.l_critic)),
            repr(float(self.l_actor)),
            repr(float(self.l_pig_latest)),
            repr(float(self.mean_jump_count)),
            repr(float(self.state_entropy)),
            repr(float(self.wall_clock_s)),
        ]
        return ",".join(vals)


def write_metrics_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for row in rows:
            fh.write(row.to_csv() + "\n")


def read_metrics_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != METRICS_COLUMNS:
            raise ValueError(f"unexpected metrics header in {path}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append(
                MetricsRow(
                    env_step=int(parts[0]),
                    episode=int(parts[1]),
                    eval_success_rate=float(parts[2]),
                    eval_success_rate_no_planner=float(parts[3]),
                    l_critic=float(parts[4]),
                    l_actor=float(parts[5]),
                    l_pig_latest=float(parts[6]),
                    mean_jump_count=float(parts[7]),
                    state_entropy=float(parts[8]),
                    wall_clock_s=float(parts[9]),
                )
            )
    return rows


# ---- k-NN state entropy ----------------------------------------------------


def knn_entropy(states, n_sample: int, k: int, rng=None) -> float:
    """Particle-based entropy estimate of a state set:

        (1/N) * sum_i log( (1/K) * sum_{j<=K} ||x_i - x_i^(j-NN)|| )

    with a 1e-12 floor inside the log. Subsamples n_sample states without
    replacement when more are supplied (rng required then).
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        states = states.reshape(len(states), -1)
    m = len(states)
    if n_sample < k + 1:
        raise ValueError("need n_sample >= k + 1")
    if m < n_sample:
        raise ValueError(f"too few states: {m} < {n_sample}")
    if m > n_sample:
        if rng is None:
            rng = np.random.default_rng(0)
        pick = rng.choice(m, size=n_sample, replace=False)
        states = states[pick]
    diff = states[:, None, :] - states[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    nearest = np.sort(dist, axis=1)[:, :k]
    mean_k = nearest.mean(axis=1)
    return float(np.mean(np.log(np.maximum(mean_k, 1e-12))))


# ---- checkpoints -------------------------------------------------------------


def agent_checkpoint_blob(
    agent: ActorCritic,
    cfg: RunConfig,
    opt_actor: AdamState | None = None,
    opt_critic: AdamState | None = None,
    buffer_counts: dict | None = None,
    graph: LandmarkGraph | None = None,
    tracker: LossTracker | None = None,
    env_step: int = 0,
) -> bytes:
    arrays = {}
    arrays.update(mlp_arrays("actor", agent.actor))
    arrays.update(mlp_arrays("critic", agent.critic))
    arrays.update(mlp_arrays("actor_target", agent.actor_target))
    arrays.update(mlp_arrays("critic_target", agent.critic_target))
    meta = {
        "kind": "landmarkrl-agent",
        "env_step": int(env_step),
        "actor": mlp_meta(agent.actor),
        "critic": mlp_meta(agent.critic),
        "action_bound": agent.action_bound,
        "extent": [float(v) for v in agent.extent],
        "normalize_inputs": agent.normalize_inputs,
        "gamma": agent.gamma,
        "config": cfg.to_text(),
        "buffer_counts": buffer_counts or {},
        "tracker_latest": repr(tracker.latest) if tracker is not None else None,
        "tracker_updates": tracker.update_count if tracker is not None else 0,
        "has_graph": graph is not None,
    }
    if opt_actor is not None:
        arrays.update(adam_arrays("opt_actor", opt_actor))
        meta["opt_actor"] = adam_meta(opt_actor)
    if opt_critic is not None:
        arrays.update(adam_arrays("opt_critic", opt_critic))
        meta["opt_critic"] = adam_meta(opt_critic)
    if graph is not None:
        arrays["graph.states"] = graph.states
        arrays["graph.goals"] = graph.goals
        arrays["graph.weights"] = graph.weights
        meta["graph_clip_threshold"] = graph.clip_threshold
    return checkpoint_bytes(arrays, meta)


@dataclass
class LoadedCheckpoint:
    agent: ActorCritic
    cfg: RunConfig
    meta: dict
    graph: LandmarkGraph | None
    tracker: LossTracker
    opt_actor: AdamState | None = None
    opt_critic: AdamState | None = None


def load_agent_checkpoint(path) -> LoadedCheckpoint:
    arrays, meta = load_checkpoint(path)
    return _loaded_from(arrays, meta)


def parse_agent_checkpoint(blob: bytes) -> LoadedCheckpoint:
    arrays, meta = parse_checkpoint(blob)
    return _loaded_from(arrays, meta)


def _loaded_from(arrays, meta) -> LoadedCheckpoint:
    if meta.get("kind") != "landmarkrl-agent":
        raise ValueError("not an agent checkpoint")
    cfg = parse_config_text(meta["config"])
    agent = ActorCritic(
        actor=mlp_from_checkpoint("actor", arrays, meta["actor"]),
        critic=mlp_from_checkpoint("critic", arrays, meta["critic"]),
        actor_target=mlp_from_checkpoint("actor_target", arrays, meta["actor"]),
        critic_target=mlp_from_checkpoint("critic_target", arrays, meta["critic"]),
        action_bound=float(meta["action_bound"]),
        extent=np.asarray(meta["extent"], dtype=float),
        normalize_inputs=bool(meta["normalize_inputs"]),
        gamma=float(meta["gamma"]),
    )
    graph = None
    if meta.get("has_graph"):
        graph = LandmarkGraph(
            states=arrays["graph.states"].copy(),
            goals=arrays["graph.goals"].copy(),
            weights=arrays["graph.weights"].copy(),
            clip_threshold=float(meta["graph_clip_threshold"]),
        )
    tracker = LossTracker(cfg.pig_tracker_smoothing)
    if meta.get("tracker_latest") is not None:
        tracker.latest = float(meta["tracker_latest"])
        tracker.update_count = int(meta.get("tracker_updates", 0))
    opt_actor = opt_critic = None
    if "opt_actor" in meta:
        opt_actor = adam_from_checkpoint("opt_actor", arrays, meta["opt_actor"], len(agent.actor.parameters()))
    if "opt_critic" in meta:
        opt_critic = adam_from_checkpoint("opt_critic", arrays, meta["opt_critic"], len(agent.critic.parameters()))
    return LoadedCheckpoint(
        agent=agent, cfg=cfg, meta=meta, graph=graph, tracker=tracker,
        opt_actor=opt_actor, opt_critic=opt_critic,
    )


# ---- environment resolution ---------------------------------------------------


def resolve_maze(cfg: RunConfig) -> maze_mod.MazeSpec:
    name = cfg.maze_name
    if os.path.exists(name):
        return maze_mod.load_maze_file(name)
    try:
        return maze_mod.preset(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def _direct_path(s, g):
    return np.stack([goal_map(s), np.asarray(g, dtype=float)])


def _pick_subgoal(path_nodes, cfg, skip_cfg, tracker, rng):
    """Subgoal choice per the configured execution mode; returns
    (subgoal, jumps). Consumes randomness only when a jump draw is live."""
    if cfg.skipping == "on":
        return skip_subgoal(path_nodes, skip_cfg, tracker, rng)
    if cfg.skipping == "random":
        return skip_subgoal_random(path_nodes, rng)
    return path_nodes[1].copy(), 0


# ---- evaluation ----------------------------------------------------------------


def run_eval_episodes(
    policy_fn,
    spec: maze_mod.MazeSpec,
    episodes: int,
    rng,
    horizon: int | None = None,
) -> float:
    """Greedy rollouts of an arbitrary policy callable (s, g) -> action.
    Success means reaching within delta before the horizon."""
    horizon = spec.horizon if horizon is None else horizon
    successes = 0
    for _ in range(episodes):
        s, g = maze_mod.reset(spec, rng)
        for _ in range(horizon):
            a = policy_fn(s, g)
            s = maze_mod.step(spec, s, a, rng if spec.noise_std > 0 else None)
            if maze_mod.reward(s, g, spec.delta) == 0.0:
                successes += 1
                break
    return successes / episodes


def _planner_policy(agent, graph, cfg, skip_cfg, tracker, rng):
    """Policy closure that replans from the current state every step."""
    planner_box = {}

    def policy(s, g):
        key = tuple(np.asarray(g, float))
        if planner_box.get("key") != key:
            planner_box["key"] = key
            planner_box["planner"] = EpisodePlanner(
                graph,
                agent,
                g,
                method=cfg.plan_method,
                soft_iterations=cfg.number_of_soft_value_iteration,
                soft_temperature=cfg.temperature,
            )
        try:
            path = planner_box["planner"].plan_from(s)
            nodes = path.nodes
        except NoPathError:
            nodes = _direct_path(s, g)
        l_star, _ = _pick_subgoal(nodes, cfg, skip_cfg, tracker, rng)
        return agent.act(s, l_star)

    return policy


def evaluate_agent(
    agent: ActorCritic,
    spec: maze_mod.MazeSpec,
    cfg: RunConfig,
    episodes: int,
    use_planner: bool,
    rng,
    graph: LandmarkGraph | None = None,
    buf=None,
    tracker: LossTracker | None = None,
) -> float:
    """Evaluation protocol: greedy episodes without exploration noise.
    With the planner, subgoals come from per-step replanning on a single
    graph (built from the buffer when not supplied); without it, the goal
    is fed to the policy directly."""
    tracker = tracker if tracker is not None else LossTracker()
    skip_cfg = SkipConfig(cfg.skipping_temperature)
    if use_planner:
        if graph is None and buf is not None and len(buf) > 0:
            graph = build_graph(
                agent,
                buf,
                cfg.number_of_nodes_in_a_graph,
                cfg.pool_size,
                cfg.clipping_threshold_for_distances,
                rng,
            )
        if graph is not None:
            policy = _planner_policy(agent, graph, cfg, skip_cfg, tracker, rng)
            return run_eval_episodes(policy, spec, episodes, rng)
    return run_eval_episodes(lambda s, g: agent.act(s, g), spec, episodes, rng)


def evaluate(checkpoint_path, episodes: int = 10, use_planner: bool = True, seed: int = 0, config: RunConfig | None = None) -> float:
    """Evaluate a saved checkpoint. The checkpoint is self-describing; a
    config may be supplied to cross-check compatibility."""
    loaded = load_agent_checkpoint(checkpoint_path)
    cfg = loaded.cfg
    if config is not None:
        for name in (
            "maze_name",
            "number_of_hidden_layers_for_actors",
            "number_of_hidden_layers_for_critics",
            "number_of_hidden_units_per_layer",
            "normalize_inputs",
            "gamma",
        ):
            if getattr(config, name) != getattr(cfg, name):
                raise ConfigError(
                    f"checkpoint/config mismatch on {name}: "
                    f"{getattr(cfg, name)!r} vs {getattr(config, name)!r}"
                )
        cfg = config
    spec = resolve_maze(cfg)
    rng = np.random.default_rng(seed)
    return evaluate_agent(
        loaded.agent,
        spec,
        cfg,
        episodes,
        use_planner and cfg.planner_at_test,
        rng,
        graph=loaded.graph,
        tracker=loaded.tracker,
    )


# ---- training -------------------------------------------------------------------


@dataclass
class TrainResult:
    cfg: RunConfig
    metrics: list
    agent: ActorCritic
    buf: object
    tracker: LossTracker
    graph: LandmarkGraph | None
    env_steps: int
    episodes: int
    out_dir: str | None = None
    checkpoint_files: list = field(default_factory=list)


def train(cfg: RunConfig, out_dir: str | None = None, log=None) -> TrainResult:
    """Run the full training loop:

    per episode: sample start/goal, rebuild the landmark graph on cadence,
    then per step: replan from the current state, pick the execution subgoal
    (skipping rule), act with exploration noise, store transition + planned
    path, and run one critic and one actor update on a relabeled batch.
    Target networks update on evenly spaced in-episode ticks. Every
    ``eval_every_episodes`` episodes a metrics row is appended.
    """
    cfg.validate()
    spec = resolve_maze(cfg)
    rng = np.random.default_rng(cfg.seed)
    t0 = time.perf_counter()

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
        with open(os.path.join(out_dir, "config.echo"), "w", encoding="utf-8") as fh:
            fh.write(cfg.to_text())

    agent = ActorCritic.create(
        rng,
        extent=spec.extent,
        action_bound=spec.max_step,
        actor_hidden_layers=cfg.number_of_hidden_layers_for_actors,
        critic_hidden_layers=cfg.number_of_hidden_layers_for_critics,
        hidden_units=cfg.number_of_hidden_units_per_layer,
        normalize_inputs=cfg.normalize_inputs,
        gamma=cfg.gamma,
        dtype=np.float32 if cfg.precision == "float32" else np.float64,
    )
    opt_actor = AdamState.for_params(agent.actor.parameters(), lr=cfg.actor_learning_rate)
    opt_critic = AdamState.for_params(agent.critic.parameters(), lr=cfg.critic_learning_rate)
    buf = ReplayBuffer(cfg.replay_buffer_size, spec.delta)

    tracker = LossTracker(cfg.pig_tracker_smoothing)
    skip_cfg = SkipConfig(cfg.skipping_temperature)
    lam = cfg.balancing_coefficient
    use_pig = cfg.use_pig_loss and not cfg.use_gcsl_loss
    clip_q = cfg.clipping_threshold_for_distances if cfg.clip_targets_to_edge_threshold else None

    graph = None
    episodes_since_rebuild = 0
    metrics: list[MetricsRow] = []
    env_steps = 0
    episode = 0
    # running sums for the metrics window
    win_lc, win_la, win_updates = 0.0, 0.0, 0
    win_jumps, win_skip_calls = 0, 0
    # trailing window of recently collected states for the entropy estimate
    recent_states = deque(maxlen=cfg.entropy_window)

    # target-update ticks, evenly spaced across the horizon
    k = cfg.target_update_frequency_per_episode
    ticks = sorted({int(math.ceil(spec.horizon * (i + 1) / k)) for i in range(k)})

    def emit_row():
        eval_rng = rng  # evaluation shares the run's single stream
        sr = evaluate_agent(
            agent, spec, cfg, cfg.eval_episodes, cfg.planner_at_test, eval_rng,
            graph=graph, buf=buf, tracker=tracker,
        )
        sr_np = (
            evaluate_agent(agent, spec, cfg, cfg.eval_episodes, False, eval_rng, tracker=tracker)
            if cfg.eval_no_planner
            else float("nan")
        )
        if len(recent_states) >= cfg.entropy_sample_size:
            ent_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, env_steps, 0xE27]))
            ent = knn_entropy(
                np.stack(tuple(recent_states)), cfg.entropy_sample_size, cfg.entropy_k, ent_rng
            )
        else:
            ent = float("nan")
        row = MetricsRow(
            env_step=env_steps,
            episode=episode,
            eval_success_rate=sr,
            eval_success_rate_no_planner=sr_np,
            l_critic=win_lc / win_updates if win_updates else float("nan"),
            l_actor=win_la / win_updates if win_updates else float("nan"),
            l_pig_latest=tracker.latest,
            mean_jump_count=win_jumps / win_skip_calls if win_skip_calls else 0.0,
            state_entropy=ent,
            wall_clock_s=time.perf_counter() - t0,
        )
        metrics.append(row)
        if out_dir:
            write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
        if log:
            log(
                f"step {row.env_step:>8d} ep {row.episode:>6d} "
                f"success {row.eval_success_rate:.2f} "
                f"(no-planner {row.eval_success_rate_no_planner:.2f}) "
                f"l_critic {row.l_critic:.4f} l_pig {row.l_pig_latest:.5f}"
            )
        return row

    def save_ckpt(tag=None):
        blob = agent_checkpoint_blob(
            agent,
            cfg,
            opt_actor,
            opt_critic,
            buffer_counts={
                "n_transitions": len(buf),
                "n_episodes": buf.n_episodes,
                "total_added": buf.total_added,
            },
            graph=graph,
            tracker=tracker,
            env_step=env_steps,
        )
        if out_dir:
            name = f"step_{env_steps}" if tag is None else tag
            path = os.path.join(out_dir, "checkpoints", name)
            with open(path, "wb") as fh:
                fh.write(blob)
            if path not in result_ckpts:
                result_ckpts.append(path)
        return blob

    result_ckpts: list[str] = []
    next_ckpt_at = cfg.checkpoint_every_steps if cfg.checkpoint_every_steps else None

    while env_steps < cfg.total_env_steps:
        s, g = maze_mod.reset(spec, rng)
        warmup = env_steps < cfg.initial_random_steps
        if not warmup and len(buf) > 0:
            if graph is None or episodes_since_rebuild >= cfg.graph_rebuild_every_episodes:
                graph = build_graph(
                    agent,
                    buf,
                    cfg.number_of_nodes_in_a_graph,
                    cfg.pool_size,
                    cfg.clipping_threshold_for_distances,
                    rng,
                )
                episodes_since_rebuild = 0
            planner = EpisodePlanner(
                graph,
                agent,
                g,
                method=cfg.plan_method,
                soft_iterations=cfg.number_of_soft_value_iteration,
                soft_temperature=cfg.temperature,
            )
        else:
            planner = None

        ep_states = [np.asarray(s, dtype=float)]
        ep_actions, ep_rewards, ep_paths = [], [], []
        updates_active = not warmup and len(buf) >= cfg.batch_size
        done_ticks = 0

        for t in range(spec.horizon):
            if planner is not None:
                try:
                    nodes = planner.plan_from(s).nodes
                except NoPathError:
                    nodes = _direct_path(s, g)
            else:
                nodes = _direct_path(s, g)

            if warmup:
                l_star = np.asarray(g, dtype=float)
                a = rng.uniform(-spec.max_step, spec.max_step, size=2)
            else:
                l_star, jumps = _pick_subgoal(nodes, cfg, skip_cfg, tracker, rng)
                win_jumps += jumps
                win_skip_calls += 1
                a = agent.select_action(s, l_star, cfg.action_noise, rng)

            s_next = maze_mod.step(spec, s, a, rng if spec.noise_std > 0 else None)
            r = maze_mod.reward(s_next, g, spec.delta)
            ep_actions.append(np.asarray(a, dtype=float))
            ep_rewards.append(r)
            ep_paths.append(nodes)
            ep_states.append(s_next)
            recent_states.append(s_next)
            env_steps += 1

            if updates_active:
                for _ in range(cfg.ratio_between_env_vs_optimization_steps):
                    batch = her_sample(
                        buf,
                        cfg.batch_size,
                        cfg.hindsight_relabelling_ratio,
                        cfg.hindsight_relabelling_range,
                        rng,
                    )
                    if cfg.replan_relabeled_paths and planner is not None:
                        pig_paths, pig_goals = _replanned_paths(batch, planner, graph, agent, cfg)
                    else:
                        pig_paths = pig_goals = None
                    l_c = agent.critic_update(
                        batch,
                        opt_critic,
                        literal_bootstrap=cfg.literal_bootstrap,
                        clip_return=cfg.clip_return,
                        clip_threshold=clip_q,
                    )
                    l_a, l_aux = agent.actor_update(
                        batch,
                        opt_actor,
                        lam=lam,
                        action_l2=cfg.action_l2,
                        use_pig=use_pig,
                        use_gcsl=cfg.use_gcsl_loss,
                        pig_paths=pig_paths,
                        pig_goals=pig_goals,
                    )
                    win_lc += l_c
                    win_la += l_a
                    win_updates += 1
                    if l_aux is not None:
                        tracker.update(l_aux)
                while done_ticks < len(ticks) and t + 1 >= ticks[done_ticks]:
                    agent.update_targets(cfg.polyak_for_target_network)
                    done_ticks += 1

            s = s_next
            if r == 0.0:
                break

        if updates_active:
            while done_ticks < len(ticks):  # flush remaining ticks on early success
                agent.update_targets(cfg.polyak_for_target_network)
                done_ticks += 1

        buf.add_episode(ep_states, ep_actions, ep_rewards, g, ep_paths, episode_id=episode)
        episodes_since_rebuild += 1
        episode += 1

        if episode % cfg.eval_every_episodes == 0:
            emit_row()
            win_lc, win_la, win_updates = 0.0, 0.0, 0
            win_jumps, win_skip_calls = 0, 0

        if next_ckpt_at is not None and env_steps >= next_ckpt_at:
            save_ckpt()
            next_ckpt_at += cfg.checkpoint_every_steps

    save_ckpt()
    if out_dir:
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), metrics)
        if metrics:
            from .plots import emit_plots  # deferred: pulls in matplotlib

            emit_plots({cfg.maze_name: [metrics]}, os.path.join(out_dir, "plots"))
    return TrainResult(
        cfg=cfg,
        metrics=metrics,
        agent=agent,
        buf=buf,
        tracker=tracker,
        graph=graph,
        env_steps=env_steps,
        episodes=episode,
        out_dir=out_dir,
        checkpoint_files=result_ckpts,
    )


def _replanned_paths(batch, planner, graph, agent, cfg):
    """Optional re-planning of distillation paths for relabeled goals at
    training time (config flag, off by default): hindsight goals get fresh
    paths on the current graph; original-goal samples keep stored paths."""
    paths = []
    for i in range(len(batch.s)):
        if not batch.relabeled[i]:
            paths.append(batch.paths[i])
            continue
        per_goal = EpisodePlanner(
            graph,
            agent,
            batch.g[i],
            method=cfg.plan_method,
            soft_iterations=cfg.number_of_soft_value_iteration,
            soft_temperature=cfg.temperature,
        )
        try:
            paths.append(per_goal.plan_from(batch.s[i]).nodes)
        except NoPathError:
            paths.append(_direct_path(batch.s[i], batch.g[i]))
    return paths, batch.g.copy()
