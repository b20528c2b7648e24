"""Acceptance suite. One test per criterion; each prints a PASS/FAIL line.

Criteria 1-4 and 10 are self-contained and fast. Criteria 5-9 verify the
training-run artifacts under acceptance_runs/ (metrics logs, config echoes
and final-checkpoint evaluations); regenerate them with

    python scripts/run_acceptance.py

which is idempotent and resumable (hours of compute on a small CPU box).
The expected run configurations are pinned here and cross-checked against
every run's config echo, so stale or foreign artifacts fail loudly.
"""

import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from landmarkrl import distill, graph as G, maze, nets, training
from landmarkrl.ablation import steps_to_threshold, variant_config
from landmarkrl.agent import ActorCritic
from landmarkrl.config import RunConfig
from landmarkrl.plots import group_curves
from helpers import (
    assert_close_rel,
    brute_force_min_cost,
    finite_diff_param_grads,
    random_planning_problem,
)
from conftest import rows_equal_except_wallclock

RUNS_ROOT = Path(__file__).resolve().parent.parent / "acceptance_runs"

# ---- pinned configurations of the run artifacts (must match the runner) ----

DEFAULT64_STEPS = 30_000
FAMILY32_STEPS = 20_000


def default64_cfg(seed: int) -> RunConfig:
    return RunConfig(seed=seed, total_env_steps=DEFAULT64_STEPS,
                     checkpoint_every_steps=10_000).validate()


def family32_cfg(variant: str, seed: int) -> RunConfig:
    base = RunConfig(
        total_env_steps=FAMILY32_STEPS,
        eval_every_episodes=10,
        precision="float32",
    )
    cfg = variant_config(base, variant)
    cfg.seed = seed
    return cfg.validate()


def report(num, name, ok, detail=""):
    print(f"\nACCEPTANCE CRITERION {num} ({name}): {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def load_runs(family: str, variant: str, seeds, cfg_fn):
    """Metrics rows per seed, verifying each run's echoed config exactly."""
    rows_per_seed = []
    for seed in seeds:
        run_dir = RUNS_ROOT / family / f"{variant}_s{seed}"
        echo = run_dir / "config.echo"
        metrics = run_dir / "metrics.csv"
        if not echo.exists() or not metrics.exists():
            pytest.fail(
                f"missing acceptance artifact {run_dir}; run scripts/run_acceptance.py"
            )
        expected = cfg_fn(seed).to_text()
        got = echo.read_text()
        assert got == expected, f"config drift in {run_dir}"
        rows = training.read_metrics_csv(metrics)
        assert rows, f"empty metrics in {run_dir}"
        budget = cfg_fn(seed).total_env_steps
        assert rows[-1].env_step >= budget - 60, (
            f"{run_dir} incomplete: reached {rows[-1].env_step} of {budget}"
        )
        rows_per_seed.append(rows)
    return rows_per_seed


def load_final_eval(family: str, variant: str, seed: int) -> dict:
    path = RUNS_ROOT / family / f"{variant}_s{seed}" / "final_eval.json"
    if not path.exists():
        pytest.fail(f"missing {path}; run scripts/run_acceptance.py")
    return json.loads(path.read_text())


# =====================================================================
# Criterion 1: gradient correctness across all loss compositions
# =====================================================================


def test_criterion_1_gradient_correctness():
    rng = np.random.default_rng(10_001)
    checked_nets = 0
    worst = 0.0
    for trial in range(50):
        hidden = int(rng.integers(4, 10))
        layers = int(rng.integers(1, 3))
        ac = ActorCritic.create(
            rng, extent=(15.0, 15.0),
            actor_hidden_layers=layers, critic_hidden_layers=layers,
            hidden_units=hidden,
        )
        # keep pre-activations away from the ReLU kink, where the central
        # finite-difference oracle is undefined (zero-init biases can land
        # a whole layer exactly on it)
        for net in (ac.actor, ac.critic):
            for bias in net.biases:
                bias += rng.uniform(0.05, 0.15, size=bias.shape)
        b = int(rng.integers(2, 5))
        s = rng.uniform(1, 14, (b, 2))
        a = rng.uniform(-1, 1, (b, 2))
        s_next = np.clip(s + a, 0.5, 14.5)
        g_orig = rng.uniform(1, 14, (b, 2))
        g = g_orig.copy()
        r = np.where(np.linalg.norm(s_next - g, axis=1) <= 0.5, 0.0, -1.0)
        paths = []
        for i in range(b):
            mid = rng.uniform(1, 14, (int(rng.integers(0, 3)), 2))
            paths.append(np.vstack([s[i][None, :], mid, g_orig[i][None, :]]))
        from landmarkrl.replay import RelabeledBatch

        batch = RelabeledBatch(
            s=s, a=a, r=r, s_next=s_next, g=g,
            relabeled=np.zeros(b, dtype=bool), g_orig=g_orig, paths=paths,
        )
        family = trial % 5
        if family == 0:  # critic TD regression
            y = ac.td_targets(batch)
            _, grads = ac.critic_gradients(batch, y)
            x = ac._critic_input(batch.s, batch.a, batch.g)

            def objective():
                q = ac.critic.forward(x)[:, 0]
                return float(np.mean((q - y) ** 2))

            numeric = finite_diff_param_grads(objective, ac.critic)
            net = ac.critic
        else:
            lam = float(rng.uniform(0.2, 2.0))
            al2 = float(rng.uniform(0.0, 1.0)) if family in (2, 4) else 0.0
            use_pig = family in (1, 2)
            use_gcsl = family == 3
            _, _, grads = ac.actor_gradients(
                batch, lam=lam, action_l2=al2, use_pig=use_pig, use_gcsl=use_gcsl
            )
            frozen = [
                ac.actions(np.repeat(s[i][None, :], len(p) - 1, axis=0), p[1:])
                for i, p in enumerate(paths)
            ]

            def objective():
                acts = ac.actions(s, g)
                q = ac.q_values(s, acts, g)
                total = -float(np.mean(q)) + al2 * float(np.mean(np.sum(acts * acts, axis=1)))
                if use_pig:
                    a_orig = ac.actions(s, g_orig)
                    pig = sum(
                        float(np.mean(np.sum((a_orig[i] - c) ** 2, axis=1)))
                        for i, c in enumerate(frozen)
                    ) / b
                    total += lam * pig
                if use_gcsl:
                    total += lam * float(np.mean(np.sum((acts - a) ** 2, axis=1)))
                return total

            numeric = finite_diff_param_grads(objective, ac.actor)
            net = ac.actor
        for an, nu in zip(grads, numeric):
            denom = np.maximum(1.0, np.maximum(np.abs(an), np.abs(nu)))
            worst = max(worst, float((np.abs(an - nu) / denom).max()))
            assert_close_rel(an, nu, rel=1e-4, context=f"trial {trial}")
        checked_nets += 2  # fresh actor and critic per trial
    report(1, "gradient correctness", checked_nets >= 50,
           f"({checked_nets} nets, max rel err {worst:.2e})")


# =====================================================================
# Criterion 2: planner oracle equivalence
# =====================================================================


def test_criterion_2_planner_oracle_equivalence():
    rng = np.random.default_rng(20_002)
    s, target = np.array([100.0, 0.0]), np.array([200.0, 0.0])
    n_graphs = 0
    reachable = 0
    while n_graphs < 220:
        n = int(rng.integers(2, 9))
        g, fn, full = random_planning_problem(rng, n)
        n_graphs += 1
        want = brute_force_min_cost(full, n, n + 1)
        if np.isinf(want):
            with pytest.raises(G.NoPathError):
                G.plan(g, fn, s, target)
            continue
        reachable += 1
        exact = G.plan(g, fn, s, target, method="dijkstra")
        assert exact.total_cost == want, "dijkstra != brute force"
        cold = G.plan(g, fn, s, target, method="soft_vi", soft_temperature=1e-3)
        assert abs(cold.total_cost - exact.total_cost) <= 1e-6
        warm = G.plan(g, fn, s, target, method="soft_vi",
                      soft_iterations=20, soft_temperature=0.9)
        assert np.isfinite(warm.total_cost)
        np.testing.assert_array_equal(warm.nodes[0], s)
        np.testing.assert_array_equal(warm.nodes[-1], target)
    report(2, "planner oracle equivalence", reachable >= 100,
           f"({n_graphs} digraphs, {reachable} reachable)")


# =====================================================================
# Criterion 3: baseline reduction (lam=0, alpha=0 == module disabled)
# =====================================================================


def reduction_cfg(**overrides):
    base = dict(
        maze_name="u15",
        seed=3,
        total_env_steps=5_200,
        initial_random_steps=500,
        number_of_hidden_units_per_layer=32,
        number_of_hidden_layers_for_actors=2,
        number_of_hidden_layers_for_critics=2,
        batch_size=64,
        number_of_nodes_in_a_graph=50,
        pool_size=300,
        eval_every_episodes=20,
        hindsight_relabelling_range=50,
    )
    base.update(overrides)
    return RunConfig(**base).validate()


def test_criterion_3_baseline_reduction():
    cfg_on = reduction_cfg(balancing_coefficient=0.0, skipping_temperature=0.0,
                           use_pig_loss=True, skipping="on")
    cfg_off = reduction_cfg(balancing_coefficient=0.0, skipping_temperature=0.0,
                            use_pig_loss=False, skipping="off")
    r_on = training.train(cfg_on)
    r_off = training.train(cfg_off)
    same_rows = rows_equal_except_wallclock(r_on.metrics, r_off.metrics)
    same_params = all(
        np.array_equal(p1, p2)
        for p1, p2 in zip(r_on.agent.actor.parameters(), r_off.agent.actor.parameters())
    ) and all(
        np.array_equal(p1, p2)
        for p1, p2 in zip(r_on.agent.critic.parameters(), r_off.agent.critic.parameters())
    )
    report(3, "baseline reduction", same_rows and same_params,
           f"({r_on.env_steps} env steps, {len(r_on.metrics)} metric rows, "
           f"wall-clock column excluded)")


# =====================================================================
# Criterion 4: subgoal-skipping law
# =====================================================================


def test_criterion_4_skipping_law():
    path = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    tracker = distill.LossTracker(smoothing=0.0)
    tracker.update(2.0)  # alpha/loss = 0.5
    rng = np.random.default_rng(40_004)
    counts = np.zeros(3)
    n = 100_000
    for _ in range(n):
        _, jumps = distill.skip_subgoal(path, distill.SkipConfig(1.0), tracker, rng)
        counts[jumps] += 1
    freq = counts / n
    geo_ok = np.all(np.abs(freq - [0.5, 0.25, 0.25]) <= 0.01)

    alpha0 = distill.SkipConfig(0.0)
    always_l2 = all(
        np.array_equal(distill.skip_subgoal(path, alpha0, tracker, rng)[0], [1.0, 0.0])
        for _ in range(1000)
    )
    small_loss = distill.LossTracker(smoothing=0.0)
    small_loss.update(0.25)  # below alpha -> certain jumps
    always_goal = all(
        np.array_equal(
            distill.skip_subgoal(path, distill.SkipConfig(1.0), small_loss, rng)[0],
            [3.0, 0.0],
        )
        for _ in range(1000)
    )
    report(4, "skipping law", geo_ok and always_l2 and always_goal,
           f"(freq {np.round(freq, 4).tolist()} vs [0.5, 0.25, 0.25])")


# =====================================================================
# Criterion 5: stock configuration reaches 0.9 mean success in budget
# =====================================================================


def test_criterion_5_end_to_end_success():
    rows = load_runs("default64", "pig", range(4), default64_cfg)
    steps, mean, _ = group_curves(rows, "eval_success_rate", window=1)
    best = float(np.nanmax(mean))
    cross = steps_to_threshold(steps, mean, 0.9)
    ok = best >= 0.9 and np.isfinite(cross) and cross <= 500_000
    report(5, "end-to-end success", ok,
           f"(4 seeds, peak mean success {best:.3f}, 0.9 first reached at "
           f"step {cross:.0f} <= 500k)")


# =====================================================================
# Criterion 6: ablation ordering on steps to 0.8 mean success
# =====================================================================


def mean_curve(variant):
    rows = load_runs("family32", variant, range(4), lambda s: family32_cfg(variant, s))
    return group_curves(rows, "eval_success_rate", window=1)


def test_criterion_6_ablation_ordering():
    t = {}
    budget = {}
    for variant in ("pig", "noskip", "lam0", "gcsl"):
        steps, mean, _ = mean_curve(variant)
        t[variant] = steps_to_threshold(steps, mean, 0.8)
        budget[variant] = float(steps[-1])

    def ok_margin(fast, slow):
        # censored comparisons: a variant that never crossed is counted at
        # its full budget (true crossing can only be later)
        t_fast = t[fast]
        t_slow = t[slow] if np.isfinite(t[slow]) else budget[slow]
        return np.isfinite(t_fast) and t_fast <= 0.95 * t_slow

    skip_helps = ok_margin("pig", "noskip")
    pig_helps = ok_margin("noskip", "lam0")
    t_gcsl = t["gcsl"] if np.isfinite(t["gcsl"]) else float("inf")
    gcsl_not_better = t_gcsl >= t["pig"]
    detail = (
        f"(steps to 0.8 mean: pig={t['pig']:.0f}, noskip={t['noskip']:.0f}, "
        f"lam0={'never<=%d' % budget['lam0'] if not np.isfinite(t['lam0']) else '%.0f' % t['lam0']}, "
        f"gcsl={'never<=%d' % budget['gcsl'] if not np.isfinite(t_gcsl) else '%.0f' % t_gcsl})"
    )
    report(6, "ablation ordering", skip_helps and pig_helps and gcsl_not_better, detail)


# =====================================================================
# Criterion 7: planner-free transfer of the distilled policy
# =====================================================================


def test_criterion_7_planner_free_transfer():
    pig = [load_final_eval("family32", "pig", s)["success_no_planner"] for s in range(4)]
    lam0 = [load_final_eval("family32", "lam0", s)["success_no_planner"] for s in range(4)]
    gap = float(np.mean(pig) - np.mean(lam0))
    report(7, "planner-free transfer", gap >= 0.2,
           f"(no-planner success: distilled {np.mean(pig):.3f} vs lam0 "
           f"{np.mean(lam0):.3f}, gap {gap:.3f} >= 0.2)")


# =====================================================================
# Criterion 8: balancing-coefficient sensitivity
# =====================================================================


def test_criterion_8_lambda_sensitivity():
    finals = {}
    for variant in ("pig", "lam0", "lam_100.0"):
        rows = load_runs(
            "family32", variant, range(2), lambda s, v=variant: family32_cfg(v, s)
        )
        _, mean, _ = group_curves(rows, "eval_success_rate", window=1)
        finals[variant] = float(mean[-1])
    ok = finals["pig"] >= finals["lam0"] and finals["pig"] >= finals["lam_100.0"]
    report(8, "lambda sensitivity", ok,
           f"(final mean success: default {finals['pig']:.3f}, "
           f"0x {finals['lam0']:.3f}, 100x {finals['lam_100.0']:.3f})")


# =====================================================================
# Criterion 9: skipping raises collected-state entropy
# =====================================================================


def test_criterion_9_state_entropy():
    warmup = family32_cfg("pig", 0).initial_random_steps
    curves = {}
    for variant in ("pig", "noskip"):
        rows = load_runs(
            "family32", variant, range(2), lambda s, v=variant: family32_cfg(v, s)
        )
        steps, mean, _ = group_curves(rows, "state_entropy", window=1)
        curves[variant] = (steps, mean)
    n = min(len(curves["pig"][0]), len(curves["noskip"][0]))
    wins = total = 0
    for i in range(n):
        step = curves["pig"][0][i]
        h_on = curves["pig"][1][i]
        h_off = curves["noskip"][1][i]
        if step <= warmup or not (np.isfinite(h_on) and np.isfinite(h_off)):
            continue
        total += 1
        if h_on >= h_off:
            wins += 1
    frac = wins / total if total else 0.0
    report(9, "state-entropy diagnostic", total >= 10 and frac >= 0.7,
           f"(skipping-on entropy >= off at {wins}/{total} post-warmup ticks, "
           f"{frac:.2f} >= 0.70)")


# =====================================================================
# Criterion 10: serialization round trip
# =====================================================================


def test_criterion_10_serialization(tmp_path):
    cfg = reduction_cfg(
        maze_name="open5", total_env_steps=2_500, seed=11,
        initial_random_steps=200, number_of_nodes_in_a_graph=10,
        pool_size=100, hindsight_relabelling_range=20,
    )
    res = training.train(cfg)
    blob1 = training.agent_checkpoint_blob(
        res.agent, res.cfg,
        buffer_counts={"n_transitions": len(res.buf), "n_episodes": res.buf.n_episodes},
        graph=res.graph, tracker=res.tracker, env_step=res.env_steps,
    )
    path = tmp_path / "ckpt"
    path.write_bytes(blob1)
    loaded = training.load_agent_checkpoint(path)
    blob2 = training.agent_checkpoint_blob(
        loaded.agent, loaded.cfg,
        buffer_counts=loaded.meta["buffer_counts"],
        graph=loaded.graph, tracker=loaded.tracker,
        env_step=loaded.meta["env_step"],
    )
    byte_identical = blob1 == blob2

    spec = maze.preset(cfg.maze_name)
    pre = training.evaluate_agent(
        res.agent, spec, res.cfg, 20, True, np.random.default_rng(77),
        graph=res.graph, tracker=res.tracker,
    )
    post = training.evaluate(path, episodes=20, use_planner=True, seed=77)
    pre_np = training.evaluate_agent(
        res.agent, spec, res.cfg, 20, False, np.random.default_rng(78),
        tracker=res.tracker,
    )
    post_np = training.evaluate(path, episodes=20, use_planner=False, seed=78)
    report(10, "serialization", byte_identical and pre == post and pre_np == post_np,
           f"(round trip byte-identical; eval {pre:.2f}=={post:.2f} with planner, "
           f"{pre_np:.2f}=={post_np:.2f} without)")
