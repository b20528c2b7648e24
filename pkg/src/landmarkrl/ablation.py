"""Comparative experiment matrix: method variants x seeds.

Variants cover the study protocols: the full method, no-skipping,
no-distillation (lam = 0), the relabeled behavioral-cloning auxiliary,
random skipping, and a sweep over the balancing coefficient. Each run
trains independently; the report carries per-run rows plus per-variant
mean/std curves and steps-to-threshold summaries.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .plots import group_curves
from .training import read_metrics_csv, train


def variant_config(base: RunConfig, variant: str) -> RunConfig:
    cfg = dataclasses.replace(base)
    if variant == "pig":
        cfg.use_pig_loss = True
        cfg.use_gcsl_loss = False
        cfg.skipping = "on"
    elif variant == "noskip":
        cfg.use_pig_loss = True
        cfg.use_gcsl_loss = False
        cfg.skipping = "off"
    elif variant == "lam0":
        cfg.use_pig_loss = False
        cfg.use_gcsl_loss = False
        cfg.balancing_coefficient = 0.0
        cfg.skipping = "off"
    elif variant == "gcsl":
        cfg.use_pig_loss = False
        cfg.use_gcsl_loss = True
        cfg.skipping = "off"
    elif variant == "skiprandom":
        cfg.use_pig_loss = True
        cfg.use_gcsl_loss = False
        cfg.skipping = "random"
    elif variant.startswith("lam_"):
        cfg.use_pig_loss = True
        cfg.use_gcsl_loss = False
        cfg.skipping = "on"
        cfg.balancing_coefficient = float(variant[len("lam_"):])
    else:
        raise ValueError(f"unknown ablation variant {variant!r}")
    return cfg.validate()


DEFAULT_VARIANTS = ("pig", "noskip", "lam0", "gcsl", "skiprandom", "lam_0.1", "lam_10.0")


@dataclass
class RunRecord:
    variant: str
    seed: int
    out_dir: str
    final_success: float
    steps_to_08: float  # env step of first mean>=0.8 tick for THIS run; nan if never
    env_steps: int


@dataclass
class AblationReport:
    runs: list
    curves: dict  # variant -> (steps, mean, std) raw success curves
    steps_to_threshold: dict  # variant -> env step where the MEAN curve crosses 0.8 (nan if never)
    out_root: str


def steps_to_threshold(steps, values, threshold: float) -> float:
    for s, v in zip(steps, values):
        if np.isfinite(v) and v >= threshold:
            return float(s)
    return float("nan")


def _run_one(args):
    cfg_text, variant, seed, out_dir = args
    from .config import parse_config_text

    cfg = parse_config_text(cfg_text)
    cfg.seed = seed
    res = train(cfg, out_dir=out_dir)
    rows = res.metrics
    final = rows[-1].eval_success_rate if rows else float("nan")
    t08 = steps_to_threshold(
        [r.env_step for r in rows], [r.eval_success_rate for r in rows], 0.8
    )
    return RunRecord(
        variant=variant,
        seed=seed,
        out_dir=out_dir,
        final_success=final,
        steps_to_08=t08,
        env_steps=res.env_steps,
    )


def run_ablation_matrix(
    base: RunConfig,
    seeds,
    out_root: str,
    variants=DEFAULT_VARIANTS,
    parallel: int = 1,
    reuse_existing: bool = True,
) -> AblationReport:
    """Run (or reuse) every variant x seed and write a comparative report.

    A run directory with a complete metrics.csv and matching config.echo is
    reused instead of retrained, so the matrix can be resumed and shared
    with other experiment drivers.
    """
    base.validate()
    os.makedirs(out_root, exist_ok=True)
    jobs = []
    records: list[RunRecord] = []
    for variant in variants:
        for seed in seeds:
            cfg = variant_config(base, variant)
            cfg.seed = int(seed)
            out_dir = os.path.join(out_root, f"{variant}_s{seed}")
            done = reuse_existing and _finished(out_dir, cfg)
            if done:
                records.append(_record_from_dir(variant, int(seed), out_dir))
            else:
                jobs.append((cfg.to_text(), variant, int(seed), out_dir))
    if jobs:
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                records.extend(pool.map(_run_one, jobs))
        else:
            records.extend(_run_one(j) for j in jobs)

    curves = {}
    thresholds = {}
    by_variant: dict[str, list] = {}
    for rec in records:
        by_variant.setdefault(rec.variant, []).append(rec)
    for variant, recs in by_variant.items():
        rows_per_seed = [
            read_metrics_csv(os.path.join(r.out_dir, "metrics.csv")) for r in recs
        ]
        if any(len(rows) == 0 for rows in rows_per_seed):
            continue
        steps, mean, std = group_curves(rows_per_seed, "eval_success_rate", window=1)
        curves[variant] = (steps, mean, std)
        thresholds[variant] = steps_to_threshold(steps, mean, 0.8)

    report = AblationReport(
        runs=sorted(records, key=lambda r: (r.variant, r.seed)),
        curves=curves,
        steps_to_threshold=thresholds,
        out_root=out_root,
    )
    _write_report(report)
    return report


def _finished(out_dir: str, cfg: RunConfig) -> bool:
    """A run is reusable when its echoed config matches and a final
    checkpoint at/past the step budget exists."""
    echo = os.path.join(out_dir, "config.echo")
    metrics = os.path.join(out_dir, "metrics.csv")
    ckpt_dir = os.path.join(out_dir, "checkpoints")
    if not (os.path.exists(echo) and os.path.exists(metrics) and os.path.isdir(ckpt_dir)):
        return False
    with open(echo, "r", encoding="utf-8") as fh:
        if fh.read() != cfg.to_text():
            return False
    steps = [
        int(name.split("_", 1)[1])
        for name in os.listdir(ckpt_dir)
        if name.startswith("step_") and name.split("_", 1)[1].isdigit()
    ]
    return bool(steps) and max(steps) >= cfg.total_env_steps


def _record_from_dir(variant: str, seed: int, out_dir: str) -> RunRecord:
    rows = read_metrics_csv(os.path.join(out_dir, "metrics.csv"))
    return RunRecord(
        variant=variant,
        seed=seed,
        out_dir=out_dir,
        final_success=rows[-1].eval_success_rate if rows else float("nan"),
        steps_to_08=steps_to_threshold(
            [r.env_step for r in rows], [r.eval_success_rate for r in rows], 0.8
        ),
        env_steps=rows[-1].env_step if rows else 0,
    )


def _write_report(report: AblationReport):
    lines = ["variant,seed,final_success,steps_to_0.8,env_steps,out_dir"]
    for r in report.runs:
        lines.append(
            f"{r.variant},{r.seed},{r.final_success!r},{r.steps_to_08!r},{r.env_steps},{r.out_dir}"
        )
    with open(os.path.join(report.out_root, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

    for variant, (steps, mean, std) in report.curves.items():
        path = os.path.join(report.out_root, f"curve_{variant}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("env_step,success_mean,success_std\n")
            for s, m, d in zip(steps, mean, std):
                fh.write(f"{s!r},{m!r},{d!r}\n")

    txt = ["variant            mean final success    mean-curve steps to 0.8"]
    for variant, (steps, mean, std) in sorted(report.curves.items()):
        t = report.steps_to_threshold.get(variant, float("nan"))
        t_str = f"{t:.0f}" if np.isfinite(t) else "not reached"
        txt.append(f"{variant:<18s} {mean[-1]:.3f} +- {std[-1]:.3f}        {t_str}")
    with open(os.path.join(report.out_root, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(txt) + "\n")
