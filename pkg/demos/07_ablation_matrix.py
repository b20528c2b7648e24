#!/usr/bin/env python3
"""The comparative experiment matrix at toy scale.

Runs the full method against the no-distillation baseline on the small
open room, two seeds each, then prints the report the runner writes.
Swap in maze_name="u15" and stock sizes to reproduce the real study.
"""

import os
import tempfile

from landmarkrl.ablation import run_ablation_matrix
from landmarkrl.config import RunConfig

base = RunConfig(
    maze_name="open5",
    total_env_steps=2000,
    initial_random_steps=200,
    number_of_hidden_units_per_layer=32,
    number_of_hidden_layers_for_actors=2,
    number_of_hidden_layers_for_critics=2,
    batch_size=64,
    number_of_nodes_in_a_graph=10,
    pool_size=100,
    eval_every_episodes=20,
    hindsight_relabelling_range=20,
)

out = tempfile.mkdtemp(prefix="landmarkrl_matrix_")
report = run_ablation_matrix(base, seeds=[0, 1], out_root=out, variants=("pig", "lam0"))

print(f"\n{len(report.runs)} runs (variants x seeds) under {out}\n")
for rec in report.runs:
    print(f"  {rec.variant:<6s} seed {rec.seed}: final success {rec.final_success:.2f}, "
          f"steps to 0.8 {rec.steps_to_08}")

print("\nmean-curve steps to 0.8 success:")
for variant, t in sorted(report.steps_to_threshold.items()):
    print(f"  {variant}: {t}")

print(f"\nreport files: {os.path.join(out, 'report.csv')}, report.txt, curve_*.csv")
