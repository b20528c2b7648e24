#!/usr/bin/env python3
"""End-to-end: train a small agent, evaluate with and without the planner,
and render learning curves. Runs in under a minute on a laptop (small
networks, small maze); the stock 15x15 configuration just takes longer.
"""

import os
import tempfile

import numpy as np

from landmarkrl import training
from landmarkrl.config import RunConfig
from landmarkrl.plots import emit_plots

cfg = RunConfig(
    maze_name="open5",
    seed=0,
    total_env_steps=2500,
    initial_random_steps=200,
    number_of_hidden_units_per_layer=32,
    number_of_hidden_layers_for_actors=2,
    number_of_hidden_layers_for_critics=2,
    batch_size=64,
    number_of_nodes_in_a_graph=10,
    pool_size=100,
    eval_every_episodes=25,
    hindsight_relabelling_range=20,
)

out = os.path.join(tempfile.mkdtemp(prefix="landmarkrl_demo_"), "run")
print(f"training into {out} ...")
res = training.train(cfg, out_dir=out, log=print)

ckpt = res.checkpoint_files[-1]
with_planner = training.evaluate(ckpt, episodes=50, use_planner=True, seed=123)
without = training.evaluate(ckpt, episodes=50, use_planner=False, seed=123)
print(f"\nfinal checkpoint: {ckpt}")
print(f"success over 50 greedy episodes: {with_planner:.2f} with planner, "
      f"{without:.2f} feeding the goal directly")

charts = emit_plots({"open5": [res.metrics]}, os.path.join(out, "plots"))
print(f"\nwrote {len(charts)} SVG charts:")
for c in charts:
    print(f"  {c}")
print("\nthe same things are available from the command line:")
print("  landmarkrl train --config my.cfg --out runs/demo")
print("  landmarkrl eval --checkpoint runs/demo/checkpoints/step_2500 --no-planner")
print("  landmarkrl plot --logs 'runs/*/metrics.csv' --out charts/")
