"""Goal-conditioned RL on 2D point mazes with landmark-graph subgoal
planning, planner-to-policy distillation, and stochastic subgoal skipping.

The package is a plain numpy library; see the demos/ directory of the
repository for narrative walkthroughs of each capability and ``cli.py``
for the train/eval/ablate/plot entry points.
"""

from . import distill, graph, maze, nets, replay
from .agent import ActorCritic
from .config import ConfigError, RunConfig, load_config, parse_config_text
from .maze import MazeSpec, preset

__all__ = [
    "ActorCritic",
    "ConfigError",
    "MazeSpec",
    "RunConfig",
    "distill",
    "graph",
    "load_config",
    "maze",
    "nets",
    "parse_config_text",
    "preset",
    "replay",
]

__version__ = "0.1.0"
