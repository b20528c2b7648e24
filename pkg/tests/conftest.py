import numpy as np
import pytest

from landmarkrl.config import RunConfig
from landmarkrl import training


def small_cfg(**overrides) -> RunConfig:
    """Desk-scale config for integration tests: tiny nets, tiny maze."""
    base = dict(
        maze_name="open5",
        seed=0,
        total_env_steps=1500,
        initial_random_steps=200,
        number_of_hidden_units_per_layer=32,
        number_of_hidden_layers_for_actors=2,
        number_of_hidden_layers_for_critics=2,
        batch_size=64,
        number_of_nodes_in_a_graph=10,
        pool_size=100,
        eval_every_episodes=10,
        hindsight_relabelling_range=20,
        entropy_sample_size=64,
        entropy_k=5,
    )
    base.update(overrides)
    return RunConfig(**base).validate()


@pytest.fixture(scope="session")
def trained_small():
    """One shared small training run for tests that need a trained agent."""
    return training.train(small_cfg(total_env_steps=2500))


def rows_equal_except_wallclock(rows_a, rows_b):
    if len(rows_a) != len(rows_b):
        return False
    for a, b in zip(rows_a, rows_b):
        for f in (
            "env_step",
            "episode",
            "eval_success_rate",
            "eval_success_rate_no_planner",
            "l_critic",
            "l_actor",
            "l_pig_latest",
            "mean_jump_count",
            "state_entropy",
        ):
            va, vb = getattr(a, f), getattr(b, f)
            if va != vb and not (np.isnan(va) and np.isnan(vb)):
                return False
    return True
