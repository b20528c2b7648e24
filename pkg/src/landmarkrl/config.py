"""Run configuration: every training hyperparameter plus method switches.

The on-disk format is a flat ``key=value`` text file whose keys equal the
dataclass field names; unknown keys are rejected. Defaults reproduce the
2D-maze column of the hyperparameter tables this project ships with.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid configuration value or file."""


@dataclass
class RunConfig:
    # optimizer / networks
    optimizer: str = "adam"
    actor_learning_rate: float = 2e-4
    critic_learning_rate: float = 2e-4
    replay_buffer_size: int = 1_000_000
    number_of_hidden_layers_for_actors: int = 4
    number_of_hidden_layers_for_critics: int = 5
    number_of_hidden_units_per_layer: int = 400
    batch_size: int = 200
    nonlinearity: str = "relu"
    polyak_for_target_network: float = 0.99
    target_update_frequency_per_episode: int = 3
    ratio_between_env_vs_optimization_steps: int = 1
    gamma: float = 0.99
    hindsight_relabelling_ratio: float = 0.8
    # graph / planner
    number_of_soft_value_iteration: int = 20
    temperature: float = 0.9
    number_of_nodes_in_a_graph: int = 100
    clipping_threshold_for_distances: float = 4.0
    pool_size: int = 1000
    plan_method: str = "dijkstra"  # or "soft_vi"
    graph_rebuild_every_episodes: int = 1
    # distillation / skipping
    balancing_coefficient: float = 1.0  # weight of the distillation loss
    skipping_temperature: float = 1.0  # 0 disables skipping outright
    pig_tracker_smoothing: float = 0.95  # 0 = use the raw latest loss
    replan_relabeled_paths: bool = False
    # exploration / relabeling
    initial_random_steps: int = 2500
    hindsight_relabelling_range: int = 50
    action_l2: float = 0.5
    action_noise: float = 0.2
    # TD-target handling
    literal_bootstrap: bool = False  # online nets in the TD target
    clip_return: bool = True  # clip targets to [-1/(1-gamma), 0]
    clip_targets_to_edge_threshold: bool = False
    # featurization / numeric precision of the networks
    normalize_inputs: bool = True
    precision: str = "float64"  # or "float32" for long runs on slow machines
    # run / method switches
    maze_name: str = "u15"
    seed: int = 0
    total_env_steps: int = 500_000
    eval_every_episodes: int = 50
    eval_episodes: int = 10
    eval_no_planner: bool = True
    use_pig_loss: bool = True
    use_gcsl_loss: bool = False
    skipping: str = "on"  # on | off | random
    planner_at_test: bool = True
    entropy_sample_size: int = 128
    entropy_k: int = 10
    entropy_window: int = 2000  # trailing collected-state window fed to the estimator
    checkpoint_every_steps: int = 0  # 0 = final checkpoint only

    def validate(self) -> "RunConfig":
        if self.optimizer != "adam":
            raise ConfigError("optimizer must be 'adam'")
        if self.nonlinearity != "relu":
            raise ConfigError("nonlinearity must be 'relu'")
        positive = [
            "actor_learning_rate",
            "critic_learning_rate",
            "replay_buffer_size",
            "number_of_hidden_layers_for_actors",
            "number_of_hidden_layers_for_critics",
            "number_of_hidden_units_per_layer",
            "batch_size",
            "target_update_frequency_per_episode",
            "ratio_between_env_vs_optimization_steps",
            "number_of_soft_value_iteration",
            "temperature",
            "number_of_nodes_in_a_graph",
            "clipping_threshold_for_distances",
            "pool_size",
            "hindsight_relabelling_range",
            "eval_every_episodes",
            "eval_episodes",
            "entropy_sample_size",
            "entropy_k",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        nonneg = [
            "balancing_coefficient",
            "skipping_temperature",
            "initial_random_steps",
            "action_l2",
            "action_noise",
            "total_env_steps",
            "checkpoint_every_steps",
        ]
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must be in (0, 1)")
        if not 0.0 <= self.hindsight_relabelling_ratio <= 1.0:
            raise ConfigError("hindsight_relabelling_ratio must be in [0, 1]")
        if not 0.0 <= self.polyak_for_target_network <= 1.0:
            raise ConfigError("polyak_for_target_network must be in [0, 1]")
        if not 0.0 <= self.pig_tracker_smoothing < 1.0:
            raise ConfigError("pig_tracker_smoothing must be in [0, 1)")
        if self.plan_method not in ("dijkstra", "soft_vi"):
            raise ConfigError("plan_method must be 'dijkstra' or 'soft_vi'")
        if self.precision not in ("float64", "float32"):
            raise ConfigError("precision must be 'float64' or 'float32'")
        if self.skipping not in ("on", "off", "random"):
            raise ConfigError("skipping must be 'on', 'off' or 'random'")
        if self.graph_rebuild_every_episodes <= 0:
            raise ConfigError("graph_rebuild_every_episodes must be > 0")
        if self.use_gcsl_loss and self.use_pig_loss:
            raise ConfigError("use_gcsl_loss replaces the distillation loss; disable use_pig_loss")
        if self.entropy_sample_size <= self.entropy_k:
            raise ConfigError("entropy_sample_size must exceed entropy_k")
        if self.entropy_window < self.entropy_sample_size:
            raise ConfigError("entropy_window must be >= entropy_sample_size")
        return self

    # ---- text round trip -------------------------------------------

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if isinstance(val, bool):
                val = "true" if val else "false"
            lines.append(f"{f.name}={val}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    f = _FIELDS[name]
    raw = raw.strip()
    if f.type in ("bool", bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: cannot parse {raw!r} as bool")
    if f.type in ("int", int):
        try:
            val = float(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {raw!r} as int") from exc
        if val != int(val):
            raise ConfigError(f"{name}: expected integer, got {raw!r}")
        return int(val)
    if f.type in ("float", float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {raw!r} as float") from exc
    return raw


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse flat key=value lines ('#' starts a comment) over defaults."""
    cfg = dataclasses.replace(base) if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, raw))
    return cfg.validate()


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base=base)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply string-valued overrides (e.g. from CLI ``key=value`` args)."""
    cfg = dataclasses.replace(cfg)
    for key, raw in overrides.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, str(raw)))
    return cfg.validate()
