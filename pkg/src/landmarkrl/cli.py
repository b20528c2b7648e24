"""Command-line entry points: train / eval / ablate / plot.

Exit codes: 0 success, 1 configuration error (bad flags, bad config file,
checkpoint/config mismatch), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys

from .config import ConfigError, RunConfig, apply_overrides, load_config


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage errors are config errors here
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="landmarkrl", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training job")
    t.add_argument("--config", help="key=value config file (defaults when omitted)")
    t.add_argument("--seed", type=int, help="override the config seed")
    t.add_argument("--out", help="output directory (config echo, metrics, checkpoints)")
    t.add_argument("--quiet", action="store_true", help="suppress progress lines")
    t.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--no-planner", action="store_true", help="feed the goal directly to the policy")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--config", help="optional config file cross-checked against the checkpoint")

    a = sub.add_parser("ablate", help="run the comparative variant matrix")
    a.add_argument("--config", help="base config file")
    a.add_argument("--seeds", required=True, help="comma-separated seeds, e.g. 0,1,2,3")
    a.add_argument("--out", required=True, help="matrix output root")
    a.add_argument("--variants", help="comma-separated variant names (default full matrix)")
    a.add_argument("--parallel", type=int, default=1, help="concurrent runs")
    a.add_argument("overrides", nargs="*", metavar="key=value", help="base config overrides")

    pl = sub.add_parser("plot", help="render SVG curves from metrics logs")
    pl.add_argument("--logs", required=True, nargs="+", help="glob(s) of metrics.csv files")
    pl.add_argument("--out", required=True, help="directory for the SVG files")
    pl.add_argument("--window", type=int, default=5, help="trailing smoothing window (ticks)")
    return p


def _parse_overrides(pairs) -> dict:
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val
    return out


def _load_base_config(path, overrides, seed=None) -> RunConfig:
    cfg = load_config(path) if path else RunConfig()
    cfg = apply_overrides(cfg, _parse_overrides(overrides or []))
    if seed is not None:
        cfg.seed = seed
    return cfg.validate()


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.command == "train":
        from .training import train

        cfg = _load_base_config(args.config, args.overrides, args.seed)
        log = None if args.quiet else print
        res = train(cfg, out_dir=args.out, log=log)
        final = res.metrics[-1].eval_success_rate if res.metrics else float("nan")
        print(f"trained {res.env_steps} env steps, {res.episodes} episodes, final success {final}")
        return 0

    if args.command == "eval":
        from .training import evaluate

        cfg = None
        if args.config:
            cfg = load_config(args.config)
        rate = evaluate(
            args.checkpoint,
            episodes=args.episodes,
            use_planner=not args.no_planner,
            seed=args.seed,
            config=cfg,
        )
        print(f"success rate: {rate}")
        return 0

    if args.command == "ablate":
        from .ablation import DEFAULT_VARIANTS, run_ablation_matrix

        cfg = _load_base_config(args.config, args.overrides)
        seeds = [int(s) for s in args.seeds.split(",") if s != ""]
        if not seeds:
            raise ConfigError("need at least one seed")
        variants = (
            tuple(v for v in args.variants.split(",") if v) if args.variants else DEFAULT_VARIANTS
        )
        report = run_ablation_matrix(
            cfg, seeds, args.out, variants=variants, parallel=args.parallel
        )
        print(f"{len(report.runs)} runs -> {os.path.join(args.out, 'report.csv')}")
        for variant, t in sorted(report.steps_to_threshold.items()):
            print(f"  {variant}: mean-curve steps to 0.8 = {t}")
        return 0

    if args.command == "plot":
        from .plots import emit_plots, load_log_groups

        paths = []
        for pattern in args.logs:
            paths.extend(glob.glob(pattern, recursive=True))
        if not paths:
            raise ConfigError(f"no metrics logs match {args.logs}")
        groups = load_log_groups(paths)
        written = emit_plots(groups, args.out, window=args.window)
        print(f"wrote {len(written)} charts to {args.out}")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
