"""Argument parsing for the ``train``, ``eval``, ``imagine`` and ``plot`` commands."""
import argparse
import sys

import torch

from config.logging_config import get_logger, is_debug_mode
from config.run_config import get_num_threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daydreamer",
        description="Train and inspect world-model agents on desk-scale simulated robots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train an agent with concurrent actor and learner")
    train.add_argument("--config", help="preset name or YAML file")
    train.add_argument("--logdir", required=True, help="run directory")
    train.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="config override, repeatable")
    train.add_argument("--seed", type=int)
    train.add_argument("--steps", type=int, help="environment-step budget")
    train.add_argument("--learner-steps", type=int, help="learner-iteration budget")
    train.add_argument("--resume", help="checkpoint to continue from")

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint's deterministic policy")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--episodes", type=int, default=10)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--logdir", help="where to save the summary (default: the checkpoint's run)")

    imagine = sub.add_parser("imagine", help="decode open-loop imagination next to reality")
    imagine.add_argument("--checkpoint", required=True)
    imagine.add_argument("--context", type=int, default=5)
    imagine.add_argument("--horizon", type=int, default=15)
    imagine.add_argument("--stride", type=int, default=2)
    imagine.add_argument("--rows", type=int, default=1)
    imagine.add_argument("--seed", type=int, default=0)
    imagine.add_argument("--out", default="imagination.png")

    plot = sub.add_parser("plot", help="plot learning curves from a run's metrics log")
    plot.add_argument("--logdir", required=True)
    plot.add_argument("--out")
    plot.add_argument("--bins", type=int, default=20)
    plot.add_argument("--kind", default="episode", choices=["episode", "segment", "train", "eval"])
    plot.add_argument("--metric")
    return parser


def run_cli(argv: list[str] | None = None) -> int:
    """Main entry point for the command line.

    Args:
        argv: Command line arguments. If None, uses sys.argv.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(sys.argv[1:] if argv is None else argv)
    logger = get_logger()
    logger.info("=" * 70)
    logger.info(f"COMMAND {args.command.upper()} | Debug Mode: {is_debug_mode()}")
    logger.info("=" * 70)

    threads = get_num_threads()
    if threads is not None:
        torch.set_num_threads(threads)

    if args.command == "train":
        from commands.train import cmd_train
        return cmd_train(args.config, args.logdir, args.override, args.seed, args.steps,
                         args.learner_steps, args.resume)
    if args.command == "eval":
        from commands.evaluate import cmd_eval
        return cmd_eval(args.checkpoint, args.episodes, args.seed, args.logdir)
    if args.command == "imagine":
        from commands.imagine import cmd_imagine
        return cmd_imagine(args.checkpoint, args.context, args.horizon, args.out, args.stride,
                           args.rows, args.seed)
    from commands.plot import cmd_plot
    return cmd_plot(args.logdir, args.out, args.bins, args.kind, args.metric)
