"""
Command-line front end: argument parsing, configuration, logging and exit
codes. The commands themselves live in commands.py.
"""

from __future__ import annotations

import argparse
import copy
import logging
import sys

import pandas as pd

from . import commands
from . import config as config_module
from .config import LOG_LEVELS, load_config, validate_config
from .errors import StreamQoEError
from .learn import parse_ratios
from .pretrained import BUILTIN_NAMES
from .schema import COL_MOS, EXIT_INPUT
from .utils import STDIO_PATH, configure_logging

logger = logging.getLogger(__name__)


def _max_features(text):
    if text in ("sqrt", "all"):
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'sqrt', 'all' or an integer, got '{text}'")


def _ratios(text):
    try:
        return list(parse_ratios(text))
    except StreamQoEError as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_output(parser, default=STDIO_PATH):
    parser.add_argument("--output", "-o", default=default, help="Output file ('-' for stdout)")


def _add_format(parser):
    parser.add_argument("--format", dest="fmt", choices=commands.FORMATS, default="csv",
                        help="Output format")


def _add_split_flags(parser):
    parser.add_argument("--ratios", type=_ratios, help="Train,test,validate window ratios, e.g. 8,1,1")
    parser.add_argument("--seed", type=int, help="Random seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamqoe", description="QoE prediction for adaptive streaming sessions.")
    parser.add_argument("--config", help="Path to a streamqoe.yaml configuration file")
    parser.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, help="Override logging.level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="Extract session features into a CSV table")
    p.add_argument("--input", "-i", nargs="+", required=True, help="Session JSON files or directories")
    p.add_argument("--meta", help="Video meta CSV (defaults to the built-in reference-video catalog)")
    p.add_argument("--mos", help="CSV with session_id,mos columns to join onto the table")
    p.add_argument("--level-ratios", action="store_true", help="Append per-level playback ratio columns")
    _add_output(p)

    p = sub.add_parser("score", help="Score sessions with a built-in or exported model")
    p.add_argument("--input", "-i", nargs="+", required=True, help="Feature CSV, or session files/directories")
    p.add_argument("--model", "-m", required=True, help=f"One of {', '.join(BUILTIN_NAMES)} or a model JSON path")
    p.add_argument("--meta", help="Video meta CSV when scoring session files")
    p.add_argument("--n-trees", type=int, help="Evaluate only the first K trees of an ensemble")
    _add_output(p)

    p = sub.add_parser("split", help="Sorted-stratified train/test/validate split")
    p.add_argument("--input", "-i", required=True, help="Feature CSV with a target column")
    p.add_argument("--target", default=COL_MOS, help="Target column")
    _add_split_flags(p)
    _add_output(p)

    p = sub.add_parser("train", help="Train a model on a feature table")
    p.add_argument("--input", "-i", required=True, help="Feature CSV with a target column")
    p.add_argument("--kind", choices=commands.MODEL_KINDS, default="gbm", help="Model kind")
    p.add_argument("--target", default=COL_MOS, help="Target column")
    p.add_argument("--target-transform", choices=("logit", "none"), help="Override training.target_transform")
    p.add_argument("--no-normalize", action="store_true", help="Do not min-max scale features")
    p.add_argument("--reference-free", action="store_true", help="Exclude the PSNR feature")
    p.add_argument("--name", help="Model name (default trained-<kind>)")
    p.add_argument("--output-dir", required=True, help="Directory for model.json, split.csv and report.csv")
    _add_split_flags(p)
    p.add_argument("--alpha", type=float, help="Lasso regularization strength")
    p.add_argument("--max-iter", type=int, help="Lasso coordinate-descent sweep limit")
    p.add_argument("--tol", type=float, help="Lasso convergence tolerance")
    p.add_argument("--n-estimators", type=int, help="Number of boosting stages")
    p.add_argument("--learning-rate", type=float, help="Boosting shrinkage")
    p.add_argument("--max-depth", type=int, help="Tree depth limit")
    p.add_argument("--min-samples-split", type=int, help="Smallest node that may be split")
    p.add_argument("--min-samples-leaf", type=int, help="Smallest allowed leaf")
    p.add_argument("--max-features", type=_max_features, help="Features searched per node: sqrt, all or K")
    p.add_argument("--loss", choices=("huber", "squared_error"), help="Boosting loss")
    p.add_argument("--huber-quantile", type=float, help="Residual quantile used as the Huber threshold")

    p = sub.add_parser("eval", help="Evaluate a model against MOS")
    p.add_argument("--input", "-i", nargs="+", required=True, help="Feature CSV, or session files/directories")
    p.add_argument("--meta", help="Video meta CSV when reading session files")
    p.add_argument("--mos", help="CSV with session_id,mos columns to join onto the input")
    p.add_argument("--model", "-m", required=True, help=f"One of {', '.join(BUILTIN_NAMES)} or a model JSON path")
    p.add_argument("--split", help="Partition labels CSV (session_id,partition)")
    p.add_argument("--domain", choices=commands.DOMAINS, default="mos", help="Compare on the MOS or V scale")
    p.add_argument("--n-trees", type=int, help="Evaluate only the first K trees of an ensemble")
    p.add_argument("--target", default=COL_MOS, help="Target column")
    _add_format(p)
    _add_output(p)

    p = sub.add_parser("export-model", help="Write a model as JSON")
    p.add_argument("--model", "-m", required=True, help=f"One of {', '.join(BUILTIN_NAMES)} or a model JSON path")
    _add_output(p)

    p = sub.add_parser("importance", help="Rank features of a gradient-boosting model")
    p.add_argument("--model", "-m", required=True, help="Model JSON path")
    p.add_argument("--top", type=int, help="Keep only the K most important features")
    _add_format(p)
    _add_output(p)

    p = sub.add_parser("correlate", help="Spearman correlation of every feature with MOS")
    p.add_argument("--input", "-i", nargs="+", required=True, help="Feature CSV, or session files/directories")
    p.add_argument("--meta", help="Video meta CSV when reading session files")
    p.add_argument("--mos", help="CSV with session_id,mos columns to join onto the input")
    p.add_argument("--target", default=COL_MOS, help="Target column")
    _add_format(p)
    _add_output(p)

    return parser


_TRAIN_OVERRIDES = {
    "ratios": ("split", "ratios"),
    "seed": ("split", "seed"),
    "alpha": ("lasso", "alpha"),
    "max_iter": ("lasso", "max_iter"),
    "tol": ("lasso", "tol"),
    "n_estimators": ("gbm", "n_estimators"),
    "learning_rate": ("gbm", "learning_rate"),
    "max_depth": ("gbm", "max_depth"),
    "min_samples_split": ("gbm", "min_samples_split"),
    "min_samples_leaf": ("gbm", "min_samples_leaf"),
    "max_features": ("gbm", "max_features"),
    "loss": ("gbm", "loss"),
    "huber_quantile": ("gbm", "huber_quantile"),
    "target_transform": ("training", "target_transform"),
}


def effective_config(config: dict, args: argparse.Namespace) -> dict:
    """Config with command-line flags laid over it."""
    config = copy.deepcopy(config)
    for attribute, (section, key) in _TRAIN_OVERRIDES.items():
        value = getattr(args, attribute, None)
        if value is not None:
            config[section][key] = value
    if getattr(args, "no_normalize", False):
        config["training"]["normalize"] = False
    return validate_config(config)


def _dispatch(args, config):
    if args.command == "extract":
        return commands.cmd_extract(args.input, args.output, meta=args.meta, mos=args.mos,
                                    level_ratios=args.level_ratios)
    if args.command == "score":
        return commands.cmd_score(args.input, args.output, args.model, meta=args.meta, n_trees=args.n_trees)
    if args.command == "split":
        split = config["split"]
        return commands.cmd_split(args.input, args.output, tuple(split["ratios"]), split["seed"], target=args.target)
    if args.command == "train":
        return commands.cmd_train(args.input, args.output_dir, args.kind, config, target=args.target,
                                  reference_free=args.reference_free, name=args.name)
    if args.command == "eval":
        return commands.cmd_eval(args.input, args.output, args.model, split=args.split, domain=args.domain,
                                 n_trees=args.n_trees, target=args.target, fmt=args.fmt,
                                 meta=args.meta, mos=args.mos)
    if args.command == "export-model":
        return commands.cmd_export_model(args.model, args.output)
    if args.command == "importance":
        return commands.cmd_importance(args.model, args.output, top=args.top, fmt=args.fmt)
    if args.command == "correlate":
        return commands.cmd_correlate(args.input, args.output, target=args.target, fmt=args.fmt,
                                      meta=args.meta, mos=args.mos)
    raise StreamQoEError(f"unknown command '{args.command}'")


def main(argv=None) -> int:
    configure_logging("INFO")
    parser = build_parser()
    args = parser.parse_args(argv if argv is not None else sys.argv[1:])

    try:
        config = effective_config(load_config(args.config), args)
        configure_logging(args.log_level or config["logging"]["level"].upper())
        logger.debug(f"Configuration: {config_module.CONFIG_PATH_USED or 'packaged defaults'}")
        if args.command in ("train", "split"):
            logger.info(f"Effective settings: split={config['split']} training={config['training']}")
        return _dispatch(args, config)
    except StreamQoEError as e:
        logger.error(f"{args.command}: {e}")
        return e.exit_code
    except (OSError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
