#!/usr/bin/env python3
"""
Command-Line Interface
    kinspike [--config FILE] [--jobs N] [--section.key VALUE ...] COMMAND [options]

Commands: gen, encode, train, convert, eval, ablate, embed, compare, repro.
Any configuration key can be overridden with a flag of the same dotted name
(--dataset.reps_per_cell 4 or --dataset.reps_per_cell=4). Progress goes to
standard error, results to standard output.

Exit codes: 0 success, 2 configuration error, 3 missing upstream artifact,
4 numeric/training failure, 1 any other error or a failed acceptance check.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Tuple

from kinspike import __version__
from kinspike.config import load_config
from kinspike.errors import ConfigError, KinspikeError
from kinspike.orchestration import stages
from kinspike.orchestration.pipeline import cmd_repro

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinspike",
        description="Event encoding, classification and spiking conversion of kinematic logs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="run configuration file (key = value sections)")
    parser.add_argument("--jobs", type=int, help="worker processes for generation and ablation")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser("gen", help="generate the synthetic kinematic corpus")
    sub.add_parser("encode", help="encode logs into events, thresholds and the split")

    train = sub.add_parser("train", help="train a model")
    train.add_argument("--kind", choices=["LSTM", "CNN", "FCN"])
    train.add_argument("--target", choices=["task", "operator"])
    train.add_argument("--mode", choices=["event", "raw"])

    convert = sub.add_parser("convert", help="convert a trained model to a spiking network")
    convert.add_argument("--model", help="model file (default: the configured model)")
    convert.add_argument("--fully-spiking", action="store_true",
                         help="fail instead of running recurrent layers in rate mode")

    evaluate = sub.add_parser("eval", help="evaluate a model or SNN on the test windows")
    evaluate.add_argument("--model", help="model file")
    evaluate.add_argument("--snn", help="SNN file")
    evaluate.add_argument("--spiking", action="store_true", help="evaluate the SNN converted from --model")

    sub.add_parser("ablate", help="leave-one-feature-out sweep")

    embed = sub.add_parser("embed", help="t-SNE of the penultimate activations")
    embed.add_argument("--model", help="model file")

    sub.add_parser("compare", help="base vs SNN accuracy grid over kinds and encodings")
    sub.add_parser("repro", help="run the whole pipeline and print the acceptance table")
    return parser


def split_dotted(tokens: List[str]) -> Tuple[List[str], List[str]]:
    """Pull --section.key VALUE / --section.key=VALUE pairs out of argv."""
    overrides, rest = [], []
    i = 0
    while i < len(tokens):
        token = tokens[i]
        name = token[2:].split("=", 1)[0] if token.startswith("--") else ""
        if "." in name:
            if "=" in token:
                overrides.append(token[2:])
            else:
                if i + 1 >= len(tokens):
                    raise ConfigError(f"{token} needs a value")
                overrides.append(f"{name}={tokens[i + 1]}")
                i += 1
        else:
            rest.append(token)
        i += 1
    return overrides, rest


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )


def _emit(result):
    print(json.dumps(result, indent=2, default=str))


def run(args: argparse.Namespace, overrides: List[str]) -> int:
    if args.jobs is not None:
        overrides = overrides + [f"run.jobs={args.jobs}"]
    cfg = load_config(args.config, overrides)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)

    command = args.command
    if command == "gen":
        _emit(stages.cmd_gen(cfg))
    elif command == "encode":
        _emit(stages.cmd_encode(cfg))
    elif command == "train":
        _emit(stages.cmd_train(cfg, kind=args.kind, target=args.target, mode=args.mode))
    elif command == "convert":
        _emit(stages.cmd_convert(cfg, model=args.model, fully_spiking=args.fully_spiking))
    elif command == "eval":
        _emit(stages.cmd_eval(cfg, model=args.model, snn=args.snn, spiking=args.spiking))
    elif command == "ablate":
        _emit(stages.cmd_ablate(cfg))
    elif command == "embed":
        _emit(stages.cmd_embed(cfg, model=args.model))
    elif command == "compare":
        _emit(stages.cmd_compare(cfg))
    elif command == "repro":
        table = cmd_repro(cfg)
        print(table.to_string(index=False))
        return 1 if (table["status"] == "FAIL").any() else 0
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        overrides, rest = split_dotted(argv)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        print(f"kinspike: error: {e}", file=sys.stderr)
        return e.exit_code
    try:
        args = parser.parse_args(rest)
    except SystemExit as e:
        return 0 if e.code == 0 else ConfigError.exit_code

    configure_logging(args.verbose)
    try:
        return run(args, overrides)
    except KinspikeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
