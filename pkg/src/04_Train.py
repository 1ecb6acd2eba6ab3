#!/usr/bin/env python3
"""
04_Train.py: Train a Citrinet CTC model

The run is fixed by a run config (key=value file and/or --flags, see
src/utils/run_config.py), the manifests and --seed. Outputs in --run-dir:

    best.ckpt            lowest greedy dev WER so far
    last.ckpt            state after the final step (resumable with --resume)
    metrics.jsonl        {"step", "loss", "lr", "wer"} records
    run_config.env       the resolved run config
    skipped_utterances.jsonl   utterances whose targets do not fit the encoder output

Usage:
    python src/04_Train.py --desk --train-manifest data/toy/train_manifest.jsonl \
        --dev-manifest data/toy/dev_manifest.jsonl --tokenizer data/toy/tokenizer.txt \
        --run-dir data/toy/run
"""

import argparse
import sys
import logging
from pathlib import Path

# Add the project root directory to Python path to fix import issues
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

try:
    from utils.logging_config import configure_logging
    from utils.manifest import read_manifest
    from utils.manifest_qa import validate_manifest
    from utils.run_config import DESK_VALUES, add_run_config_arguments, run_config_from_args
    from utils.tokenizer import load_tokenizer
    from utils.trainer import describe_train_result, summarize_metrics_log, train
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.manifest import read_manifest
    from src.utils.manifest_qa import validate_manifest
    from src.utils.run_config import DESK_VALUES, add_run_config_arguments, run_config_from_args
    from src.utils.tokenizer import load_tokenizer
    from src.utils.trainer import describe_train_result, summarize_metrics_log, train

configure_logging()


def check_manifest(path):
    """Log manifest QA findings; exit with code 1 when the manifest fails."""
    result = validate_manifest(path)
    for warning in result.warnings:
        logging.warning(f"{path}: {warning}")
    if result.status == "fail":
        for error in result.errors:
            logging.error(f"{path}: {error}")
        raise SystemExit(1)
    logging.info(f"{path}: {result.entry_count} utterances, {result.total_duration:.1f}s of audio")
    return result


def build_parser():
    parser = argparse.ArgumentParser(description="Train a Citrinet model with CTC loss.")
    parser.add_argument("--train-manifest", required=True)
    parser.add_argument("--dev-manifest", default=None)
    parser.add_argument("--tokenizer", default=None, help="Defaults to tokenizer_path from the run config")
    parser.add_argument("--run-dir", required=True)
    parser.add_argument("--resume", default=None, help="Checkpoint to resume from")
    parser.add_argument("--stop-at-step", type=int, default=None)
    parser.add_argument("--desk", action="store_true", help="Start from the reduced desk-scale config")
    add_run_config_arguments(parser)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    run_config = run_config_from_args(args, DESK_VALUES if args.desk else None)
    tokenizer_path = args.tokenizer or run_config.tokenizer_path
    if not tokenizer_path:
        raise SystemExit("A tokenizer is required (--tokenizer or tokenizer_path in the run config)")
    run_config = run_config.model_copy(update={"tokenizer_path": str(tokenizer_path)})
    tokenizer = load_tokenizer(tokenizer_path)

    check_manifest(args.train_manifest)
    if args.dev_manifest:
        check_manifest(args.dev_manifest)
    train_entries = read_manifest(args.train_manifest)
    dev_entries = read_manifest(args.dev_manifest) if args.dev_manifest else []
    result = train(
        run_config,
        train_entries,
        dev_entries,
        tokenizer,
        args.run_dir,
        resume_from=args.resume,
        stop_at_step=args.stop_at_step,
    )
    summary = summarize_metrics_log(result.metrics_log)
    logging.info(describe_train_result(result))
    return {
        "steps": result.steps_completed,
        "final_loss": result.final_loss,
        "best_wer": result.best_wer,
        "skipped": result.skipped_utterances,
        "best_checkpoint": str(result.best_checkpoint) if result.best_checkpoint else None,
        "last_checkpoint": str(result.last_checkpoint),
        "metrics": summary,
    }


if __name__ == "__main__":
    main()
