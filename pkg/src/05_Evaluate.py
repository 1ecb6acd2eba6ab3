#!/usr/bin/env python3
"""
05_Evaluate.py: Score a checkpoint on a manifest (WER and CER)

Decoding is greedy by default; --mode beam runs prefix beam search, fused with
an n-gram LM when --lm is given (or re-ranked with --rescore). Per-utterance
hypotheses go to a CSV and the report to an adjacent JSON file.

Usage:
    python src/05_Evaluate.py --checkpoint data/toy/run/best.ckpt \
        --manifest data/toy/dev_manifest.jsonl --tokenizer data/toy/tokenizer.txt \
        --mode beam --lm data/toy/lm.txt --alpha 0.5 --beta 1.0
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
    from utils.artifact_paths import eval_report_path_for_hypotheses, hypotheses_path
    from utils.inference import DecodeParams, evaluate, write_report
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.artifact_paths import eval_report_path_for_hypotheses, hypotheses_path
    from src.utils.inference import DecodeParams, evaluate, write_report

configure_logging()


def add_decode_arguments(parser):
    parser.add_argument("--mode", choices=["greedy", "beam"], default="greedy")
    parser.add_argument("--beam-width", type=int, default=8)
    parser.add_argument("--lm", default=None)
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--rescore", action="store_true", help="Re-rank acoustic beams with the LM")
    parser.add_argument("--seed", type=int, default=0, help="Accepted for CLI symmetry; decoding is deterministic")
    return parser


def decode_params_from_args(args):
    return DecodeParams(
        mode=args.mode,
        beam_width=args.beam_width,
        alpha=args.alpha,
        beta=args.beta,
        rescore=args.rescore,
    )


def build_parser():
    parser = argparse.ArgumentParser(description="Evaluate a checkpoint on a manifest.")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--tokenizer", required=True)
    parser.add_argument("--out-dir", default=None, help="Where hypotheses and the report go")
    return add_decode_arguments(parser)


def main(argv=None):
    args = build_parser().parse_args(argv)
    params = decode_params_from_args(args)
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.checkpoint).parent
    decoding = params.describe(with_lm=bool(args.lm)).split("+")[0] + ("_lm" if args.lm else "")
    dump_path = hypotheses_path(out_dir, Path(args.manifest).name, decoding)

    report = evaluate(
        args.checkpoint,
        args.manifest,
        args.tokenizer,
        params,
        lm_path=args.lm,
        dump_path=dump_path,
    )
    report_path = write_report(report, eval_report_path_for_hypotheses(dump_path))
    logging.info(f"WER {report.wer:.2f}% CER {report.cer:.2f}% written to {report_path}")
    return report


if __name__ == "__main__":
    main()
