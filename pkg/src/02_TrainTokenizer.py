#!/usr/bin/env python3
"""
02_TrainTokenizer.py: Train a character or sub-word tokenizer on manifest text

The tokenizer file is shared by the model head, the CTC targets and the n-gram
LM. Its text layout is documented in src/utils/tokenizer.py.

Usage:
    python src/02_TrainTokenizer.py --manifest data/toy/train_manifest.jsonl \
        --kind char --out data/toy/tokenizer.txt
    python src/02_TrainTokenizer.py --manifest train.jsonl --kind subword --vocab-size 256
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
    from utils.manifest import manifest_texts, read_manifest
    from utils.tokenizer import encoded_length_stats, save_tokenizer, train_tokenizer
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.manifest import manifest_texts, read_manifest
    from src.utils.tokenizer import encoded_length_stats, save_tokenizer, train_tokenizer

configure_logging()


def build_parser():
    parser = argparse.ArgumentParser(description="Train a tokenizer from manifest transcripts.")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--kind", choices=["char", "subword"], default="char")
    parser.add_argument("--vocab-size", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0, help="Accepted for CLI symmetry; training is deterministic")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    texts = manifest_texts(read_manifest(args.manifest))
    if args.kind == "subword" and args.vocab_size is None:
        raise SystemExit("--vocab-size is required for a sub-word tokenizer")

    model = train_tokenizer(texts, args.vocab_size, kind=args.kind)
    save_tokenizer(model, args.out)
    stats = encoded_length_stats(model, texts)
    logging.info(
        f"Saved {model.kind} tokenizer with {model.size} tokens to {args.out}; "
        f"mean {stats['mean_tokens']:.2f} tokens per utterance"
    )
    return {"kind": model.kind, "vocab_size": model.size, **stats}


if __name__ == "__main__":
    main()
