#!/usr/bin/env python3
"""
03_TrainLM.py: Train a token-level n-gram language model

Transcripts come from a manifest and/or a plain text file (one sentence per
line). They are normalized and encoded with the same tokenizer as the acoustic
model, then counted into a stupid-backoff n-gram model saved as sorted
"n-gram<TAB>count" lines.

Usage:
    python src/03_TrainLM.py --manifest data/toy/train_manifest.jsonl \
        --tokenizer data/toy/tokenizer.txt --order 2 --out data/toy/lm.txt
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
    from utils.language_model import save_lm, train_lm
    from utils.manifest import manifest_texts, read_manifest
    from utils.tokenizer import encode, load_tokenizer, normalize_text
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.language_model import save_lm, train_lm
    from src.utils.manifest import manifest_texts, read_manifest
    from src.utils.tokenizer import encode, load_tokenizer, normalize_text

configure_logging()


def build_parser():
    parser = argparse.ArgumentParser(description="Train an n-gram LM over tokenizer units.")
    parser.add_argument("--tokenizer", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--manifest", default=None)
    parser.add_argument("--text", default=None, help="Extra corpus, one sentence per line")
    parser.add_argument("--order", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0, help="Accepted for CLI symmetry; counting is deterministic")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not args.manifest and not args.text:
        raise SystemExit("Provide --manifest and/or --text")
    texts = []
    if args.manifest:
        texts.extend(manifest_texts(read_manifest(args.manifest)))
    if args.text:
        texts.extend(Path(args.text).read_text(encoding="utf-8").splitlines())

    tokenizer = load_tokenizer(args.tokenizer)
    sequences = [encode(tokenizer, normalize_text(text)) for text in texts if normalize_text(text)]
    lm = train_lm(sequences, args.order, vocab_size=tokenizer.size)
    save_lm(lm, args.out)
    logging.info(f"Saved {args.order}-gram LM with {len(lm.counts)} n-grams from {len(sequences)} sentences to {args.out}")
    return {"order": lm.order, "ngrams": len(lm.counts), "sentences": len(sequences)}


if __name__ == "__main__":
    main()
