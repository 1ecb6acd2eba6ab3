#!/usr/bin/env python3
"""
01_SynthData.py: Generate the synthetic toy speech dataset

Every character of a small word list is rendered as its own tone, so a tiny
Citrinet can memorize the data on a CPU. The script writes 16 kHz PCM WAV files
plus JSON-lines manifests:

    <out-dir>/audio/utt_0000.wav ...
    <out-dir>/train_manifest.jsonl
    <out-dir>/dev_manifest.jsonl

Without --dev-utterances the dev manifest lists the training utterances (the
memorization check). With it, a separate dev set is rendered under <out-dir>/dev.

Usage:
    python src/01_SynthData.py --out-dir data/toy --num-utterances 20 --seed 0
"""

import argparse
import os
import sys
import logging
from pathlib import Path

# Add the project root directory to Python path to fix import issues
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

try:
    from utils.logging_config import configure_logging
    from utils.artifact_paths import data_dir_paths
    from utils.manifest import write_manifest
    from utils.synth_data import DEFAULT_WORDS, synth_data
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.artifact_paths import data_dir_paths
    from src.utils.manifest import write_manifest
    from src.utils.synth_data import DEFAULT_WORDS, synth_data

configure_logging()


def build_parser():
    parser = argparse.ArgumentParser(description="Generate synthetic toy speech data.")
    parser.add_argument("--out-dir", default=os.environ.get("CITRINET_DATA_DIR", "data/toy"))
    parser.add_argument("--num-utterances", type=int, default=20)
    parser.add_argument("--dev-utterances", type=int, default=0)
    parser.add_argument("--words", default=",".join(DEFAULT_WORDS), help="Comma-separated word list")
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    paths = data_dir_paths(args.out_dir)
    words = [word for word in args.words.split(",") if word.strip()]

    train_entries = synth_data(
        args.out_dir,
        args.num_utterances,
        words=words,
        seed=args.seed,
        manifest_name=paths["train_manifest"].name,
    )
    if args.dev_utterances > 0:
        dev_entries = synth_data(
            Path(args.out_dir) / "dev",
            args.dev_utterances,
            words=words,
            seed=args.seed + 1,
        )
    else:
        dev_entries = train_entries
    write_manifest(dev_entries, paths["dev_manifest"], relative_to=Path(args.out_dir))
    logging.info(f"Dev manifest with {len(dev_entries)} utterances written to {paths['dev_manifest']}")
    return {"train": len(train_entries), "dev": len(dev_entries), "out_dir": str(args.out_dir)}


if __name__ == "__main__":
    main()
