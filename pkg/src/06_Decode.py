#!/usr/bin/env python3
"""
06_Decode.py: Transcribe WAV files with a trained checkpoint

Prints one tab-separated "path<TAB>transcript" line per file.

Usage:
    python src/06_Decode.py --checkpoint data/toy/run/best.ckpt \
        --tokenizer data/toy/tokenizer.txt data/toy/audio/utt_0000.wav
"""

import argparse
import importlib.util
import sys
from pathlib import Path

# Add the project root directory to Python path to fix import issues
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

try:
    from utils.logging_config import configure_logging
    from utils.inference import load_decoder, transcribe_files
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.inference import load_decoder, transcribe_files

configure_logging()


def _evaluate_stage():
    spec = importlib.util.spec_from_file_location("citrinet_evaluate_stage", Path(__file__).parent / "05_Evaluate.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def build_parser():
    parser = argparse.ArgumentParser(description="Transcribe WAV files.")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--tokenizer", required=True)
    parser.add_argument("wavs", nargs="+")
    return _evaluate_stage().add_decode_arguments(parser)


def main(argv=None):
    args = build_parser().parse_args(argv)
    params = _evaluate_stage().decode_params_from_args(args)
    model, tokenizer, lm = load_decoder(args.checkpoint, args.tokenizer, args.lm)
    results = transcribe_files(model, tokenizer, args.wavs, params, lm)
    for result in results:
        print(f"{result['audio_filepath']}\t{result['text']}")
    return results


if __name__ == "__main__":
    main()
