#!/usr/bin/env python3
"""
07_Analyze.py: Architecture report for a run config, no training needed

Prints the parameter count with a per-section breakdown, the analytic receptive
field, the output-length contract and the kernel layout after gamma scaling.
--sweep-channels / --sweep-repeats add a parameter-count table.

Usage:
    python src/07_Analyze.py --channels 1024 --repeat 5 --vocab-size 256
    python src/07_Analyze.py --gamma 0.5
    python src/07_Analyze.py --sweep-channels 256,384,512,768,1024
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
    from utils.analysis import analyze, format_report_text, parameter_sweep
    from utils.run_config import add_run_config_arguments, run_config_from_args
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.analysis import analyze, format_report_text, parameter_sweep
    from src.utils.run_config import add_run_config_arguments, run_config_from_args

configure_logging()


def _int_list(text):
    return [int(value) for value in text.split(",") if value.strip()] if text else None


def build_parser():
    parser = argparse.ArgumentParser(description="Report Citrinet architecture statistics.")
    parser.add_argument("--sweep-channels", default=None, help="Comma-separated channel counts")
    parser.add_argument("--sweep-repeats", default=None, help="Comma-separated sub-block counts")
    return add_run_config_arguments(parser)


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = run_config_from_args(args).model
    report = analyze(cfg)
    print(format_report_text(report))

    channels = _int_list(args.sweep_channels)
    repeats = _int_list(args.sweep_repeats)
    if channels or repeats:
        table = parameter_sweep(cfg, channels=channels, repeats=repeats)
        print(table.to_string(index=False, float_format=lambda value: f"{value:.2f}"))
        logging.info(f"Swept {len(table)} configurations")
    return report


if __name__ == "__main__":
    main()
