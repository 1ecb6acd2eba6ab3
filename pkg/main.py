#!/usr/bin/env python3
"""
main.py: Entry point for the Citrinet toy speech-recognition pipeline

Every stage lives in its own script under src/ and can be run on its own or
through this dispatcher:

1. synth-data:       src/01_SynthData.py       synthetic 16 kHz WAVs + manifests
2. train-tokenizer:  src/02_TrainTokenizer.py  character or sub-word vocabulary
3. train-lm:         src/03_TrainLM.py         token n-gram language model
4. train:            src/04_Train.py           CTC training with NovoGrad
5. evaluate:         src/05_Evaluate.py        WER/CER with greedy or beam decoding
6. decode:           src/06_Decode.py          transcribe WAV files
7. analyze:          src/07_Analyze.py         parameter count and receptive field

`pipeline` runs the desk-scale protocol end to end inside one data folder
(synthesize, tokenize, train the LM, train, evaluate greedy and LM beam
decoding, analyze) and prints a run summary.

Usage:
    python main.py pipeline --data-dir data/toy --seed 0
    python main.py train --desk --train-manifest ... --tokenizer ... --run-dir ...
    python main.py analyze --channels 1024

The default data folder can be set with CITRINET_DATA_DIR in .env.
"""

import sys
import time
import logging
import importlib.util
import os
import argparse
import json
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

# Add the project root directory to Python path to fix import issues
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

# Load environment variables from .env file
load_dotenv(project_root / ".env")

try:
    from utils.logging_config import configure_logging
    from utils.artifact_paths import data_dir_paths, metrics_log_path
    from utils.skipped_utterances import default_skipped_path, summarize_skipped_utterances
    from utils.trainer import summarize_metrics_log
except ImportError:
    from src.utils.logging_config import configure_logging
    from src.utils.artifact_paths import data_dir_paths, metrics_log_path
    from src.utils.skipped_utterances import default_skipped_path, summarize_skipped_utterances
    from src.utils.trainer import summarize_metrics_log

configure_logging()

DEFAULT_DATA_DIR = "data/toy"

STAGES = {
    "synth-data": "01_SynthData.py",
    "train-tokenizer": "02_TrainTokenizer.py",
    "train-lm": "03_TrainLM.py",
    "train": "04_Train.py",
    "evaluate": "05_Evaluate.py",
    "decode": "06_Decode.py",
    "analyze": "07_Analyze.py",
}


def import_module_from_file(module_name, file_path):
    """
    Import a module from a file path.

    Args:
        module_name (str): Name to give the imported module
        file_path (str): Path to the Python file to import

    Returns:
        module: The imported module object
    """
    spec = importlib.util.spec_from_file_location(module_name, file_path)
    module = importlib.util.module_from_spec(spec)
    sys.modules[module_name] = module
    spec.loader.exec_module(module)
    return module


def load_stage(command, base_dir=None):
    base_dir = Path(base_dir) if base_dir else project_root
    file_name = STAGES[command]
    return import_module_from_file(f"citrinet_{command.replace('-', '_')}", base_dir / "src" / file_name)


@dataclass
class PipelineStepSummary:
    step_number: int
    total_steps: int
    name: str
    status: str
    duration_seconds: float
    note: str = ""


def _format_duration(seconds):
    return f"{seconds:.2f}s"


def _short_note(value, max_length=120):
    note = str(value or "").replace("\n", " ").strip()
    if len(note) <= max_length:
        return note
    return f"{note[:max_length - 3]}..."


def _format_optional(value, pattern="{:.4f}"):
    return "unavailable" if value is None else pattern.format(value)


def collect_eval_reports(run_dir):
    """Map each ``*.report.json`` in ``run_dir`` to its WER."""
    run_dir = Path(run_dir)
    reports = {}
    if not run_dir.exists():
        return reports
    for path in sorted(run_dir.glob("*.report.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            logging.warning(f"Could not read evaluation report {path}: {exc}")
            continue
        reports[payload.get("decoding", path.stem)] = payload.get("wer")
    return reports


def _summary_metrics(pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir):
    run_dir = data_dir_paths(base_dir)["run"]
    training = summarize_metrics_log(metrics_log_path(run_dir))
    skipped = summarize_skipped_utterances(default_skipped_path(run_dir))
    return {
        "overall_status": "success" if pipeline_success else "completed with errors",
        "completed_steps": completed_steps,
        "total_steps": total_steps,
        "total_runtime": _format_duration(total_runtime_seconds),
        "training": training,
        "eval_reports": collect_eval_reports(run_dir),
        "skipped": skipped,
    }


def _eval_summary(eval_reports):
    if not eval_reports:
        return "unavailable"
    return ", ".join(f"{name}={_format_optional(wer, '{:.2f}%')}" for name, wer in eval_reports.items())


def format_pipeline_summary_text(step_summaries, pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir):
    metrics = _summary_metrics(pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir)
    training = metrics["training"]
    lines = [
        "Pipeline run summary",
        f"Overall status: {metrics['overall_status']}",
        f"Steps completed: {completed_steps}/{total_steps}",
        f"Total runtime: {metrics['total_runtime']}",
        f"Training steps logged: {training['last_step'] if training['last_step'] is not None else 'unavailable'}",
        f"Final training loss: {_format_optional(training['final_loss'])}",
        f"Best dev WER: {_format_optional(training['best_wer'], '{:.2f}%')}",
        f"Evaluation WER: {_eval_summary(metrics['eval_reports'])}",
        f"Skipped utterances: {metrics['skipped']['total']}",
        "Step timings:",
    ]

    for step in step_summaries:
        note_suffix = f" - {step.note}" if step.note else ""
        lines.append(
            f"  {step.step_number}/{step.total_steps} {step.name}: "
            f"{step.status} in {_format_duration(step.duration_seconds)}{note_suffix}"
        )

    return "\n".join(lines)


def _markdown_cell(value):
    return str(value).replace("|", "\\|").replace("\n", " ").strip()


def format_pipeline_summary_markdown(step_summaries, pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir):
    metrics = _summary_metrics(pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir)
    training = metrics["training"]

    lines = [
        "## Citrinet Pipeline Run Summary",
        "",
        "| Metric | Value |",
        "| --- | --- |",
        f"| Overall status | {_markdown_cell(metrics['overall_status'])} |",
        f"| Steps completed | {completed_steps}/{total_steps} |",
        f"| Total runtime | {metrics['total_runtime']} |",
        f"| Final training loss | {_format_optional(training['final_loss'])} |",
        f"| Best dev WER | {_format_optional(training['best_wer'], '{:.2f}%')} |",
        f"| Evaluation WER | {_markdown_cell(_eval_summary(metrics['eval_reports']))} |",
        f"| Skipped utterances | {metrics['skipped']['total']} |",
        "",
        "| Step | Status | Duration | Note |",
        "| --- | --- | --- | --- |",
    ]

    for step in step_summaries:
        lines.append(
            "| "
            f"{step.step_number}/{step.total_steps} {_markdown_cell(step.name)} | "
            f"{_markdown_cell(step.status)} | "
            f"{_format_duration(step.duration_seconds)} | "
            f"{_markdown_cell(step.note)} |"
        )

    return "\n".join(lines)


def write_github_step_summary(markdown, env=None):
    env = env if env is not None else os.environ
    summary_path = env.get("GITHUB_STEP_SUMMARY")
    if not summary_path:
        return False

    try:
        with open(summary_path, "a", encoding="utf-8") as outfile:
            outfile.write(markdown.rstrip())
            outfile.write("\n")
        return True
    except OSError as exc:
        logging.warning(f"Could not write GitHub step summary: {exc}")
        return False


def emit_pipeline_summary(step_summaries, pipeline_success, completed_steps, total_steps, total_runtime_seconds, base_dir):
    try:
        text_summary = format_pipeline_summary_text(
            step_summaries,
            pipeline_success,
            completed_steps,
            total_steps,
            total_runtime_seconds,
            base_dir,
        )
        for line in text_summary.splitlines():
            logging.info(line)

        markdown_summary = format_pipeline_summary_markdown(
            step_summaries,
            pipeline_success,
            completed_steps,
            total_steps,
            total_runtime_seconds,
            base_dir,
        )
        write_github_step_summary(markdown_summary)
    except Exception as exc:
        logging.warning(f"Could not emit pipeline run summary: {exc}", exc_info=True)


def _step_note(command, result):
    if result is None:
        return ""
    if command == "train":
        return f"final loss {_format_optional(result['final_loss'])}, best WER {_format_optional(result['best_wer'], '{:.2f}%')}"
    if command == "evaluate":
        return f"{result.decoding}: WER {result.wer:.2f}%"
    if command == "analyze":
        return f"{result.parameters_millions:.3f}M parameters, receptive field {result.receptive_field}"
    if command == "train-tokenizer":
        return f"{result['vocab_size']} tokens"
    if command == "train-lm":
        return f"{result['ngrams']} n-grams"
    if command == "synth-data":
        return f"{result['train']} train / {result['dev']} dev utterances"
    return ""


def pipeline_steps(data_dir, seed=0, num_utterances=20, lm_order=2):
    """Ordered ``(name, command, argv)`` tuples for the desk-scale protocol."""
    paths = data_dir_paths(data_dir)
    run_dir = paths["run"]
    best = str(run_dir / "best.ckpt")
    common_eval = [
        "--checkpoint", best,
        "--manifest", str(paths["dev_manifest"]),
        "--tokenizer", str(paths["tokenizer"]),
        "--out-dir", str(run_dir),
    ]
    return [
        ("SynthData", "synth-data", ["--out-dir", str(data_dir), "--num-utterances", str(num_utterances), "--seed", str(seed)]),
        (
            "TrainTokenizer",
            "train-tokenizer",
            ["--manifest", str(paths["train_manifest"]), "--kind", "char", "--out", str(paths["tokenizer"])],
        ),
        (
            "TrainLM",
            "train-lm",
            [
                "--manifest", str(paths["train_manifest"]),
                "--tokenizer", str(paths["tokenizer"]),
                "--order", str(lm_order),
                "--out", str(paths["lm"]),
            ],
        ),
        (
            "Train",
            "train",
            [
                "--desk",
                "--train-manifest", str(paths["train_manifest"]),
                "--dev-manifest", str(paths["dev_manifest"]),
                "--tokenizer", str(paths["tokenizer"]),
                "--run-dir", str(run_dir),
                "--seed", str(seed),
            ],
        ),
        ("EvaluateGreedy", "evaluate", common_eval + ["--mode", "greedy"]),
        ("EvaluateBeamLM", "evaluate", common_eval + ["--mode", "beam", "--lm", str(paths["lm"])]),
        ("Analyze", "analyze", []),
    ]


def run_pipeline(data_dir=None, seed=0, num_utterances=20, lm_order=2):
    """
    Run the desk-scale protocol in ``data_dir``.

    A failing step is recorded in the summary and the remaining steps still run,
    so the summary shows how far the run got.
    """
    data_dir = Path(data_dir or os.environ.get("CITRINET_DATA_DIR", DEFAULT_DATA_DIR))
    steps = pipeline_steps(data_dir, seed=seed, num_utterances=num_utterances, lm_order=lm_order)

    pipeline_success = True
    completed_steps = 0
    step_summaries = []
    pipeline_start_time = time.time()
    total_steps = len(steps)

    for i, (step_name, command, argv) in enumerate(steps):
        logging.info(f"Starting step {i+1}/{total_steps}: {step_name}")
        start_time = time.time()
        try:
            if command == "analyze":
                result = run_desk_analysis(seed)
            else:
                result = load_stage(command).main(argv)
            elapsed_time = time.time() - start_time
            logging.info(f"Completed {step_name} in {elapsed_time:.2f} seconds")
            completed_steps += 1
            step_summaries.append(
                PipelineStepSummary(i + 1, total_steps, step_name, "success", elapsed_time, _short_note(_step_note(command, result)))
            )
        except SystemExit as e:
            logging.warning(f"{step_name} exited with code {e.code}. Continuing with next step.")
            pipeline_success = False
            step_summaries.append(
                PipelineStepSummary(i + 1, total_steps, step_name, "failed", time.time() - start_time, f"exited with code {e.code}")
            )
        except Exception as e:
            logging.error(f"Error executing {step_name}: {e}", exc_info=True)
            pipeline_success = False
            step_summaries.append(
                PipelineStepSummary(i + 1, total_steps, step_name, "failed", time.time() - start_time, _short_note(e))
            )

    total_runtime = time.time() - pipeline_start_time
    if pipeline_success:
        logging.info(f"Pipeline completed successfully in {total_runtime:.2f} seconds")
    else:
        logging.warning(f"Pipeline completed with errors in {total_runtime:.2f} seconds")
    emit_pipeline_summary(step_summaries, pipeline_success, completed_steps, total_steps, total_runtime, data_dir)
    return pipeline_success


def run_desk_analysis(seed=0):
    try:
        from utils.analysis import analyze, format_report_text
        from utils.run_config import desk_run_config
    except ImportError:
        from src.utils.analysis import analyze, format_report_text
        from src.utils.run_config import desk_run_config

    report = analyze(desk_run_config(seed=seed).model)
    for line in format_report_text(report).splitlines():
        logging.info(line)
    return report


def build_parser():
    parser = argparse.ArgumentParser(description="Citrinet CTC speech recognition toolkit.")
    parser.add_argument("command", choices=sorted(STAGES) + ["pipeline"])
    return parser


def build_pipeline_parser():
    parser = argparse.ArgumentParser(prog="main.py pipeline", description="Run the desk-scale protocol.")
    parser.add_argument("--data-dir", default=os.environ.get("CITRINET_DATA_DIR", DEFAULT_DATA_DIR))
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--num-utterances", type=int, default=20)
    parser.add_argument("--lm-order", type=int, default=2)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv[:1])
    if args.command == "pipeline":
        options = build_pipeline_parser().parse_args(argv[1:])
        success = run_pipeline(options.data_dir, options.seed, options.num_utterances, options.lm_order)
        return 0 if success else 1
    load_stage(args.command).main(argv[1:])
    return 0


if __name__ == "__main__":
    sys.exit(main())
