"""
Names and paths of the artifacts a training or evaluation run leaves behind.

The helpers are pure: they do not create, read, or write files.
"""

from pathlib import Path


BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
METRICS_LOG = "metrics.jsonl"
RUN_CONFIG = "run_config.env"


def _clean_name(value):
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def best_checkpoint_path(run_dir):
    return Path(run_dir) / BEST_CHECKPOINT if run_dir is not None else None


def last_checkpoint_path(run_dir):
    return Path(run_dir) / LAST_CHECKPOINT if run_dir is not None else None


def metrics_log_path(run_dir):
    return Path(run_dir) / METRICS_LOG if run_dir is not None else None


def run_config_path(run_dir):
    return Path(run_dir) / RUN_CONFIG if run_dir is not None else None


def hypotheses_name_for_manifest(manifest_name, decoding="greedy"):
    """Return the hypothesis CSV name for a manifest and decoding mode."""
    clean_manifest = _clean_name(manifest_name)
    clean_decoding = _clean_name(decoding)
    if not clean_manifest or not clean_decoding:
        return None
    return f"{Path(clean_manifest).stem}.{clean_decoding}.hyp.csv"


def hypotheses_path(run_dir, manifest_name, decoding="greedy"):
    name = hypotheses_name_for_manifest(manifest_name, decoding)
    if run_dir is None or not name:
        return None
    return Path(run_dir) / name


def eval_report_path_for_hypotheses(hypotheses_file):
    """Return the JSON report sidecar adjacent to a hypothesis CSV."""
    if not hypotheses_file:
        return None
    path = Path(hypotheses_file)
    return path.with_name(path.name.replace(".hyp.csv", ".report.json"))


def wav_name_for_utterance(index):
    return f"utt_{int(index):04d}.wav"


def data_dir_paths(data_dir):
    """Return the standard toy-pipeline layout under ``data_dir``."""
    if data_dir is None:
        return None
    root = Path(data_dir)
    return {
        "audio": root / "audio",
        "train_manifest": root / "train_manifest.jsonl",
        "dev_manifest": root / "dev_manifest.jsonl",
        "tokenizer": root / "tokenizer.txt",
        "lm": root / "lm.txt",
        "run": root / "run",
    }
