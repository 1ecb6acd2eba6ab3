"""
Run-local records of utterances left out of training.

Each skip (infeasible CTC target, unreadable audio, empty transcript) is
appended as one JSONL record next to the run's other artifacts. Writing never
interrupts training.
"""

import json
import logging
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path


SKIPPED_FILENAME = "skipped_utterances.jsonl"


def default_skipped_path(run_dir):
    return Path(run_dir) / SKIPPED_FILENAME


def _timestamp():
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def record_skipped_utterance(
    *,
    stage,
    reason,
    audio_filepath=None,
    text=None,
    target_tokens=None,
    output_frames=None,
    path=None,
    created_at=None,
):
    """
    Append a single skipped-utterance record.

    Returns the record when it is written, or None if writing failed.
    """
    record = {
        "stage": stage,
        "reason": str(reason or "").strip(),
        "audio_filepath": audio_filepath,
        "text": text,
        "target_tokens": target_tokens,
        "output_frames": output_frames,
        "created_at": created_at or _timestamp(),
    }
    if path is None:
        return record

    output_path = Path(path)
    try:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with output_path.open("a", encoding="utf-8") as outfile:
            outfile.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            outfile.write("\n")
        return record
    except OSError as exc:
        logging.warning(f"Could not write skipped-utterance record to {output_path}: {exc}")
        return None


def summarize_skipped_utterances(path):
    """
    Count skipped-utterance records by stage and reason.

    Missing files return zero counts; malformed rows count as ``malformed``.
    """
    summary = {"total": 0, "by_stage": {}, "by_reason": {}}
    skipped_path = Path(path) if path is not None else None
    if skipped_path is None or not skipped_path.exists():
        return summary

    by_stage = Counter()
    by_reason = Counter()
    total = 0
    try:
        with skipped_path.open(encoding="utf-8") as infile:
            for line in infile:
                if not line.strip():
                    continue
                total += 1
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    by_stage["malformed"] += 1
                    by_reason["malformed"] += 1
                    continue
                by_stage[str(record.get("stage") or "unknown")] += 1
                by_reason[str(record.get("reason") or "unknown")] += 1
    except OSError as exc:
        logging.warning(f"Could not read skipped-utterance summary from {skipped_path}: {exc}")
        return summary

    summary["total"] = total
    summary["by_stage"] = dict(sorted(by_stage.items()))
    summary["by_reason"] = dict(sorted(by_reason.items()))
    return summary
