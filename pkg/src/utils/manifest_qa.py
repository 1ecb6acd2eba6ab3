"""
Pure validation helpers for ASR manifests and the audio they point to.

These checks only read files; they never rewrite a manifest or its audio.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import soundfile as sf

try:
    from utils.frontend import SAMPLE_RATE
    from utils.manifest import read_manifest
    from utils.tokenizer import normalize_text
except ImportError:
    from src.utils.frontend import SAMPLE_RATE
    from src.utils.manifest import read_manifest
    from src.utils.tokenizer import normalize_text


ManifestQAStatus = Literal["pass", "fail"]
DURATION_TOLERANCE = 0.02


@dataclass
class ManifestQAResult:
    status: ManifestQAStatus
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    entry_count: int = 0
    total_duration: float = 0.0


def _result(errors, warnings, entry_count, total_duration=0.0):
    status = "fail" if errors else "pass"
    return ManifestQAResult(
        status=status,
        errors=errors,
        warnings=warnings,
        entry_count=entry_count,
        total_duration=total_duration,
    )


def validate_entries(entries):
    """
    Validate already-read manifest entries.

    Args:
        entries: List of ManifestEntry objects with resolved audio paths.

    Returns:
        ManifestQAResult with pass/fail status, errors, warnings, and counts.
    """
    errors = []
    warnings = []
    if not entries:
        return _result(["Manifest has no entries."], warnings, 0)

    seen_paths = set()
    total_duration = 0.0
    for line_number, entry in enumerate(entries, start=1):
        audio_path = Path(entry.audio_filepath)
        if not normalize_text(entry.text):
            errors.append(f"line {line_number}: text is empty after normalization.")
        if str(audio_path) in seen_paths:
            warnings.append(f"line {line_number}: audio file '{audio_path.name}' is listed more than once.")
        seen_paths.add(str(audio_path))
        total_duration += entry.duration

        if not audio_path.exists():
            errors.append(f"line {line_number}: audio file '{audio_path}' does not exist.")
            continue
        try:
            info = sf.info(str(audio_path))
        except RuntimeError as exc:
            errors.append(f"line {line_number}: audio file '{audio_path.name}' is unreadable: {exc}")
            continue
        if info.samplerate != SAMPLE_RATE:
            errors.append(f"line {line_number}: '{audio_path.name}' is {info.samplerate} Hz, expected {SAMPLE_RATE} Hz.")
        if info.channels != 1:
            errors.append(f"line {line_number}: '{audio_path.name}' has {info.channels} channels, expected mono.")
        if info.subtype != "PCM_16":
            warnings.append(f"line {line_number}: '{audio_path.name}' is {info.subtype}, expected PCM_16.")
        if abs(info.duration - entry.duration) > DURATION_TOLERANCE:
            warnings.append(
                f"line {line_number}: duration {entry.duration:.3f}s differs from audio length {info.duration:.3f}s."
            )

    return _result(errors, warnings, len(entries), total_duration)


def validate_manifest(manifest_path):
    """Validate a manifest file from disk; unreadable manifests fail instead of raising."""
    path = Path(manifest_path)
    try:
        entries = read_manifest(path)
    except (OSError, ValueError) as exc:
        return _result([f"Could not read manifest '{path}': {exc}"], [], 0)
    return validate_entries(entries)
