"""
JSON-lines manifests: one ``{"audio_filepath", "duration", "text"}`` object per
utterance. Relative audio paths are resolved against the manifest's folder.
"""

from pathlib import Path

import pandas as pd
from pydantic import BaseModel, Field


MANIFEST_COLUMNS = ["audio_filepath", "duration", "text"]


class ManifestEntry(BaseModel):
    audio_filepath: str
    duration: float = Field(gt=0)
    text: str


def read_manifest(path):
    """Read a manifest into ManifestEntry objects with absolute audio paths."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    if not path.read_text(encoding="utf-8").strip():
        return []
    frame = pd.read_json(path, lines=True, dtype={"text": str, "audio_filepath": str})
    missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path}: manifest is missing columns: {', '.join(missing)}")
    entries = []
    for record in frame[MANIFEST_COLUMNS].to_dict(orient="records"):
        audio = Path(record["audio_filepath"])
        if not audio.is_absolute():
            audio = path.parent / audio
        entries.append(ManifestEntry(audio_filepath=str(audio), duration=record["duration"], text=str(record["text"])))
    return entries


def write_manifest(entries, path, relative_to=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for entry in entries:
        row = entry.model_dump()
        if relative_to is not None:
            try:
                row["audio_filepath"] = str(Path(row["audio_filepath"]).relative_to(relative_to))
            except ValueError:
                pass
        rows.append(row)
    frame = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    frame.to_json(path, orient="records", lines=True, force_ascii=False)
    return path


def manifest_texts(entries):
    return [entry.text for entry in entries]
