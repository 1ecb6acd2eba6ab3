import json
import tempfile
import unittest
from pathlib import Path

from src.utils.skipped_utterances import (
    default_skipped_path,
    record_skipped_utterance,
    summarize_skipped_utterances,
)


class SkippedUtteranceTests(unittest.TestCase):
    def test_appends_valid_jsonl_record_and_creates_parent(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            output_path = Path(temp_dir) / "nested" / "skipped_utterances.jsonl"

            record = record_skipped_utterance(
                stage="train",
                reason="target needs 14 frames, encoder gives 9",
                audio_filepath="audio/utt_0003.wav",
                text="go up so",
                target_tokens=14,
                output_frames=9,
                path=output_path,
                created_at="2026-07-01T00:00:00Z",
            )

            self.assertEqual("train", record["stage"])
            lines = output_path.read_text(encoding="utf-8").splitlines()
            self.assertEqual(1, len(lines))
            payload = json.loads(lines[0])
            self.assertEqual("audio/utt_0003.wav", payload["audio_filepath"])
            self.assertEqual(9, payload["output_frames"])
            self.assertEqual("2026-07-01T00:00:00Z", payload["created_at"])

    def test_tolerates_missing_optional_metadata(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            output_path = Path(temp_dir) / "skipped_utterances.jsonl"

            record_skipped_utterance(stage="dev", reason="  empty transcript ", path=output_path)

            payload = json.loads(output_path.read_text(encoding="utf-8"))
            self.assertEqual("empty transcript", payload["reason"])
            self.assertIsNone(payload["audio_filepath"])
            self.assertIsNone(payload["target_tokens"])
            self.assertTrue(payload["created_at"].endswith("Z"))

    def test_without_path_returns_record_only(self):
        record = record_skipped_utterance(stage="train", reason="unreadable audio")

        self.assertEqual("unreadable audio", record["reason"])

    def test_summarizes_counts_by_stage_and_reason(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            output_path = default_skipped_path(temp_dir)
            record_skipped_utterance(stage="train", reason="infeasible", path=output_path)
            record_skipped_utterance(stage="train", reason="infeasible", path=output_path)
            record_skipped_utterance(stage="dev", reason="empty transcript", path=output_path)
            with output_path.open("a", encoding="utf-8") as outfile:
                outfile.write("{not json\n\n")

            summary = summarize_skipped_utterances(output_path)

            self.assertEqual(4, summary["total"])
            self.assertEqual({"dev": 1, "malformed": 1, "train": 2}, summary["by_stage"])
            self.assertEqual({"empty transcript": 1, "infeasible": 2, "malformed": 1}, summary["by_reason"])

    def test_missing_file_summarizes_to_zero(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            summary = summarize_skipped_utterances(Path(temp_dir) / "missing.jsonl")

        self.assertEqual({"total": 0, "by_stage": {}, "by_reason": {}}, summary)
        self.assertEqual(0, summarize_skipped_utterances(None)["total"])

    def test_default_path_is_run_local(self):
        self.assertEqual(Path("runs/a") / "skipped_utterances.jsonl", default_skipped_path("runs/a"))


if __name__ == "__main__":
    unittest.main()
