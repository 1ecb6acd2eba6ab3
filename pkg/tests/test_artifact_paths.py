import unittest
from pathlib import Path

from src.utils.artifact_paths import (
    best_checkpoint_path,
    data_dir_paths,
    eval_report_path_for_hypotheses,
    hypotheses_name_for_manifest,
    hypotheses_path,
    last_checkpoint_path,
    metrics_log_path,
    run_config_path,
    wav_name_for_utterance,
)


class ArtifactPathTests(unittest.TestCase):
    def test_run_artifacts_live_in_the_run_dir(self):
        run_dir = Path("runs") / "desk"

        self.assertEqual(run_dir / "best.ckpt", best_checkpoint_path(run_dir))
        self.assertEqual(run_dir / "last.ckpt", last_checkpoint_path(run_dir))
        self.assertEqual(run_dir / "metrics.jsonl", metrics_log_path(run_dir))
        self.assertEqual(run_dir / "run_config.env", run_config_path(run_dir))
        self.assertIsNone(best_checkpoint_path(None))

    def test_hypotheses_name_uses_manifest_stem_and_decoding(self):
        self.assertEqual("dev_manifest.greedy.hyp.csv", hypotheses_name_for_manifest("dev_manifest.jsonl"))
        self.assertEqual("test.beam8_lm.hyp.csv", hypotheses_name_for_manifest("data/test.jsonl", " beam8_lm "))
        self.assertIsNone(hypotheses_name_for_manifest("   "))
        self.assertIsNone(hypotheses_name_for_manifest("dev.jsonl", ""))

    def test_hypotheses_path_and_report_sidecar(self):
        hyp_path = hypotheses_path("runs/desk", "dev.jsonl", "beam8")

        self.assertEqual(Path("runs/desk/dev.beam8.hyp.csv"), hyp_path)
        self.assertEqual(Path("runs/desk/dev.beam8.report.json"), eval_report_path_for_hypotheses(hyp_path))
        self.assertIsNone(hypotheses_path(None, "dev.jsonl"))
        self.assertIsNone(eval_report_path_for_hypotheses(None))

    def test_wav_names_are_zero_padded(self):
        self.assertEqual("utt_0007.wav", wav_name_for_utterance(7))
        self.assertEqual("utt_12345.wav", wav_name_for_utterance(12345))

    def test_data_dir_layout(self):
        paths = data_dir_paths("data/toy")

        self.assertEqual(Path("data/toy/train_manifest.jsonl"), paths["train_manifest"])
        self.assertEqual(Path("data/toy/dev_manifest.jsonl"), paths["dev_manifest"])
        self.assertEqual(Path("data/toy/audio"), paths["audio"])
        self.assertEqual(Path("data/toy/run"), paths["run"])
        self.assertIsNone(data_dir_paths(None))


if __name__ == "__main__":
    unittest.main()
