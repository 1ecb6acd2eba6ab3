import importlib.util
import json
import math
import sys
import tempfile
import unittest
from pathlib import Path
from types import SimpleNamespace
from unittest.mock import patch


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


def load_smoke_module():
    module_path = ROOT / "scripts" / "desk_smoke.py"
    spec = importlib.util.spec_from_file_location("desk_smoke", module_path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def fake_report(wer):
    return SimpleNamespace(wer=wer, to_dict=lambda: {"wer": wer})


class DeskSmokeTests(unittest.TestCase):
    def setUp(self):
        self.smoke = load_smoke_module()

    def read_summary(self, output_dir):
        with (Path(output_dir) / "smoke_summary.json").open(encoding="utf-8") as infile:
            return json.load(infile)

    def test_grad_check_writes_a_passing_summary(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code = self.smoke.main(["grad-check", "--samples", "2", "--output-dir", tmpdir])
            summary = self.read_summary(tmpdir)

        self.assertEqual(0, exit_code)
        self.assertEqual("grad-check", summary["command"])
        self.assertEqual("pass", summary["status"])
        self.assertGreater(summary["checked"], 0)
        self.assertEqual([], summary["errors"])

    def test_se_ablation_records_both_dev_losses(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            exit_code = self.smoke.main(
                ["se-ablation", "--num-utterances", "3", "--steps", "2", "--output-dir", tmpdir]
            )
            summary = self.read_summary(tmpdir)
            run_dirs = {path.name for path in Path(tmpdir).iterdir() if path.name.startswith("run_")}

        self.assertEqual(0, exit_code)
        self.assertEqual("se-ablation", summary["command"])
        self.assertEqual(2, summary["steps"])
        self.assertEqual({"se", "no_se"}, set(summary["losses"]))
        self.assertEqual({"run_se", "run_no_se"}, run_dirs)
        for losses in summary["losses"].values():
            self.assertTrue(math.isfinite(losses["train_loss"]))
            self.assertTrue(math.isfinite(losses["dev_loss"]))
        self.assertIsInstance(summary["se_helps"], bool)

    def test_desk_failures_are_listed_in_the_summary(self):
        result = SimpleNamespace(
            steps_completed=300,
            final_loss=0.4,
            best_wer=25.0,
            skipped_utterances=0,
            best_checkpoint=Path("best.ckpt"),
            last_checkpoint=Path("last.ckpt"),
        )

        with tempfile.TemporaryDirectory() as tmpdir, \
                patch.object(self.smoke, "train", return_value=result), \
                patch.object(self.smoke, "evaluate", side_effect=[fake_report(25.0), fake_report(50.0)]):
            exit_code = self.smoke.main(["desk", "--num-utterances", "3", "--output-dir", tmpdir])
            summary = self.read_summary(tmpdir)
            manifest_written = (Path(tmpdir) / "train_manifest.jsonl").exists()

        self.assertEqual(1, exit_code)
        self.assertTrue(manifest_written)
        self.assertEqual("fail", summary["status"])
        self.assertEqual(3, len(summary["errors"]))
        self.assertIn("not below 0.1", summary["errors"][0])
        self.assertIn("greedy train WER is 25.00%", summary["errors"][1])
        self.assertIn("worse than greedy", summary["errors"][2])
        self.assertEqual({"wer": 50.0}, summary["eval"]["beam_lm"])


if __name__ == "__main__":
    unittest.main()
