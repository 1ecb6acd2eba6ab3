import sys
import unittest
from pathlib import Path


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.utils.analysis import analyze, format_report_text, parameter_sweep
from src.utils.model import CitrinetConfig


class AnalyzeTests(unittest.TestCase):
    def test_largest_studied_model(self):
        report = analyze(CitrinetConfig(repeat=5, channels=1024, vocab_size=256))

        self.assertLess(abs(report.parameters - 142e6) / 142e6, 0.10)
        self.assertEqual(report.parameters, sum(report.breakdown.values()))
        self.assertEqual({101: 13, 1000: 125, 1601: 201}, report.output_lengths)
        self.assertIn("unbounded", report.se_context)

    def test_report_text_lists_scaled_layout(self):
        report = analyze(CitrinetConfig(repeat=1, channels=32, gamma=0.25, se_window=64))

        text = format_report_text(report)

        self.assertIn("megablock1: [3, 3, 3, 5, 5, 5]", text)
        self.assertIn(f"Receptive field: {report.receptive_field} frames", text)
        self.assertIn("64 frames per SE window", text)
        self.assertIn("gamma=0.25", text)

    def test_disabled_se_is_reported(self):
        report = analyze(CitrinetConfig(repeat=1, channels=32, se_enabled=False))

        self.assertEqual("none (SE disabled)", report.se_context)

    def test_wider_kernels_widen_the_receptive_field(self):
        narrow = analyze(CitrinetConfig(repeat=1, channels=32, gamma=0.25)).receptive_field
        wide = analyze(CitrinetConfig(repeat=1, channels=32, gamma=0.75)).receptive_field

        self.assertGreater(wide, narrow)


class ParameterSweepTests(unittest.TestCase):
    def test_grid_rows_and_monotone_counts(self):
        frame = parameter_sweep(CitrinetConfig(repeat=1, channels=32), channels=[32, 64], repeats=[1, 2])

        self.assertEqual(4, len(frame))
        self.assertEqual(["channels", "repeat", "vocab_size", "parameters", "params_m"], list(frame.columns))
        by_channels = frame[frame["repeat"] == 1].set_index("channels")["parameters"]
        self.assertGreater(by_channels[64], by_channels[32])
        by_repeat = frame[frame["channels"] == 32].set_index("repeat")["parameters"]
        self.assertGreater(by_repeat[2], by_repeat[1])


if __name__ == "__main__":
    unittest.main()
