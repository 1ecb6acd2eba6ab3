import json
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

import main
from main import (
    PipelineStepSummary,
    collect_eval_reports,
    format_pipeline_summary_markdown,
    format_pipeline_summary_text,
    pipeline_steps,
    write_github_step_summary,
)
from src.utils.skipped_utterances import default_skipped_path, record_skipped_utterance


def write_run_artifacts(data_dir):
    run_dir = Path(data_dir) / "run"
    run_dir.mkdir(parents=True)
    (run_dir / "metrics.jsonl").write_text(
        '{"step": 50, "loss": 2.5, "lr": 0.05, "wer": 90.0}\n'
        '{"step": 100, "loss": 0.0312, "lr": 0.04, "wer": 12.5}\n',
        encoding="utf-8",
    )
    (run_dir / "dev_manifest.greedy.report.json").write_text(
        json.dumps({"decoding": "greedy", "wer": 10.0}), encoding="utf-8"
    )
    (run_dir / "dev_manifest.beam.report.json").write_text(
        json.dumps({"decoding": "beam8+lm(alpha=0.5,beta=1)", "wer": 5.0}), encoding="utf-8"
    )
    (run_dir / "broken.report.json").write_text("{not json", encoding="utf-8")
    record_skipped_utterance(stage="train", reason="ctc_infeasible", path=default_skipped_path(run_dir))
    return run_dir


class PipelineSummaryTests(unittest.TestCase):
    def test_formats_successful_and_failed_step_rows(self):
        steps = [
            PipelineStepSummary(1, 2, "SynthData", "success", 1.234),
            PipelineStepSummary(2, 2, "Train", "failed", 0.5, "boom | pipe"),
        ]

        with tempfile.TemporaryDirectory() as temp_dir:
            text = format_pipeline_summary_text(
                steps,
                pipeline_success=False,
                completed_steps=1,
                total_steps=2,
                total_runtime_seconds=1.734,
                base_dir=Path(temp_dir),
            )
            markdown = format_pipeline_summary_markdown(
                steps,
                pipeline_success=False,
                completed_steps=1,
                total_steps=2,
                total_runtime_seconds=1.734,
                base_dir=Path(temp_dir),
            )

        self.assertIn("Overall status: completed with errors", text)
        self.assertIn("Steps completed: 1/2", text)
        self.assertIn("Final training loss: unavailable", text)
        self.assertIn("Evaluation WER: unavailable", text)
        self.assertIn("Skipped utterances: 0", text)
        self.assertIn("| Skipped utterances | 0 |", markdown)
        self.assertIn("1/2 SynthData: success in 1.23s", text)
        self.assertIn("2/2 Train: failed in 0.50s - boom | pipe", text)
        self.assertIn("| 2/2 Train | failed | 0.50s | boom \\| pipe |", markdown)

    def test_includes_training_and_evaluation_results(self):
        steps = [PipelineStepSummary(1, 1, "Train", "success", 2.0)]

        with tempfile.TemporaryDirectory() as temp_dir:
            base_dir = Path(temp_dir)
            run_dir = write_run_artifacts(base_dir)

            reports = collect_eval_reports(run_dir)
            text = format_pipeline_summary_text(
                steps,
                pipeline_success=True,
                completed_steps=1,
                total_steps=1,
                total_runtime_seconds=2.0,
                base_dir=base_dir,
            )

        self.assertEqual({"beam8+lm(alpha=0.5,beta=1)": 5.0, "greedy": 10.0}, reports)
        self.assertIn("Overall status: success", text)
        self.assertIn("Training steps logged: 100", text)
        self.assertIn("Final training loss: 0.0312", text)
        self.assertIn("Best dev WER: 12.50%", text)
        self.assertIn("beam8+lm(alpha=0.5,beta=1)=5.00%, greedy=10.00%", text)
        self.assertIn("Skipped utterances: 1", text)

    def test_missing_run_folder_has_no_reports(self):
        self.assertEqual({}, collect_eval_reports("/nonexistent/run"))

    def test_writes_markdown_to_fake_github_summary_path(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            summary_path = Path(temp_dir) / "summary.md"
            wrote = write_github_step_summary(
                "## Summary\n\nBody",
                env={"GITHUB_STEP_SUMMARY": str(summary_path)},
            )

            self.assertTrue(wrote)
            self.assertEqual("## Summary\n\nBody\n", summary_path.read_text(encoding="utf-8"))

    def test_github_summary_writer_noops_when_unset(self):
        self.assertFalse(write_github_step_summary("## Summary", env={}))


class PipelineRunTests(unittest.TestCase):
    def test_steps_follow_the_desk_protocol(self):
        steps = pipeline_steps("data/toy", seed=3, num_utterances=10)

        self.assertEqual(
            ["SynthData", "TrainTokenizer", "TrainLM", "Train", "EvaluateGreedy", "EvaluateBeamLM", "Analyze"],
            [name for name, _, _ in steps],
        )
        commands = {command for _, command, _ in steps}
        self.assertTrue(commands <= set(main.STAGES))
        train_argv = steps[3][2]
        self.assertIn("--desk", train_argv)
        self.assertEqual("3", train_argv[train_argv.index("--seed") + 1])
        self.assertIn("--lm", steps[5][2])
        self.assertNotIn("--lm", steps[4][2])

    def test_failing_steps_are_recorded_and_later_steps_still_run(self):
        calls = []

        def fake_stage(command):
            def run(argv):
                calls.append(command)
                if command == "train":
                    raise SystemExit(2)
                if command == "evaluate":
                    raise RuntimeError("checkpoint missing")
                return None

            return mock.Mock(main=run)

        with tempfile.TemporaryDirectory() as temp_dir, \
                mock.patch.object(main, "load_stage", side_effect=fake_stage), \
                mock.patch.object(main, "run_desk_analysis", return_value=None), \
                mock.patch.object(main, "emit_pipeline_summary") as emit:
            success = main.run_pipeline(temp_dir)

        self.assertFalse(success)
        self.assertEqual(["synth-data", "train-tokenizer", "train-lm", "train", "evaluate", "evaluate"], calls)
        step_summaries, pipeline_success, completed_steps, total_steps = emit.call_args.args[:4]
        self.assertFalse(pipeline_success)
        self.assertEqual((4, 7), (completed_steps, total_steps))
        self.assertEqual(
            ["success", "success", "success", "failed", "failed", "failed", "success"],
            [step.status for step in step_summaries],
        )
        self.assertEqual("exited with code 2", step_summaries[3].note)
        self.assertEqual("checkpoint missing", step_summaries[4].note)


if __name__ == "__main__":
    unittest.main()
