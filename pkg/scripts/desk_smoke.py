#!/usr/bin/env python3
"""
Local no-side-effect smoke harness for the Citrinet desk-scale protocol.

Everything is written to a scratch directory (default /tmp/citrinet_smoke_<timestamp>)
and summarized in smoke_summary.json:

  desk         synthesize 20 utterances, train a char tokenizer and a 2-gram LM,
               train the reduced model for 300 steps, evaluate greedy and LM beam
               decoding on the memorized set
  se-ablation  train the reduced model with and without SE for a fixed number of
               steps and record both dev losses (trend check only)
  grad-check   finite-difference check of a tiny float64 model
"""

import argparse
import json
import sys
from datetime import datetime
from pathlib import Path

import numpy as np


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.utils.artifact_paths import data_dir_paths, hypotheses_path
from src.utils.checkpoint import load_checkpoint
from src.utils.ctc import ctc_batch_loss
from src.utils.inference import DecodeParams, evaluate
from src.utils.language_model import save_lm, train_lm
from src.utils.logging_config import configure_logging
from src.utils.model import Citrinet, CitrinetConfig
from src.utils.run_config import desk_run_config
from src.utils.synth_data import synth_data
from src.utils.tensor_core import check_gradients
from src.utils.tokenizer import encode, save_tokenizer, train_tokenizer
from src.utils.trainer import dev_loss, prepare_utterances, train

configure_logging()

LOSS_TARGET = 0.1
DEFAULT_UTTERANCES = 20
DEFAULT_ABLATION_STEPS = 100


def default_output_dir():
    stamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return Path("/tmp") / f"citrinet_smoke_{stamp}"


def ensure_output_dir(path):
    output_dir = Path(path) if path else default_output_dir()
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as outfile:
        json.dump(payload, outfile, indent=2, sort_keys=True)
        outfile.write("\n")


def base_summary(command, output_dir, seed):
    return {
        "command": command,
        "output_dir": str(output_dir),
        "seed": seed,
        "status": "pass",
        "errors": [],
    }


def write_summary(output_dir, summary):
    if summary["errors"]:
        summary["status"] = "fail"
    write_json(Path(output_dir) / "smoke_summary.json", summary)
    print(f"{summary['command']}: {summary['status']} ({output_dir / 'smoke_summary.json'})")
    return summary


def prepare_toy_data(output_dir, seed, num_utterances=DEFAULT_UTTERANCES, lm_order=2):
    """Synthesize data, then train and save the char tokenizer and the n-gram LM."""
    paths = data_dir_paths(output_dir)
    entries = synth_data(output_dir, num_utterances, seed=seed, manifest_name=paths["train_manifest"].name)
    texts = [entry.text for entry in entries]
    tokenizer = train_tokenizer(texts, None, kind="char")
    save_tokenizer(tokenizer, paths["tokenizer"])
    lm = train_lm([encode(tokenizer, text) for text in texts], lm_order, vocab_size=tokenizer.size)
    save_lm(lm, paths["lm"])
    return paths, entries, tokenizer


def run_desk(args):
    output_dir = ensure_output_dir(args.output_dir)
    summary = base_summary("desk", output_dir, args.seed)
    paths, entries, tokenizer = prepare_toy_data(output_dir, args.seed, args.num_utterances)

    run_config = desk_run_config(seed=args.seed, vocab_size=tokenizer.size)
    result = train(run_config, entries, entries, tokenizer, paths["run"])
    checkpoint = result.best_checkpoint or result.last_checkpoint
    summary["train"] = {
        "steps": result.steps_completed,
        "final_loss": result.final_loss,
        "best_wer": result.best_wer,
        "skipped_utterances": result.skipped_utterances,
        "vocab_size": tokenizer.size,
    }

    manifest = paths["train_manifest"]
    greedy = evaluate(
        checkpoint,
        manifest,
        paths["tokenizer"],
        DecodeParams(),
        dump_path=hypotheses_path(paths["run"], manifest.name, "greedy"),
    )
    beam = evaluate(
        checkpoint,
        manifest,
        paths["tokenizer"],
        DecodeParams(mode="beam", beam_width=args.beam_width, alpha=args.alpha, beta=args.beta),
        lm_path=paths["lm"],
        dump_path=hypotheses_path(paths["run"], manifest.name, "beam_lm"),
    )
    summary["eval"] = {"greedy": greedy.to_dict(), "beam_lm": beam.to_dict()}

    if result.final_loss is None or result.final_loss >= LOSS_TARGET:
        summary["errors"].append(f"final training loss {result.final_loss} is not below {LOSS_TARGET}")
    if greedy.wer != 0.0:
        summary["errors"].append(f"greedy train WER is {greedy.wer:.2f}%, expected 0%")
    if beam.wer > greedy.wer:
        summary["errors"].append(f"LM beam WER {beam.wer:.2f}% is worse than greedy {greedy.wer:.2f}%")
    return write_summary(output_dir, summary)


def run_se_ablation(args):
    output_dir = ensure_output_dir(args.output_dir)
    summary = base_summary("se-ablation", output_dir, args.seed)
    paths, entries, tokenizer = prepare_toy_data(output_dir, args.seed, args.num_utterances)
    dev_prepared, _ = prepare_utterances(entries, tokenizer, "dev", None)

    losses = {}
    for label, enabled in (("se", True), ("no_se", False)):
        run_config = desk_run_config(seed=args.seed, vocab_size=tokenizer.size)
        model_cfg = run_config.model.model_copy(update={"se_enabled": enabled})
        run_config = run_config.model_copy(update={"model": model_cfg})
        run_dir = paths["run"].with_name(f"run_{label}")
        result = train(run_config, entries, [], tokenizer, run_dir, stop_at_step=args.steps)

        model = load_checkpoint(result.last_checkpoint).model
        losses[label] = {"train_loss": result.final_loss, "dev_loss": dev_loss(model, dev_prepared)}

    summary["steps"] = args.steps
    summary["losses"] = losses
    summary["se_helps"] = losses["se"]["dev_loss"] <= losses["no_se"]["dev_loss"]
    return write_summary(output_dir, summary)


def run_grad_check(args):
    output_dir = ensure_output_dir(args.output_dir)
    summary = base_summary("grad-check", output_dir, args.seed)
    rng = np.random.default_rng(args.seed)
    cfg = CitrinetConfig(repeat=1, channels=8, vocab_size=3, gamma=0.25, epilog_channels=8, dropout_p=0.0)
    model = Citrinet(cfg, rng=rng, dtype=np.float64)
    features = rng.standard_normal((2, cfg.feat_in, 16))
    lengths = np.array([16, 12])
    targets = [[0, 1], [2]]

    def loss_fn():
        logp, out_lengths = model.forward_batch(features, lengths, training=True, rng=np.random.default_rng(0))
        return ctc_batch_loss(logp, targets, out_lengths)

    check = check_gradients(loss_fn, model.parameters, samples=args.samples, rng=rng)
    summary["max_relative_error"] = check.max_error
    summary["checked"] = check.checked
    summary["worst"] = check.worst
    if not check.ok:
        summary["errors"].extend(check.failures[:10])
    return write_summary(output_dir, summary)


def add_common_options(parser):
    parser.add_argument("--output-dir", help="Scratch output directory. Defaults to /tmp/citrinet_smoke_<timestamp>.")
    parser.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    subparsers = parser.add_subparsers(dest="command", required=True)

    desk_parser = subparsers.add_parser("desk", help="Run the full desk-scale protocol.")
    add_common_options(desk_parser)
    desk_parser.add_argument("--num-utterances", type=int, default=DEFAULT_UTTERANCES)
    desk_parser.add_argument("--beam-width", type=int, default=8)
    desk_parser.add_argument("--alpha", type=float, default=0.5)
    desk_parser.add_argument("--beta", type=float, default=1.0)
    desk_parser.set_defaults(func=run_desk)

    ablation_parser = subparsers.add_parser("se-ablation", help="Compare dev loss with and without SE.")
    add_common_options(ablation_parser)
    ablation_parser.add_argument("--num-utterances", type=int, default=DEFAULT_UTTERANCES)
    ablation_parser.add_argument("--steps", type=int, default=DEFAULT_ABLATION_STEPS)
    ablation_parser.set_defaults(func=run_se_ablation)

    grad_parser = subparsers.add_parser("grad-check", help="Finite-difference check of a tiny model.")
    add_common_options(grad_parser)
    grad_parser.add_argument("--samples", type=int, default=200)
    grad_parser.set_defaults(func=run_grad_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    summary = args.func(args)
    return 0 if summary["status"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
