"""
CTC training loop: duration-bucketed batches, NovoGrad with warmup + cosine
LR, periodic greedy dev WER, best/last checkpoints and a JSONL metrics log.

A single numpy Generator drives bucket choice, SpecAugment and dropout. Its
state is stored in every checkpoint, so a resumed run repeats the losses of an
uninterrupted one.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

try:
    from utils.artifact_paths import best_checkpoint_path, last_checkpoint_path, metrics_log_path, run_config_path
    from utils.checkpoint import load_checkpoint, restore_rng, save_checkpoint
    from utils.ctc import ctc_batch_loss, ctc_loss
    from utils.frontend import FeatureMatrix, log_mel, read_wav, spec_augment, stack_features
    from utils.inference import greedy_transcripts
    from utils.metrics import evaluate_transcripts
    from utils.model import Citrinet, encoder_output_length, forward
    from utils.optim import NonFiniteGradientError, NovoGrad, lr_at
    from utils.run_config import save_run_config
    from utils.skipped_utterances import default_skipped_path, record_skipped_utterance
    from utils.tensor_core import backward
    from utils.tokenizer import ctc_feasible, encode, normalize_text
except ImportError:
    from src.utils.artifact_paths import best_checkpoint_path, last_checkpoint_path, metrics_log_path, run_config_path
    from src.utils.checkpoint import load_checkpoint, restore_rng, save_checkpoint
    from src.utils.ctc import ctc_batch_loss, ctc_loss
    from src.utils.frontend import FeatureMatrix, log_mel, read_wav, spec_augment, stack_features
    from src.utils.inference import greedy_transcripts
    from src.utils.metrics import evaluate_transcripts
    from src.utils.model import Citrinet, encoder_output_length, forward
    from src.utils.optim import NonFiniteGradientError, NovoGrad, lr_at
    from src.utils.run_config import save_run_config
    from src.utils.skipped_utterances import default_skipped_path, record_skipped_utterance
    from src.utils.tensor_core import backward
    from src.utils.tokenizer import ctc_feasible, encode, normalize_text


class TrainingDivergedError(FloatingPointError):
    """Loss or gradients became non-finite."""


@dataclass
class PreparedUtterance:
    features: FeatureMatrix
    target: list
    text: str
    audio_filepath: str

    @property
    def frames(self):
        return self.features.frames


@dataclass
class TrainResult:
    steps_completed: int
    losses: dict = field(default_factory=dict)
    best_wer: float = math.inf
    best_checkpoint: Optional[Path] = None
    last_checkpoint: Optional[Path] = None
    metrics_log: Optional[Path] = None
    skipped_utterances: int = 0
    train_utterances: int = 0

    @property
    def final_loss(self):
        if not self.losses:
            return None
        return self.losses[max(self.losses)]


def prepare_utterances(entries, tokenizer, stage="train", skip_log=None):
    """Extract features and targets; infeasible targets are skipped with a warning."""
    prepared = []
    skipped = 0
    for entry in entries:
        text = normalize_text(entry.text)
        if not text:
            logging.warning(f"Skipping {entry.audio_filepath}: transcript is empty after normalization")
            record_skipped_utterance(stage=stage, reason="empty_transcript", audio_filepath=entry.audio_filepath, path=skip_log)
            skipped += 1
            continue
        features = log_mel(read_wav(entry.audio_filepath))
        target = encode(tokenizer, text)
        output_frames = encoder_output_length(features.frames)
        if not ctc_feasible(target, output_frames):
            logging.warning(
                f"Skipping {entry.audio_filepath}: {len(target)} target tokens do not fit {output_frames} output frames"
            )
            record_skipped_utterance(
                stage=stage,
                reason="ctc_infeasible",
                audio_filepath=entry.audio_filepath,
                text=text,
                target_tokens=len(target),
                output_frames=output_frames,
                path=skip_log,
            )
            skipped += 1
            continue
        prepared.append(PreparedUtterance(features, target, text, entry.audio_filepath))
    return prepared, skipped


def make_buckets(prepared, batch_size):
    """Group utterance indices into batches of similar length."""
    order = sorted(range(len(prepared)), key=lambda index: (prepared[index].frames, index))
    return [order[start:start + batch_size] for start in range(0, len(order), batch_size)]


def dev_wer(model, prepared, tokenizer):
    if not prepared:
        return None
    hypotheses = greedy_transcripts(model, [utt.features for utt in prepared], tokenizer)
    return evaluate_transcripts([utt.text for utt in prepared], hypotheses).wer


def dev_loss(model, prepared):
    """Mean per-utterance CTC loss in eval mode, or None without utterances."""
    if not prepared:
        return None
    losses = [ctc_loss(forward(model, utt.features, mode="eval"), utt.target)[0] for utt in prepared]
    return float(np.mean(losses))


def _append_metrics(path, record):
    with Path(path).open("a", encoding="utf-8") as outfile:
        outfile.write(json.dumps(record, sort_keys=True))
        outfile.write("\n")


def _diagnostics(model, step, lr, batch):
    largest = max(float(np.max(np.abs(param.tensor.data))) for param in model.parameters)
    texts = ", ".join(repr(utt.text) for utt in batch[:3])
    return f"step {step}, lr {lr:.6g}, largest |weight| {largest:.4g}, batch starts with {texts}"


def train(run_config, train_entries, dev_entries, tokenizer, run_dir, resume_from=None, stop_at_step=None):
    """
    Train a Citrinet model and write checkpoints plus a metrics log to ``run_dir``.

    Args:
        run_config: RunConfig; the model vocabulary is taken from ``tokenizer``.
        train_entries: ManifestEntry list used for optimization.
        dev_entries: ManifestEntry list for greedy WER model selection.
        tokenizer: trained TokenizerModel.
        run_dir: output folder.
        resume_from: optional checkpoint to continue from.
        stop_at_step: optional step after which to stop early (checkpoint kept).

    Returns:
        TrainResult with per-step losses and artifact paths.
    """
    if not train_entries:
        raise ValueError("Training manifest is empty")
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    schedule = run_config.schedule
    dtype = np.dtype(run_config.dtype)

    model_cfg = run_config.model
    if model_cfg.vocab_size != tokenizer.size:
        logging.info(f"Setting model vocab_size to the tokenizer size {tokenizer.size}")
        model_cfg = model_cfg.model_copy(update={"vocab_size": tokenizer.size})
        run_config = run_config.model_copy(update={"model": model_cfg})

    skip_log = default_skipped_path(run_dir)
    metrics_path = metrics_log_path(run_dir)
    start_step = 0
    best_wer = math.inf
    if resume_from is not None:
        checkpoint = load_checkpoint(resume_from)
        if checkpoint.config != model_cfg:
            raise ValueError(f"Checkpoint {resume_from} was trained with a different model config")
        model = checkpoint.model
        start_step = checkpoint.step
        rng = restore_rng(checkpoint.rng_state) if checkpoint.rng_state else np.random.default_rng(run_config.seed + 1)
        best_wer = float(checkpoint.meta.get("best_wer", math.inf))
        logging.info(f"Resuming from {resume_from} at step {start_step}")
    else:
        model = Citrinet(model_cfg, rng=np.random.default_rng(run_config.seed), dtype=dtype)
        rng = np.random.default_rng(run_config.seed + 1)
        for stale in (metrics_path, skip_log):
            if stale.exists():
                stale.unlink()
        save_run_config(run_config, run_config_path(run_dir))

    optimizer = NovoGrad(
        model.parameters,
        beta1=run_config.beta1,
        beta2=run_config.beta2,
        weight_decay=run_config.weight_decay,
    )
    if resume_from is not None and checkpoint.optimizer_state is not None:
        optimizer.load_state_dict(checkpoint.optimizer_state)

    prepared, skipped = prepare_utterances(train_entries, tokenizer, "train", None if resume_from else skip_log)
    dev_prepared, _ = prepare_utterances(dev_entries or [], tokenizer, "dev", None)
    if not prepared:
        raise ValueError("No training utterance has a CTC-feasible target")
    logging.info(f"Training on {len(prepared)} utterances ({skipped} skipped), {len(dev_prepared)} dev utterances")
    buckets = make_buckets(prepared, run_config.batch_size)

    result = TrainResult(
        steps_completed=start_step,
        best_wer=best_wer,
        metrics_log=metrics_path,
        skipped_utterances=skipped,
        train_utterances=len(prepared),
    )
    best_path = best_checkpoint_path(run_dir)
    last_path = last_checkpoint_path(run_dir)
    end_step = schedule.total_steps if stop_at_step is None else min(stop_at_step, schedule.total_steps)

    for step in range(start_step + 1, end_step + 1):
        lr = lr_at(schedule, step)
        batch = [prepared[index] for index in buckets[int(rng.integers(len(buckets)))]]
        features = [utt.features for utt in batch]
        if run_config.spec_augment.enabled:
            features = [spec_augment(feature, run_config.spec_augment, rng) for feature in features]
        values, lengths = stack_features(features, dtype=dtype)

        model.zero_grad()
        logp, out_lengths = model.forward_batch(values, lengths, training=True, rng=rng)
        loss = ctc_batch_loss(logp, [utt.target for utt in batch], out_lengths)
        loss_value = loss.item()
        if not math.isfinite(loss_value):
            details = _diagnostics(model, step, lr, batch)
            logging.error(f"Non-finite training loss: {details}")
            raise TrainingDivergedError(f"Loss became {loss_value} at step {step}")
        backward(loss)
        try:
            optimizer.step(lr)
        except NonFiniteGradientError as exc:
            logging.error(f"Non-finite gradient: {_diagnostics(model, step, lr, batch)}")
            raise TrainingDivergedError(str(exc)) from exc

        result.losses[step] = loss_value
        result.steps_completed = step
        record = None
        if step % run_config.log_every == 0 or step == 1:
            record = {"step": step, "loss": loss_value, "lr": lr, "wer": None}
            logging.info(f"step {step}: loss {loss_value:.4f} lr {lr:.5f}")
        if step % run_config.eval_every == 0 or step == schedule.total_steps:
            wer = dev_wer(model, dev_prepared, tokenizer)
            record = {"step": step, "loss": loss_value, "lr": lr, "wer": wer}
            if wer is not None:
                logging.info(f"step {step}: dev WER {wer:.2f}%")
                if wer <= result.best_wer:
                    result.best_wer = wer
                    save_checkpoint(best_path, model, optimizer, step, rng, meta={"best_wer": wer})
                    result.best_checkpoint = best_path
        if record is not None:
            _append_metrics(metrics_path, record)

    save_checkpoint(last_path, model, optimizer, result.steps_completed, rng, meta={"best_wer": result.best_wer})
    result.last_checkpoint = last_path
    if result.best_checkpoint is None and best_path.exists():
        result.best_checkpoint = best_path
    return result


def describe_train_result(result):
    loss = "n/a" if result.final_loss is None else f"{result.final_loss:.4f}"
    wer = "n/a" if not math.isfinite(result.best_wer) else f"{result.best_wer:.2f}%"
    return (
        f"Finished {result.steps_completed} steps: final loss {loss}, "
        f"best dev WER {wer}, {result.skipped_utterances} utterances skipped"
    )


def summarize_metrics_log(path):
    """Condense a metrics JSONL log into headline numbers."""
    path = Path(path)
    summary = {"records": 0, "last_step": None, "final_loss": None, "min_loss": None, "best_wer": None}
    if not path.exists() or not path.read_text(encoding="utf-8").strip():
        return summary
    frame = pd.read_json(path, lines=True)
    summary["records"] = int(len(frame))
    summary["last_step"] = int(frame["step"].max())
    summary["final_loss"] = float(frame.loc[frame["step"].idxmax(), "loss"])
    summary["min_loss"] = float(frame["loss"].min())
    if "wer" in frame and frame["wer"].notna().any():
        summary["best_wer"] = float(frame["wer"].min())
    return summary
