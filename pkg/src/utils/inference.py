"""
Decoding and evaluation with a trained checkpoint.
"""

import json
import logging
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, PositiveInt

try:
    from utils.checkpoint import load_checkpoint
    from utils.ctc import beam_search, greedy_decode
    from utils.frontend import log_mel, read_wav
    from utils.language_model import load_lm
    from utils.manifest import read_manifest
    from utils.metrics import evaluate_transcripts, word_counts, error_rate
    from utils.model import forward
    from utils.tokenizer import decode, load_tokenizer, normalize_text
except ImportError:
    from src.utils.checkpoint import load_checkpoint
    from src.utils.ctc import beam_search, greedy_decode
    from src.utils.frontend import log_mel, read_wav
    from src.utils.language_model import load_lm
    from src.utils.manifest import read_manifest
    from src.utils.metrics import evaluate_transcripts, word_counts, error_rate
    from src.utils.model import forward
    from src.utils.tokenizer import decode, load_tokenizer, normalize_text


class VocabularyMismatchError(ValueError):
    """Checkpoint head and tokenizer disagree on the vocabulary size."""


class DecodeParams(BaseModel):
    mode: Literal["greedy", "beam"] = "greedy"
    beam_width: PositiveInt = 8
    alpha: float = Field(default=0.5, ge=0.0)
    beta: float = 1.0
    rescore: bool = False

    def describe(self, with_lm=False):
        if self.mode == "greedy":
            return "greedy"
        label = f"beam{self.beam_width}"
        if with_lm:
            label += f"+lm(alpha={self.alpha:g},beta={self.beta:g}{',rescore' if self.rescore else ''})"
        return label


def check_vocabulary(model, tokenizer):
    if model.cfg.vocab_size != tokenizer.size:
        raise VocabularyMismatchError(
            f"Checkpoint predicts {model.cfg.vocab_size} tokens but the tokenizer has {tokenizer.size}"
        )


def load_decoder(checkpoint_path, tokenizer_path, lm_path=None):
    checkpoint = load_checkpoint(checkpoint_path)
    tokenizer = load_tokenizer(tokenizer_path)
    check_vocabulary(checkpoint.model, tokenizer)
    lm = load_lm(lm_path) if lm_path else None
    if lm is not None and lm.vocab_size > tokenizer.size:
        raise VocabularyMismatchError(
            f"Language model covers {lm.vocab_size} tokens but the tokenizer has {tokenizer.size}"
        )
    return checkpoint.model, tokenizer, lm


def tokens_to_text(tokenizer, tokens):
    return " ".join(decode(tokenizer, tokens).split())


def transcribe_features(model, features, tokenizer, params=None, lm=None):
    """Return ``(text, best Hypothesis or None)`` for one FeatureMatrix."""
    params = params or DecodeParams()
    logp = forward(model, features, mode="eval")
    if params.mode == "greedy":
        return tokens_to_text(tokenizer, greedy_decode(logp)), None
    hypotheses = beam_search(
        logp,
        params.beam_width,
        lm=lm,
        alpha=params.alpha,
        beta=params.beta,
        rescore=params.rescore,
    )
    best = hypotheses[0]
    return tokens_to_text(tokenizer, best.tokens), best


def greedy_transcripts(model, feature_list, tokenizer):
    return [transcribe_features(model, features, tokenizer)[0] for features in feature_list]


def transcribe_files(model, tokenizer, paths, params=None, lm=None):
    results = []
    for path in paths:
        features = log_mel(read_wav(path))
        text, best = transcribe_features(model, features, tokenizer, params, lm)
        results.append(
            {
                "audio_filepath": str(path),
                "text": text,
                "score": None if best is None else best.combined,
            }
        )
    return results


def evaluate(checkpoint_path, manifest_path, tokenizer_path, params=None, lm_path=None, dump_path=None):
    """Decode every manifest entry and score it; optionally dump per-utterance rows."""
    params = params or DecodeParams()
    model, tokenizer, lm = load_decoder(checkpoint_path, tokenizer_path, lm_path)
    entries = read_manifest(manifest_path)
    if not entries:
        raise ValueError(f"Manifest {manifest_path} has no entries")
    if params.mode == "beam" and lm is None and lm_path is None:
        logging.info("Beam decoding without a language model")

    references = []
    hypotheses = []
    rows = []
    for entry in entries:
        reference = normalize_text(entry.text)
        text, best = transcribe_features(model, log_mel(read_wav(entry.audio_filepath)), tokenizer, params, lm)
        references.append(reference)
        hypotheses.append(text)
        rows.append(
            {
                "audio_filepath": entry.audio_filepath,
                "reference": reference,
                "hypothesis": text,
                "wer": error_rate(word_counts(reference, text)),
                "score": np.nan if best is None else best.combined,
            }
        )

    report = evaluate_transcripts(references, hypotheses, decoding=params.describe(with_lm=lm is not None))
    logging.info(
        f"Evaluated {report.utterances} utterances with {report.decoding}: "
        f"WER {report.wer:.2f}% CER {report.cer:.2f}%"
    )
    if dump_path is not None:
        dump_path = Path(dump_path)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(dump_path, index=False)
        logging.info(f"Wrote hypotheses to {dump_path}")
    return report


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
