"""
Synthetic toy speech: every character of a small word list is rendered as its
own pure tone, words are separated by short silences, and a little seeded noise
is added. Transcripts are always CTC-feasible for a character tokenizer after
the encoder's 8x time contraction.
"""

import logging
from pathlib import Path

import numpy as np

try:
    from utils.artifact_paths import wav_name_for_utterance
    from utils.frontend import SAMPLE_RATE, frame_count, write_wav
    from utils.manifest import ManifestEntry, write_manifest
    from utils.model import encoder_output_length
    from utils.tokenizer import ctc_feasible
except ImportError:
    from src.utils.artifact_paths import wav_name_for_utterance
    from src.utils.frontend import SAMPLE_RATE, frame_count, write_wav
    from src.utils.manifest import ManifestEntry, write_manifest
    from src.utils.model import encoder_output_length
    from src.utils.tokenizer import ctc_feasible


DEFAULT_WORDS = ("go", "no", "on", "so", "up")
MAX_WORDS = 30
CHAR_SECONDS = 0.16
GAP_SECONDS = 0.1
EDGE_SECONDS = 0.1
BASE_FREQUENCY = 300.0
FREQUENCY_STEP = 250.0
AMPLITUDE = 0.5
NOISE_LEVEL = 0.005


def char_frequencies(words):
    chars = sorted({char for word in words for char in word})
    return {char: BASE_FREQUENCY + FREQUENCY_STEP * index for index, char in enumerate(chars)}


def _tone(frequency, seconds):
    samples = int(round(seconds * SAMPLE_RATE))
    t = np.arange(samples) / SAMPLE_RATE
    envelope = np.hanning(samples) ** 0.25
    return AMPLITUDE * envelope * np.sin(2 * np.pi * frequency * t)


def _silence(seconds):
    return np.zeros(int(round(seconds * SAMPLE_RATE)))


def render_utterance(words, frequencies, rng):
    pieces = [_silence(EDGE_SECONDS)]
    for index, word in enumerate(words):
        if index:
            pieces.append(_silence(GAP_SECONDS))
        pieces.extend(_tone(frequencies[char], CHAR_SECONDS) for char in word)
    pieces.append(_silence(EDGE_SECONDS))
    samples = np.concatenate(pieces)
    return samples + NOISE_LEVEL * rng.standard_normal(samples.size)


def _char_targets(text):
    return list(text)


def _pad_until_feasible(samples, text):
    """Append silence until the character transcript fits the encoder output."""
    target = _char_targets(text)
    while not ctc_feasible(target, encoder_output_length(frame_count(samples.size))):
        samples = np.concatenate([samples, _silence(0.08)])
    return samples


def synth_utterances(num_utterances, words=DEFAULT_WORDS, rng=None, min_words=1, max_words=3):
    """Return ``(text, samples)`` pairs for ``num_utterances`` random word sequences."""
    words = [str(word).strip().lower() for word in words if str(word).strip()]
    if not words:
        raise ValueError("Synthetic vocabulary is empty")
    if len(words) > MAX_WORDS:
        raise ValueError(f"Synthetic vocabulary has {len(words)} words; at most {MAX_WORDS} are supported")
    if any(not word.isalpha() for word in words):
        raise ValueError("Synthetic words must be alphabetic")
    if not 1 <= min_words <= max_words:
        raise ValueError(f"Invalid word count range [{min_words}, {max_words}]")
    rng = rng if rng is not None else np.random.default_rng(0)
    frequencies = char_frequencies(words)
    utterances = []
    for _ in range(num_utterances):
        count = int(rng.integers(min_words, max_words + 1))
        chosen = [words[int(index)] for index in rng.integers(0, len(words), size=count)]
        text = " ".join(chosen)
        samples = _pad_until_feasible(render_utterance(chosen, frequencies, rng), text)
        utterances.append((text, samples))
    return utterances


def synth_data(out_dir, num_utterances, words=DEFAULT_WORDS, seed=0, manifest_name="manifest.jsonl"):
    """Write WAV files plus a manifest under ``out_dir`` and return the entries."""
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for index, (text, samples) in enumerate(synth_utterances(num_utterances, words, rng)):
        wav_path = audio_dir / wav_name_for_utterance(index)
        write_wav(wav_path, samples)
        entries.append(ManifestEntry(audio_filepath=str(wav_path), duration=samples.size / SAMPLE_RATE, text=text))
    manifest_path = write_manifest(entries, out_dir / manifest_name, relative_to=out_dir)
    logging.info(f"Wrote {len(entries)} synthetic utterances to {manifest_path}")
    return entries
