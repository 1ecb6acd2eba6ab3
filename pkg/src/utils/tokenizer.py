"""
Character and sub-word tokenizers for CTC targets and the n-gram LM.

Text is normalized (lowercase, punctuation other than apostrophes removed,
single spaces). Every space becomes the boundary marker ``▁``, which prefixes the
word that follows it. The sub-word kind learns pair merges inside words,
weighted by word frequency; encoding is greedy longest match against the
vocabulary. Id 0 is the unknown token ``⁇``. The CTC blank is not part of the
vocabulary.

Serialized layout (UTF-8 text)::

    <kind> <vocab_size>
    <token 0>
    ...
    <token vocab_size - 1>
    <left>\t<right>        # one line per merge, in training order
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal


UNK_TOKEN = "⁇"
BOUNDARY = "▁"
UNK_ID = 0
STUDIED_SUBWORD_SIZES = (128, 256, 512, 1024, 2048, 4096)

_PUNCTUATION = re.compile(r"[^\w\s']|_")
_WHITESPACE = re.compile(r"\s+")


def normalize_text(text):
    text = _PUNCTUATION.sub(" ", str(text or "").lower())
    return _WHITESPACE.sub(" ", text).strip()


def _symbols(text):
    return text.replace(" ", BOUNDARY)


def _split_words(symbols):
    """Split marker-joined text so each word keeps its leading marker."""
    words = []
    current = ""
    for char in symbols:
        if char == BOUNDARY and current:
            words.append(current)
            current = ""
        current += char
    if current:
        words.append(current)
    return words


@dataclass
class TokenizerModel:
    kind: Literal["subword", "char"]
    vocab: list[str]
    merges: list[tuple[str, str]] = field(default_factory=list)
    unk_id: int = UNK_ID

    def __post_init__(self):
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("Tokenizer vocabulary contains duplicate tokens")
        if not self.vocab or self.vocab[self.unk_id] != UNK_TOKEN:
            raise ValueError(f"Tokenizer id {self.unk_id} must be {UNK_TOKEN!r}")
        self._ids = {token: index for index, token in enumerate(self.vocab)}
        self._max_len = max(len(token) for token in self.vocab)
        self._cache = {}

    @property
    def size(self):
        return len(self.vocab)

    def token_id(self, token):
        return self._ids.get(token, self.unk_id)

    def encode_word(self, word):
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        ids = []
        position = 0
        while position < len(word):
            for width in range(min(self._max_len, len(word) - position), 0, -1):
                piece = word[position:position + width]
                if piece in self._ids and piece != UNK_TOKEN:
                    ids.append(self._ids[piece])
                    position += width
                    break
            else:
                ids.append(self.unk_id)
                position += 1
        self._cache[word] = ids
        return ids


def _alphabet(lines):
    chars = set()
    for line in lines:
        chars.update(_symbols(line))
    chars.discard(BOUNDARY)
    return [UNK_TOKEN, BOUNDARY] + sorted(chars)


def _merge_word(word, pair, merged):
    out = []
    index = 0
    while index < len(word):
        if index + 1 < len(word) and word[index] == pair[0] and word[index + 1] == pair[1]:
            out.append(merged)
            index += 2
        else:
            out.append(word[index])
            index += 1
    return tuple(out)


def train_tokenizer(corpus, vocab_size, kind="subword"):
    """Train a tokenizer on text lines.

    The sub-word kind stops merging at ``vocab_size`` or when no pair is left,
    so the trained vocabulary can be smaller than requested.
    """
    if kind not in ("subword", "char"):
        raise ValueError(f"Unknown tokenizer kind: {kind!r}")
    lines = [normalize_text(line) for line in corpus]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError("Cannot train a tokenizer on an empty corpus")
    vocab = _alphabet(lines)
    if vocab_size is not None and vocab_size < len(vocab):
        raise ValueError(
            f"vocab_size {vocab_size} is below the alphabet size {len(vocab) - 1} plus the unknown token"
        )
    if kind == "char":
        return TokenizerModel(kind="char", vocab=vocab)
    if vocab_size is None:
        raise ValueError("A sub-word tokenizer needs a vocab_size")

    if vocab_size not in STUDIED_SUBWORD_SIZES:
        logging.warning(f"Sub-word vocabulary size {vocab_size} is outside the studied sizes {STUDIED_SUBWORD_SIZES}")

    word_counts = Counter()
    for line in lines:
        word_counts.update(_split_words(_symbols(line)))
    words = {tuple(word): count for word, count in word_counts.items()}

    merges = []
    known = set(vocab)
    while len(vocab) < vocab_size:
        pair_counts = Counter()
        for word, count in words.items():
            for pair in zip(word, word[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            break
        best, _ = min(pair_counts.items(), key=lambda item: (-item[1], item[0]))
        merged = best[0] + best[1]
        merges.append(best)
        if merged not in known:
            known.add(merged)
            vocab.append(merged)
        words = {_merge_word(word, best, merged): count for word, count in words.items()}

    if len(vocab) < vocab_size:
        logging.info(f"Tokenizer ran out of merges at {len(vocab)} tokens (requested {vocab_size})")
    return TokenizerModel(kind="subword", vocab=vocab, merges=merges)


def encode(model, text):
    ids = []
    for word in _split_words(_symbols(text)):
        ids.extend(model.encode_word(word))
    return ids


def decode(model, ids):
    pieces = []
    for token_id in ids:
        token_id = int(token_id)
        if not 0 <= token_id < model.size:
            raise ValueError(f"Token id {token_id} is outside the vocabulary of size {model.size}")
        pieces.append(model.vocab[token_id])
    return "".join(pieces).replace(BOUNDARY, " ")


def ctc_feasible(target_ids, output_frames):
    """True when a CTC alignment of ``output_frames`` can produce the target."""
    target = list(target_ids)
    repeats = sum(1 for left, right in zip(target, target[1:]) if left == right)
    return output_frames >= len(target) + repeats


def encoded_length_stats(model, corpus):
    lengths = [len(encode(model, normalize_text(line))) for line in corpus]
    if not lengths:
        return {"utterances": 0, "mean_tokens": 0.0, "max_tokens": 0, "total_tokens": 0}
    return {
        "utterances": len(lengths),
        "mean_tokens": sum(lengths) / len(lengths),
        "max_tokens": max(lengths),
        "total_tokens": sum(lengths),
    }


def save_tokenizer(model, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{model.kind} {model.size}"]
    lines.extend(model.vocab)
    lines.extend(f"{left}\t{right}" for left, right in model.merges)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_tokenizer(path):
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    try:
        kind, size = lines[0].split(" ")
        size = int(size)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed tokenizer header {lines[0]!r}") from exc
    if kind not in ("subword", "char"):
        raise ValueError(f"{path}: unknown tokenizer kind {kind!r}")
    vocab = lines[1:1 + size]
    if len(vocab) != size:
        raise ValueError(f"{path}: expected {size} tokens, found {len(vocab)}")
    merges = []
    for line in lines[1 + size:]:
        if not line:
            continue
        left, right = line.split("\t")
        merges.append((left, right))
    return TokenizerModel(kind=kind, vocab=vocab, merges=merges)
