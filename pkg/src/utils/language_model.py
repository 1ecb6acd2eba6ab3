"""
Token-level n-gram language model with stupid backoff.

``score(context, token)`` backs off to ``log(0.4)`` plus the score with the
oldest context token dropped. A seen n-gram scores
``log(count(context + token) / count(context))`` but never less than that backoff
estimate, so longer matching contexts never lower a score. Unigrams use add-one
smoothing, so every in-vocabulary token has a finite score. Scores are not
normalized.

File layout (UTF-8 text)::

    # order <n>
    # vocab_size <V>
    # backoff <factor>
    <id> <id> ...\t<count>      # every stored n-gram, sorted
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path


DEFAULT_BACKOFF = 0.4


@dataclass
class NGramLM:
    order: int
    vocab_size: int
    counts: dict = field(default_factory=dict)
    backoff: float = DEFAULT_BACKOFF

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"n-gram order must be >= 1, got {self.order}")
        self._context_totals = Counter()
        self._unigram_total = 0
        for ngram, count in self.counts.items():
            self._context_totals[ngram[:-1]] += count
            if len(ngram) == 1:
                self._unigram_total += count

    def unigram(self, token):
        return math.log((self.counts.get((token,), 0) + 1) / (self._unigram_total + self.vocab_size))

    def score(self, context, token):
        context = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        return self._score(context, token)

    def _score(self, context, token):
        if not context:
            return self.unigram(token)
        lower = math.log(self.backoff) + self._score(context[1:], token)
        seen = self.counts.get(context + (token,), 0)
        if not seen:
            return lower
        return max(math.log(seen / self._context_totals[context]), lower)


def train_lm(sequences, order, vocab_size=None):
    """Count every 1..order-gram of the token sequences.

    ``vocab_size`` defaults to the largest observed id plus one; pass the
    tokenizer size so unseen tokens share the unigram floor.
    """
    if order < 1:
        raise ValueError(f"n-gram order must be >= 1, got {order}")
    sequences = [tuple(int(token) for token in sequence) for sequence in sequences]
    if not any(sequences):
        raise ValueError("Cannot train a language model on an empty corpus")
    counts = Counter()
    vocab = set()
    for sequence in sequences:
        vocab.update(sequence)
        for n in range(1, order + 1):
            for start in range(len(sequence) - n + 1):
                counts[sequence[start:start + n]] += 1
    return NGramLM(order=order, vocab_size=vocab_size or max(vocab) + 1, counts=dict(counts))


def lm_score(lm, context, token):
    return lm.score(context, token)


def save_lm(lm, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# order {lm.order}", f"# vocab_size {lm.vocab_size}", f"# backoff {lm.backoff!r}"]
    for ngram in sorted(lm.counts):
        lines.append(f"{' '.join(str(token) for token in ngram)}\t{lm.counts[ngram]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_lm(path):
    header = {}
    counts = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            header[key] = value
            continue
        ngram, _, count = line.partition("\t")
        counts[tuple(int(token) for token in ngram.split())] = int(count)
    try:
        return NGramLM(
            order=int(header["order"]),
            vocab_size=int(header["vocab_size"]),
            counts=counts,
            backoff=float(header.get("backoff", DEFAULT_BACKOFF)),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing LM header field {exc}") from exc
