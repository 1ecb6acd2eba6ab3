"""
Word and character error rates from a Levenshtein alignment.
"""

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class EditCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    reference_length: int = 0

    @property
    def errors(self):
        return self.substitutions + self.deletions + self.insertions

    def __add__(self, other):
        return EditCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.reference_length + other.reference_length,
        )


def align(reference, hypothesis):
    """Minimum-edit alignment counts; substitutions win ties over deletions, then insertions."""
    rows, cols = len(reference) + 1, len(hypothesis) + 1
    cost = np.zeros((rows, cols), dtype=np.int64)
    cost[:, 0] = np.arange(rows)
    cost[0, :] = np.arange(cols)
    for i in range(1, rows):
        for j in range(1, cols):
            diagonal = cost[i - 1, j - 1] + (reference[i - 1] != hypothesis[j - 1])
            cost[i, j] = min(diagonal, cost[i - 1, j] + 1, cost[i, j - 1] + 1)

    counts = EditCounts(reference_length=len(reference))
    i, j = rows - 1, cols - 1
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + (reference[i - 1] != hypothesis[j - 1]):
            if reference[i - 1] != hypothesis[j - 1]:
                counts.substitutions += 1
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            counts.deletions += 1
            i -= 1
        else:
            counts.insertions += 1
            j -= 1
    return counts


def error_rate(counts):
    """Percentage ``100 * errors / reference_length``; 0 when both are empty."""
    if counts.reference_length == 0:
        return 0.0 if counts.errors == 0 else float("inf")
    return 100.0 * counts.errors / counts.reference_length


@dataclass
class EvalReport:
    wer: float
    cer: float
    substitutions: int
    deletions: int
    insertions: int
    reference_words: int
    reference_chars: int
    utterances: int
    decoding: str = "greedy"

    def to_dict(self):
        return asdict(self)


def word_counts(reference, hypothesis):
    return align(reference.split(), hypothesis.split())


def char_counts(reference, hypothesis):
    return align(list(" ".join(reference.split())), list(" ".join(hypothesis.split())))


def evaluate_transcripts(references, hypotheses, decoding="greedy"):
    if len(references) != len(hypotheses):
        raise ValueError(f"Got {len(references)} references but {len(hypotheses)} hypotheses")
    words = EditCounts()
    chars = EditCounts()
    for reference, hypothesis in zip(references, hypotheses):
        words = words + word_counts(reference, hypothesis)
        chars = chars + char_counts(reference, hypothesis)
    return EvalReport(
        wer=error_rate(words),
        cer=error_rate(chars),
        substitutions=words.substitutions,
        deletions=words.deletions,
        insertions=words.insertions,
        reference_words=words.reference_length,
        reference_chars=chars.reference_length,
        utterances=len(references),
        decoding=decoding,
    )
