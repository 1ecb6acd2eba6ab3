"""
CTC loss, greedy decoding and prefix beam search with n-gram shallow fusion.

Log-probability matrices are ``[frames, classes]`` with the blank as the last
class. All arithmetic stays in log space.
"""

import logging
from dataclasses import dataclass

import numpy as np

try:
    from utils.model import LogProbMatrix
    from utils.tensor_core import from_op
    from utils.tokenizer import ctc_feasible
except ImportError:
    from src.utils.model import LogProbMatrix
    from src.utils.tensor_core import from_op
    from src.utils.tokenizer import ctc_feasible


NEG_INF = -np.inf


class InfeasibleTargetError(ValueError):
    """The target cannot be aligned to the available output frames."""


def _values(logp):
    values = logp.values if isinstance(logp, LogProbMatrix) else np.asarray(logp)
    if values.ndim != 2:
        raise ValueError(f"Expected log-probabilities [frames, classes], got shape {values.shape}")
    return values.astype(np.float64, copy=False)


def _extended_labels(target, blank):
    extended = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    extended[1::2] = target
    return extended


def _skip_allowed(extended, blank):
    allowed = np.zeros(len(extended), dtype=bool)
    if len(extended) > 2:
        allowed[2:] = (extended[2:] != blank) & (extended[2:] != extended[:-2])
    return allowed


def ctc_loss(logp, target):
    """Negative log-likelihood of ``target`` and its gradient w.r.t. ``logp``.

    Raises InfeasibleTargetError when no alignment over the available frames
    collapses to ``target``.
    """
    values = _values(logp)
    frames, classes = values.shape
    blank = classes - 1
    target = np.asarray(list(target), dtype=np.int64)
    if target.size and (target.min() < 0 or target.max() >= blank):
        raise ValueError(f"Target ids must be in [0, {blank}), got {target.tolist()}")
    if frames == 0 or not ctc_feasible(target.tolist(), frames):
        raise InfeasibleTargetError(
            f"Target of {len(target)} tokens cannot be aligned to {frames} output frames"
        )

    extended = _extended_labels(target, blank)
    states = len(extended)
    skip = _skip_allowed(extended, blank)
    emit = values[:, extended]

    alpha = np.full((frames, states), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, frames):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        jump = np.where(skip, np.concatenate(([NEG_INF, NEG_INF], prev[:-2])), NEG_INF)
        alpha[t] = np.logaddexp(np.logaddexp(stay, step), jump) + emit[t]

    beta = np.full((frames, states), NEG_INF)
    beta[-1, -1] = emit[-1, -1]
    if states > 1:
        beta[-1, -2] = emit[-1, -2]
    skip_from = np.concatenate((skip[2:], [False, False]))
    for t in range(frames - 2, -1, -1):
        nxt = beta[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        jump = np.where(skip_from, np.concatenate((nxt[2:], [NEG_INF, NEG_INF])), NEG_INF)
        beta[t] = np.logaddexp(np.logaddexp(stay, step), jump) + emit[t]

    log_likelihood = alpha[-1, -1] if states == 1 else np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    if not np.isfinite(log_likelihood):
        raise InfeasibleTargetError("Target has zero probability under the given log-probabilities")

    reachable = np.isfinite(alpha) & np.isfinite(beta)
    occupancy = np.zeros_like(alpha)
    occupancy[reachable] = np.exp(alpha[reachable] + beta[reachable] - emit[reachable] - log_likelihood)
    grad = np.zeros_like(values)
    for state, label in enumerate(extended):
        grad[:, label] -= occupancy[:, state]
    return float(-log_likelihood), grad


def ctc_batch_loss(logp, targets, lengths):
    """Mean CTC loss of a ``[B, classes, T]`` log-prob tensor as a graph node."""
    lengths = np.asarray(lengths, dtype=np.int64)
    batch = logp.shape[0]
    if len(targets) != batch or lengths.shape != (batch,):
        raise ValueError(f"Got {len(targets)} targets and {lengths.shape} lengths for a batch of {batch}")
    grad = np.zeros(logp.shape, dtype=np.float64)
    total = 0.0
    for index, (target, length) in enumerate(zip(targets, lengths)):
        loss, utterance_grad = ctc_loss(logp.data[index, :, :length].T, target)
        total += loss
        grad[index, :, :length] = utterance_grad.T
    grad /= batch
    mean_loss = np.asarray(total / batch, dtype=logp.dtype)
    return from_op(mean_loss, [logp], lambda g: (g * grad,))


def greedy_decode(logp):
    values = _values(logp)
    blank = values.shape[1] - 1
    best = values.argmax(axis=1)
    tokens = []
    previous = None
    for label in best:
        if label != previous and label != blank:
            tokens.append(int(label))
        previous = label
    return tokens


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple
    acoustic_logp: float
    lm_logp: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0

    @property
    def combined(self):
        return self.acoustic_logp + self.alpha * self.lm_logp + self.beta * len(self.tokens)


class _Prefix:
    __slots__ = ("blank", "nonblank", "best_blank", "best_nonblank", "lm")

    def __init__(self, lm=0.0):
        self.blank = NEG_INF
        self.nonblank = NEG_INF
        self.best_blank = NEG_INF
        self.best_nonblank = NEG_INF
        self.lm = lm

    @property
    def total(self):
        return np.logaddexp(self.blank, self.nonblank)

    @property
    def best_path(self):
        return max(self.best_blank, self.best_nonblank)


def _lm_context(lm, prefix):
    if lm.order <= 1:
        return ()
    return prefix[-(lm.order - 1):]


def _search(values, width, lm, alpha, beta):
    frames, classes = values.shape
    blank = classes - 1
    use_lm = lm is not None and alpha != 0.0

    def rank(item):
        prefix, state = item
        return -(state.best_path + alpha * state.lm + beta * len(prefix)), prefix

    beams = {(): _Prefix()}
    beams[()].best_blank = 0.0
    beams[()].blank = 0.0
    for t in range(frames):
        row = values[t]
        candidates = {}
        for prefix, state in beams.items():
            stay = candidates.get(prefix)
            if stay is None:
                stay = candidates[prefix] = _Prefix(state.lm)
            stay.blank = np.logaddexp(stay.blank, state.total + row[blank])
            stay.best_blank = max(stay.best_blank, state.best_path + row[blank])
            last = prefix[-1] if prefix else None
            if last is not None:
                stay.nonblank = np.logaddexp(stay.nonblank, state.nonblank + row[last])
                stay.best_nonblank = max(stay.best_nonblank, state.best_nonblank + row[last])

            for token in range(blank):
                if token == last:
                    add_total = state.blank + row[token]
                    add_best = state.best_blank + row[token]
                else:
                    add_total = state.total + row[token]
                    add_best = state.best_path + row[token]
                extended = prefix + (token,)
                entry = candidates.get(extended)
                if entry is None:
                    lm_step = lm.score(_lm_context(lm, prefix), token) if use_lm else 0.0
                    entry = candidates[extended] = _Prefix(state.lm + lm_step)
                entry.nonblank = np.logaddexp(entry.nonblank, add_total)
                entry.best_nonblank = max(entry.best_nonblank, add_best)

        ranked = sorted(candidates.items(), key=rank)
        beams = dict(ranked[:width])
    return beams


def beam_search(logp, width, lm=None, alpha=0.5, beta=1.0, rescore=False):
    """Prefix beam search returning hypotheses sorted by combined score.

    Prefixes accumulate the full alignment probability for the final ranking;
    pruning at every frame keeps the ``width`` prefixes with the best single
    alignment plus the fusion terms, so ``width=1`` reproduces greedy decoding.
    Without an LM the fusion weights are zero. With ``rescore`` the search is
    acoustic-only and the LM re-ranks the surviving prefixes afterwards.
    """
    if width < 1:
        raise ValueError(f"Beam width must be >= 1, got {width}")
    values = _values(logp)
    if lm is None:
        alpha = beta = 0.0

    if rescore:
        beams = _search(values, width, None, 0.0, 0.0)
    else:
        beams = _search(values, width, lm, alpha, beta)

    hypotheses = []
    for prefix, state in beams.items():
        lm_logp = state.lm
        if rescore and lm is not None:
            lm_logp = score_sequence(lm, prefix)
        elif lm is not None and alpha == 0.0:
            lm_logp = score_sequence(lm, prefix)
        hypotheses.append(Hypothesis(tuple(prefix), float(state.total), float(lm_logp), alpha, beta))
    hypotheses.sort(key=lambda hyp: (-hyp.combined, hyp.tokens))
    if not hypotheses:
        logging.warning("Beam search produced no hypotheses")
    return hypotheses


def score_sequence(lm, tokens):
    total = 0.0
    tokens = tuple(tokens)
    for index, token in enumerate(tokens):
        total += lm.score(_lm_context(lm, tokens[:index]), token)
    return total
