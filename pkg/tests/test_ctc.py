import itertools
import math
import sys
import unittest
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, logsumexp


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.utils.ctc import (
    InfeasibleTargetError,
    beam_search,
    ctc_batch_loss,
    ctc_loss,
    greedy_decode,
    score_sequence,
)
from src.utils.language_model import train_lm
from src.utils.model import LogProbMatrix
from src.utils.tensor_core import Tensor, backward
from src.utils.tokenizer import ctc_feasible


def collapse(path, blank):
    tokens = []
    previous = None
    for label in path:
        if label != previous and label != blank:
            tokens.append(int(label))
        previous = label
    return tuple(tokens)


def brute_force_posteriors(values):
    """Log-probability of every collapsed sequence, summed over all alignments."""
    frames, classes = values.shape
    blank = classes - 1
    paths = np.array(list(itertools.product(range(classes), repeat=frames)))
    scores = values[np.arange(frames), paths].sum(axis=1)
    totals = {}
    for path, score in zip(paths, scores):
        key = collapse(path, blank)
        totals[key] = np.logaddexp(totals.get(key, -np.inf), score)
    return totals


def random_feasible_target(rng, frames, classes, max_length=3):
    while True:
        length = int(rng.integers(0, max_length + 1))
        target = [int(token) for token in rng.integers(0, classes - 1, size=length)]
        if ctc_feasible(target, frames):
            return target


def random_logp(rng, frames, classes, sharpness=1.0):
    return log_softmax(sharpness * rng.standard_normal((frames, classes)), axis=1)


def one_hot_path(path, classes, confidence=0.9):
    values = np.full((len(path), classes), (1.0 - confidence) / (classes - 1))
    values[np.arange(len(path)), path] = confidence
    return LogProbMatrix(np.log(values))


class CtcLossTests(unittest.TestCase):
    def test_single_frame_uniform(self):
        loss, _ = ctc_loss(np.log(np.full((1, 2), 0.5)), [0])

        self.assertAlmostEqual(math.log(2.0), loss, places=4)

    def test_two_frames_uniform(self):
        loss, _ = ctc_loss(np.log(np.full((2, 2), 0.5)), [0])

        self.assertAlmostEqual(-math.log(0.75), loss, places=4)

    def test_matches_alignment_enumeration(self):
        rng = np.random.default_rng(0)
        for frames in range(1, 7):
            for classes in (2, 3, 4):
                for _ in range(100):
                    values = random_logp(rng, frames, classes)
                    posteriors = brute_force_posteriors(values)
                    for target, log_prob in posteriors.items():
                        if len(target) > 3:
                            continue
                        loss, _ = ctc_loss(values, list(target))
                        self.assertAlmostEqual(-log_prob, loss, places=8, msg=(frames, classes, target))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        h = 1e-6
        for frames in range(1, 7):
            for classes in (2, 3, 4):
                for _ in range(5):
                    values = random_logp(rng, frames, classes)
                    target = random_feasible_target(rng, frames, classes)
                    _, grad = ctc_loss(values, target)

                    numeric = np.zeros_like(values)
                    for index in np.ndindex(values.shape):
                        plus = values.copy()
                        minus = values.copy()
                        plus[index] += h
                        minus[index] -= h
                        numeric[index] = (ctc_loss(plus, target)[0] - ctc_loss(minus, target)[0]) / (2 * h)

                    np.testing.assert_allclose(numeric, grad, rtol=1e-4, atol=1e-7, err_msg=str((frames, classes, target)))

    def test_gradient_rows_are_minus_occupancy(self):
        values = random_logp(np.random.default_rng(2), 5, 3)

        _, grad = ctc_loss(values, [0, 1])

        np.testing.assert_allclose(-np.ones(5), grad.sum(axis=1), atol=1e-10)
        self.assertTrue(np.all(grad <= 1e-12))

    def test_infeasible_targets_raise(self):
        values = random_logp(np.random.default_rng(3), 2, 3)
        with self.assertRaises(InfeasibleTargetError):
            ctc_loss(values, [0, 0])
        with self.assertRaises(InfeasibleTargetError):
            ctc_loss(values, [0, 1, 0])

    def test_blank_or_negative_target_ids_are_rejected(self):
        values = random_logp(np.random.default_rng(4), 4, 3)
        with self.assertRaises(ValueError):
            ctc_loss(values, [2])
        with self.assertRaises(ValueError):
            ctc_loss(values, [-1])

    def test_empty_target_is_all_blank(self):
        values = random_logp(np.random.default_rng(5), 4, 3)

        loss, _ = ctc_loss(values, [])

        self.assertAlmostEqual(-values[:, 2].sum(), loss, places=10)


class CtcBatchLossTests(unittest.TestCase):
    def test_batch_loss_is_mean_and_ignores_padding(self):
        rng = np.random.default_rng(6)
        first = random_logp(rng, 5, 3)
        second = random_logp(rng, 3, 3)
        batch = np.full((2, 3, 5), -50.0)
        batch[0] = first.T
        batch[1, :, :3] = second.T
        logp = Tensor(batch, requires_grad=True)

        loss = ctc_batch_loss(logp, [[0, 1], [1]], [5, 3])
        backward(loss)

        expected = (ctc_loss(first, [0, 1])[0] + ctc_loss(second, [1])[0]) / 2
        self.assertAlmostEqual(expected, loss.item(), places=10)
        np.testing.assert_array_equal(np.zeros((3, 2)), logp.grad[1, :, 3:])

    def test_mismatched_lengths_are_rejected(self):
        logp = Tensor(np.zeros((2, 3, 4)))
        with self.assertRaises(ValueError):
            ctc_batch_loss(logp, [[0]], [4, 4])


class GreedyDecodeTests(unittest.TestCase):
    def test_repeats_collapse_unless_split_by_blank(self):
        self.assertEqual([0, 0], greedy_decode(one_hot_path([0, 0, 2, 0], 3)))

    def test_all_blank_is_empty(self):
        self.assertEqual([], greedy_decode(one_hot_path([2, 2, 2], 3)))

    def test_blanks_between_tokens(self):
        self.assertEqual([0, 1], greedy_decode(one_hot_path([0, 2, 2, 1], 3)))


class BeamSearchTests(unittest.TestCase):
    def test_width_one_equals_greedy(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            values = random_logp(rng, int(rng.integers(1, 5)), int(rng.integers(2, 4)), sharpness=2.0)
            best = beam_search(values, 1)[0]
            self.assertEqual(greedy_decode(values), list(best.tokens))

    def test_width_one_equals_greedy_on_longer_inputs(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            values = random_logp(rng, int(rng.integers(1, 12)), int(rng.integers(2, 6)), sharpness=2.0)
            best = beam_search(values, 1)[0]
            self.assertEqual(greedy_decode(values), list(best.tokens))

    def test_wide_beam_scores_are_exact_posteriors(self):
        rng = np.random.default_rng(8)
        for frames in range(1, 5):
            for classes in (2, 3, 4):
                for _ in range(10):
                    values = random_logp(rng, frames, classes)
                    posteriors = brute_force_posteriors(values)

                    hypotheses = [hyp for hyp in beam_search(values, classes ** frames) if np.isfinite(hyp.acoustic_logp)]

                    self.assertEqual(set(posteriors), {hyp.tokens for hyp in hypotheses})
                    for hyp in hypotheses:
                        self.assertAlmostEqual(posteriors[hyp.tokens], hyp.acoustic_logp, places=9)
                    self.assertEqual(max(posteriors, key=posteriors.get), hypotheses[0].tokens)

    def test_best_score_lies_between_greedy_path_and_exact_best(self):
        # pruned prefixes lose alignment mass, but the greedy prefix always survives
        rng = np.random.default_rng(12)
        for _ in range(300):
            frames = int(rng.integers(1, 7))
            classes = int(rng.integers(2, 5))
            values = random_logp(rng, frames, classes)
            greedy_path = values.max(axis=1).sum()
            exact_best = max(brute_force_posteriors(values).values())
            for width in range(1, 7):
                best = beam_search(values, width)[0].combined
                self.assertGreaterEqual(best, greedy_path - 1e-9, (frames, classes, width))
                self.assertLessEqual(best, exact_best + 1e-9, (frames, classes, width))

    def test_best_score_is_non_decreasing_once_nothing_is_pruned(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            frames = int(rng.integers(1, 6))
            classes = int(rng.integers(2, 5))
            values = random_logp(rng, frames, classes)
            exact_best = max(brute_force_posteriors(values).values())
            unpruned = classes ** frames
            scores = [beam_search(values, width)[0].combined for width in (unpruned, unpruned + 1, 2 * unpruned)]
            for narrow, wide in zip(scores, scores[1:]):
                self.assertGreaterEqual(wide, narrow - 1e-12)
            self.assertAlmostEqual(exact_best, scores[0], places=9)

    def test_total_posterior_sums_to_one(self):
        values = random_logp(np.random.default_rng(9), 3, 4)

        hypotheses = beam_search(values, 1000)

        self.assertAlmostEqual(0.0, logsumexp([hyp.acoustic_logp for hyp in hypotheses]), places=9)

    def test_zero_lm_weight_leaves_ranking_unchanged(self):
        rng = np.random.default_rng(10)
        lm = train_lm([[0, 1, 1], [1, 0]], 2, vocab_size=3)
        for _ in range(20):
            values = random_logp(rng, 6, 4, sharpness=1.5)
            plain = beam_search(values, 4)
            fused = beam_search(values, 4, lm=lm, alpha=0.0, beta=0.0)
            self.assertEqual([hyp.tokens for hyp in plain], [hyp.tokens for hyp in fused])

    def test_language_model_can_flip_the_decision(self):
        # frame 2 slightly prefers token 1, the LM strongly prefers 0 after 0
        values = np.log(np.array([
            [0.90, 0.05, 0.05],
            [0.05, 0.05, 0.90],
            [0.44, 0.46, 0.10],
        ]))
        lm = train_lm([[0, 0]] * 20 + [[0, 1]], 2, vocab_size=2)

        plain = beam_search(values, 4)[0]
        fused = beam_search(values, 4, lm=lm, alpha=1.0, beta=0.0)[0]

        self.assertEqual((0, 1), plain.tokens)
        self.assertEqual((0, 0), fused.tokens)
        self.assertAlmostEqual(fused.acoustic_logp + fused.lm_logp, fused.combined)

    def test_rescoring_reorders_acoustic_beams(self):
        rng = np.random.default_rng(11)
        lm = train_lm([[0, 1, 0, 1]] * 5, 2, vocab_size=2)
        values = random_logp(rng, 5, 3)

        acoustic = beam_search(values, 6)
        rescored = beam_search(values, 6, lm=lm, alpha=0.8, beta=0.5, rescore=True)

        self.assertEqual({hyp.tokens for hyp in acoustic}, {hyp.tokens for hyp in rescored})
        for hyp in rescored:
            self.assertAlmostEqual(score_sequence(lm, hyp.tokens), hyp.lm_logp)
        combined = [hyp.combined for hyp in rescored]
        self.assertEqual(sorted(combined, reverse=True), combined)

    def test_invalid_width_is_rejected(self):
        with self.assertRaises(ValueError):
            beam_search(np.log(np.full((2, 2), 0.5)), 0)


if __name__ == "__main__":
    unittest.main()
