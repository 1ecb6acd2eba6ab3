import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import soundfile as sf


ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.utils.frontend import (
    LOG_FLOOR,
    N_MELS,
    SAMPLE_RATE,
    FeatureMatrix,
    SpecAugmentConfig,
    frame_count,
    log_mel,
    mel_center_frequencies,
    mel_filterbank,
    read_wav,
    spec_augment,
    stack_features,
    write_wav,
)


class FixedRng:
    """Stub generator returning queued integers, for forcing mask placement."""

    def __init__(self, values):
        self.values = list(values)

    def integers(self, low, high=None):
        return self.values.pop(0)


class LogMelTests(unittest.TestCase):
    def test_one_second_gives_101_frames(self):
        features = log_mel(np.zeros(SAMPLE_RATE))

        self.assertEqual((N_MELS, 101), features.values.shape)

    def test_frame_count_formula(self):
        rng = np.random.default_rng(0)
        for samples in (160, 161, 319, 320, 12345, 10 * SAMPLE_RATE):
            features = log_mel(rng.uniform(-0.5, 0.5, samples))
            self.assertEqual(1 + samples // 160, features.frames)
            self.assertEqual(frame_count(samples), features.frames)

    def test_silence_hits_the_log_floor_and_normalizes_to_zero(self):
        raw = log_mel(np.zeros(4000), normalize=False)
        normalized = log_mel(np.zeros(4000))

        np.testing.assert_allclose(np.log(LOG_FLOOR), raw.values)
        np.testing.assert_array_equal(np.zeros_like(normalized.values), normalized.values)

    def test_one_kilohertz_tone_peaks_in_nearest_mel_bin(self):
        t = np.arange(SAMPLE_RATE) / SAMPLE_RATE
        features = log_mel(0.5 * np.sin(2 * np.pi * 1000.0 * t), normalize=False)

        expected = int(np.argmin(np.abs(mel_center_frequencies() - 1000.0)))
        self.assertEqual(expected, int(features.values.mean(axis=1).argmax()))

    def test_normalized_bins_have_zero_mean(self):
        features = log_mel(np.random.default_rng(1).standard_normal(8000) * 0.1)

        np.testing.assert_allclose(np.zeros(N_MELS), features.values.mean(axis=1), atol=1e-9)

    def test_filterbank_shape_and_peak(self):
        bank = mel_filterbank()

        self.assertEqual((N_MELS, 257), bank.shape)
        self.assertLessEqual(bank.max(), 1.0)
        self.assertTrue(np.all(bank.sum(axis=1) > 0))

    def test_wrong_rate_empty_and_stereo_inputs_are_rejected(self):
        with self.assertRaises(ValueError):
            log_mel(np.zeros(8000), sample_rate=8000)
        with self.assertRaises(ValueError):
            log_mel(np.zeros(0))
        with self.assertRaises(ValueError):
            log_mel(np.zeros((2, 100)))

    def test_feature_matrix_validates_shape(self):
        with self.assertRaises(ValueError):
            FeatureMatrix(np.zeros((40, 10)))


class SpecAugmentTests(unittest.TestCase):
    def setUp(self):
        self.features = FeatureMatrix(np.ones((N_MELS, 100)))

    def test_no_masks_is_identity(self):
        cfg = SpecAugmentConfig(freq_masks=0, time_masks=0)

        out = spec_augment(self.features, cfg, np.random.default_rng(0))

        np.testing.assert_array_equal(self.features.values, out.values)
        self.assertFalse(cfg.enabled)

    def test_full_width_frequency_mask_zeroes_every_row(self):
        cfg = SpecAugmentConfig(freq_masks=1, freq_width=80, time_masks=0)

        out = spec_augment(self.features, cfg, FixedRng([80, 0]))

        np.testing.assert_array_equal(np.zeros((N_MELS, 100)), out.values)

    def test_time_masks_cover_at_most_five_percent(self):
        cfg = SpecAugmentConfig(freq_masks=0, time_masks=1, time_width_fraction=0.05)
        rng = np.random.default_rng(7)
        for _ in range(50):
            out = spec_augment(self.features, cfg, rng)
            masked_frames = int((out.values == 0).all(axis=0).sum())
            self.assertLessEqual(masked_frames, 5)

    def test_input_is_not_modified(self):
        spec_augment(self.features, SpecAugmentConfig(), np.random.default_rng(0))

        np.testing.assert_array_equal(np.ones((N_MELS, 100)), self.features.values)


class StackAndWavTests(unittest.TestCase):
    def test_stack_pads_with_zeros_and_keeps_lengths(self):
        short = FeatureMatrix(np.ones((N_MELS, 3)))
        long = FeatureMatrix(np.full((N_MELS, 5), 2.0))

        batch, lengths = stack_features([short, long])

        self.assertEqual((2, N_MELS, 5), batch.shape)
        np.testing.assert_array_equal([3, 5], lengths)
        np.testing.assert_array_equal(0.0, batch[0, :, 3:])

    def test_wav_round_trip_is_pcm16_mono(self):
        samples = 0.25 * np.sin(np.linspace(0, 20 * np.pi, 1600))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "tone.wav"
            write_wav(path, samples)

            info = sf.info(str(path))
            restored = read_wav(path)

        self.assertEqual((SAMPLE_RATE, 1, "PCM_16"), (info.samplerate, info.channels, info.subtype))
        np.testing.assert_allclose(samples, restored, atol=1.0 / 32768)

    def test_read_wav_rejects_other_sample_rates(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "slow.wav"
            sf.write(str(path), np.zeros(800, dtype=np.int16), 8000, subtype="PCM_16")

            with self.assertRaises(ValueError):
                read_wav(path)


if __name__ == "__main__":
    unittest.main()
