"""
Audio front end: 16 kHz WAV I/O, 80-bin log-mel features and SpecAugment.

Feature matrices are ``[80, frames]`` arrays with a 25 ms Hann window, a 10 ms
hop, a 512-point FFT and reflection center padding, so an utterance of ``N``
samples yields ``1 + N // 160`` frames.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import soundfile as sf
from pydantic import BaseModel, Field, model_validator
from scipy.signal import get_window


SAMPLE_RATE = 16000
N_MELS = 80
N_FFT = 512
WIN_LENGTH = 400
HOP_LENGTH = 160
F_MIN = 0.0
F_MAX = 8000.0
LOG_FLOOR = 1e-10
NORM_EPS = 1e-5


@dataclass
class FeatureMatrix:
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] != N_MELS:
            raise ValueError(f"FeatureMatrix must be [{N_MELS}, frames], got shape {self.values.shape}")

    @property
    def frames(self):
        return int(self.values.shape[1])

    @property
    def mels(self):
        return N_MELS


class SpecAugmentConfig(BaseModel):
    freq_masks: int = Field(default=2, ge=0)
    freq_width: int = Field(default=27, ge=0, le=N_MELS)
    time_masks: int = Field(default=2, ge=0)
    time_width_fraction: float = Field(default=0.05, ge=0.0, le=1.0)

    @property
    def enabled(self):
        return self.freq_masks > 0 or self.time_masks > 0


def frame_count(num_samples):
    return 1 + num_samples // HOP_LENGTH


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels=N_MELS, f_min=F_MIN, f_max=F_MAX):
    """Center frequency in Hz of every triangular filter."""
    points = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    return points[1:-1]


@lru_cache(maxsize=4)
def mel_filterbank(n_mels=N_MELS, n_fft=N_FFT, sample_rate=SAMPLE_RATE, f_min=F_MIN, f_max=F_MAX):
    """HTK-scale triangular filters, ``[n_mels, n_fft // 2 + 1]``, peak height 1."""
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bins = np.linspace(0.0, sample_rate / 2.0, n_fft // 2 + 1)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights.setflags(write=False)
    return weights


@lru_cache(maxsize=1)
def _analysis_window():
    window = np.zeros(N_FFT)
    offset = (N_FFT - WIN_LENGTH) // 2
    window[offset:offset + WIN_LENGTH] = get_window("hann", WIN_LENGTH, fftbins=True)
    window.setflags(write=False)
    return window


def power_spectrogram(waveform):
    padded = np.pad(waveform, N_FFT // 2, mode="reflect")
    n_frames = frame_count(len(waveform))
    frames = np.lib.stride_tricks.sliding_window_view(padded, N_FFT)[::HOP_LENGTH][:n_frames]
    spectrum = np.fft.rfft(frames * _analysis_window()[None, :], n=N_FFT, axis=1)
    return (np.abs(spectrum) ** 2).T


def log_mel(waveform, sample_rate=SAMPLE_RATE, normalize=True):
    """Return the FeatureMatrix of a mono waveform scaled to [-1, 1).

    With ``normalize`` every mel bin is shifted and scaled to zero mean and unit
    variance over the utterance.
    """
    if sample_rate != SAMPLE_RATE:
        raise ValueError(f"Expected {SAMPLE_RATE} Hz audio, got {sample_rate} Hz")
    samples = np.asarray(waveform, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError(f"Expected a mono waveform, got shape {samples.shape}")
    if samples.size == 0:
        raise ValueError("Cannot compute features of an empty waveform")
    features = _log_mel_energies(samples)
    if normalize:
        mean = features.mean(axis=1, keepdims=True)
        std = features.std(axis=1, keepdims=True)
        features = (features - mean) / (std + NORM_EPS)
    return FeatureMatrix(features)


def _log_mel_energies(samples):
    energies = mel_filterbank() @ power_spectrogram(samples)
    return np.log(np.maximum(energies, LOG_FLOOR))


def spec_augment(features, cfg, rng):
    """Zero random mel bands and frame spans of a copy of ``features``."""
    values = features.values.copy()
    n_mels, n_frames = values.shape
    for _ in range(cfg.freq_masks):
        width = int(rng.integers(0, cfg.freq_width + 1))
        start = int(rng.integers(0, n_mels - width + 1))
        values[start:start + width, :] = 0.0
    max_time_width = int(np.floor(cfg.time_width_fraction * n_frames))
    for _ in range(cfg.time_masks):
        width = int(rng.integers(0, max_time_width + 1))
        start = int(rng.integers(0, n_frames - width + 1))
        values[:, start:start + width] = 0.0
    return FeatureMatrix(values)


def stack_features(feature_list, dtype=np.float32):
    """Zero-pad a list of FeatureMatrix to ``[B, 80, T_max]`` plus true lengths."""
    if not feature_list:
        raise ValueError("Cannot stack an empty feature list")
    lengths = np.array([feature.frames for feature in feature_list], dtype=np.int64)
    batch = np.zeros((len(feature_list), N_MELS, int(lengths.max())), dtype=dtype)
    for index, feature in enumerate(feature_list):
        batch[index, :, :feature.frames] = feature.values
    return batch, lengths


def read_wav(path):
    """Read a 16 kHz mono 16-bit PCM WAV as float64 samples in [-1, 1)."""
    info = sf.info(str(path))
    if info.samplerate != SAMPLE_RATE:
        raise ValueError(f"{path}: expected {SAMPLE_RATE} Hz audio, got {info.samplerate} Hz")
    if info.channels != 1:
        raise ValueError(f"{path}: expected mono audio, got {info.channels} channels")
    if info.subtype != "PCM_16":
        logging.warning(f"{path}: expected PCM_16 samples, got {info.subtype}")
    samples, _ = sf.read(str(path), dtype="float64")
    return samples


def write_wav(path, samples):
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767 / 32768)
    pcm = np.round(clipped * 32768).astype(np.int16)
    sf.write(str(path), pcm, SAMPLE_RATE, subtype="PCM_16")
    return path
