"""Acoustic front end: framing, log-mel filterbank, deltas, splicing, CMVN."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, ShapeError

LOG_FLOOR = 1e-10
CMVN_VAR_FLOOR = 1e-8


@dataclass
class Waveform:
    """16-bit PCM samples with their rate and conversation-side label."""

    samples: np.ndarray
    sample_rate: int = 8000
    side_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.int16)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise DataError("waveform must be a non-empty 1-D sample sequence")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass
class FeatureMatrix:
    """T x D frame matrix tagged with how far through the front end it is."""

    data: np.ndarray
    provenance: str = "logmel"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ShapeError("feature matrix must be (T, D) with T >= 1")
        if not np.all(np.isfinite(self.data)):
            raise DataError("feature matrix contains non-finite values")

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.data.shape[1]


def frame_count(num_samples, frame_len, shift):
    """T = 1 + floor((samples - frame_len) / shift); 0 if too short."""
    if num_samples < frame_len:
        return 0
    return 1 + (num_samples - frame_len) // shift


def mel_scale(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def inverse_mel(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters, fft_size, sample_rate):
    """Triangular filters with centers evenly spaced on the mel scale.

    Returns (filters, center_freqs) where filters is
    (num_filters, fft_size//2 + 1).
    """
    nyquist = sample_rate / 2.0
    points_mel = np.linspace(0.0, mel_scale(nyquist), num_filters + 2)
    points_hz = inverse_mel(points_mel)
    bin_freqs = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    filters = np.zeros((num_filters, bin_freqs.size))
    for i in range(num_filters):
        left, center, right = points_hz[i], points_hz[i + 1], points_hz[i + 2]
        up = (bin_freqs - left) / (center - left)
        down = (right - bin_freqs) / (right - center)
        filters[i] = np.clip(np.minimum(up, down), 0.0, None)
    return filters, points_hz[1:-1]


def logmel(waveform, frame_ms=25, shift_ms=10, num_filters=40):
    """Hamming-windowed framing, magnitude spectrum, log mel energies.

    Energies are floored at 1e-10 before the log.
    """
    sr = waveform.sample_rate
    frame_len = int(round(sr * frame_ms / 1000.0))
    shift = int(round(sr * shift_ms / 1000.0))
    samples = waveform.samples.astype(np.float64)
    t = frame_count(samples.size, frame_len, shift)
    if t < 1:
        raise DataError(
            f"waveform of {samples.size} samples is shorter than one "
            f"{frame_len}-sample frame"
        )
    fft_size = 1
    while fft_size < frame_len:
        fft_size *= 2
    window = np.hamming(frame_len)
    starts = np.arange(t) * shift
    frames = samples[starts[:, None] + np.arange(frame_len)] * window
    spectrum = np.abs(np.fft.rfft(frames, n=fft_size, axis=1))
    filters, _ = mel_filterbank(num_filters, fft_size, sr)
    energies = spectrum @ filters.T
    return FeatureMatrix(np.log(np.maximum(energies, LOG_FLOOR)), "logmel")


_DELTA_DENOM = 2.0 * sum(k * k for k in (1, 2))  # regression half-window 2


def _delta(frames):
    padded = np.vstack([frames[:1], frames[:1], frames, frames[-1:], frames[-1:]])
    t = frames.shape[0]
    out = np.zeros_like(frames)
    for k in (1, 2):
        out += k * (padded[2 + k : 2 + k + t] - padded[2 - k : 2 - k + t])
    return out / _DELTA_DENOM


def add_deltas(frames):
    """[static, delta, delta-delta], regression half-window 2, edges replicated."""
    x = frames.data if isinstance(frames, FeatureMatrix) else np.asarray(frames, float)
    d1 = _delta(x)
    d2 = _delta(d1)
    return FeatureMatrix(np.hstack([x, d1, d2]), "logmel+delta")


def splice(frames, context):
    """Row t becomes the concatenation of frames t-k..t+k, edges replicated."""
    if context < 0:
        raise ConfigError(f"splice context must be >= 0, got {context}")
    x = frames.data if isinstance(frames, FeatureMatrix) else np.asarray(frames, float)
    t = x.shape[0]
    idx = np.clip(
        np.arange(t)[:, None] + np.arange(-context, context + 1)[None, :], 0, t - 1
    )
    return FeatureMatrix(x[idx].reshape(t, -1), "spliced")


def cmvn(frames):
    """Zero mean, unit variance per dimension over the given frames.

    Statistics are intended to be computed per conversation side (pass
    all of a side's frames at once). Variance is floored at 1e-8, so a
    constant dimension maps to zeros.
    """
    x = frames.data if isinstance(frames, FeatureMatrix) else np.asarray(frames, float)
    mean = x.mean(axis=0)
    var = np.maximum(x.var(axis=0), CMVN_VAR_FLOOR)
    return FeatureMatrix((x - mean) / np.sqrt(var), "normalized")


def canonical_rows(static_frames, context=5):
    """Delta-augment then splice: the row layout every network view reads."""
    return splice(add_deltas(static_frames), context)
