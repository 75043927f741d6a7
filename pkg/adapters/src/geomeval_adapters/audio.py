"""Clip loading: WAV decode, mono mixdown, resampling, peak normalization."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_SR = 16_000


def load_clip(path, target_sr: int = TARGET_SR):
    """Decode a WAV file to mono float32 at the target rate.

    Returns (waveform, duration_seconds) where the duration reflects the
    original file, not the resampled buffer. Integer PCM is scaled to
    [-1, 1]; multichannel audio is averaged; the peak is normalized to 1.
    """
    sr, data = wavfile.read(path)
    if data.size == 0:
        raise ValueError(f"{path}: empty audio")
    x = data.astype(np.float64)
    if np.issubdtype(data.dtype, np.integer):
        x = x / float(max(abs(np.iinfo(data.dtype).min), np.iinfo(data.dtype).max))
    if x.ndim == 2:
        x = x.mean(axis=1)
    duration = len(x) / sr
    if sr != target_sr:
        ratio = Fraction(target_sr, sr)
        x = resample_poly(x, ratio.numerator, ratio.denominator)
    peak = np.abs(x).max()
    if peak > 0:
        x = x / peak
    return x.astype(np.float32), duration
