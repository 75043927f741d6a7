"""Log-Mel spectrogram front end: 128 bands, 512-sample Hann FFT, 256 hop,
log(1 + x) compression. Emits [T x 128] with every frame valid."""

from __future__ import annotations

import numpy as np

N_FFT = 512
HOP = 256
N_MELS = 128


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sr: int, n_fft: int = N_FFT, n_mels: int = N_MELS) -> np.ndarray:
    """Triangular mel filters (HTK mel scale), shape (n_mels, n_fft//2 + 1)."""
    fft_freqs = np.linspace(0.0, sr / 2.0, n_fft // 2 + 1)
    mel_pts = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sr / 2.0), n_mels + 2)
    hz_pts = _mel_to_hz(mel_pts)
    fb = np.zeros((n_mels, len(fft_freqs)))
    for m in range(n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (fft_freqs - lo) / max(center - lo, 1e-12)
        down = (hi - fft_freqs) / max(hi - center, 1e-12)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def extract(waveform: np.ndarray, sr: int) -> tuple[np.ndarray, int]:
    """Frame-level log-Mel features for one clip.

    Returns (frames, valid_len) with frames of shape [T x 128]; clips
    shorter than one window are zero-padded to a single frame.
    """
    x = np.asarray(waveform, dtype=np.float64)
    if len(x) < N_FFT:
        x = np.pad(x, (0, N_FFT - len(x)))
    n_frames = 1 + (len(x) - N_FFT) // HOP
    window = np.hanning(N_FFT)
    idx = np.arange(N_FFT)[None, :] + HOP * np.arange(n_frames)[:, None]
    spec = np.abs(np.fft.rfft(x[idx] * window, axis=1))
    mel = spec @ mel_filterbank(sr).T
    frames = np.log1p(mel).astype(np.float32)
    return frames, frames.shape[0]
