"""Pretrained transformer encoders (torch + transformers, lazy-imported).

Each extractor returns (frames, valid_len) in the canonical [T x D] layout
from the requested hidden layer ("final" = last). Weights are fetched by
the transformers hub machinery; environments without the models raise a
clear error instead of emitting anything.
"""

from __future__ import annotations

import numpy as np


def _require_torch():
    try:
        import torch  # noqa: F401
        import transformers  # noqa: F401
    except ImportError as exc:  # pragma: no cover
        raise RuntimeError(
            "this extractor needs the 'models' extra: pip install geomeval-adapters[models]"
        ) from exc


class WhisperEncoderExtractor:
    """Whisper encoder activations: fixed 30 s context, [1500 x 1280] for the
    large checkpoints. valid_len counts frames covering the real audio."""

    expected_shape = (1500, 1280)

    def __init__(self, checkpoint: str = "openai/whisper-large-v3", layer="final"):
        _require_torch()
        import torch
        from transformers import WhisperFeatureExtractor, WhisperModel

        self.processor = WhisperFeatureExtractor.from_pretrained(checkpoint)
        self.encoder = WhisperModel.from_pretrained(checkpoint).encoder.eval()
        self.layer = layer
        self._torch = torch

    def extract(self, waveform: np.ndarray, sr: int):
        torch = self._torch
        feats = self.processor(waveform, sampling_rate=sr, return_tensors="pt")
        with torch.no_grad():
            out = self.encoder(feats.input_features, output_hidden_states=self.layer != "final")
        hidden = (
            out.last_hidden_state if self.layer == "final" else out.hidden_states[int(self.layer)]
        )
        frames = hidden[0].cpu().numpy().astype(np.float32)
        # The encoder halves the 3000-step mel grid; real-audio coverage in
        # encoder frames is duration / 30 s of the fixed context window.
        n_samples = len(waveform)
        valid = max(1, min(frames.shape[0], int(round(frames.shape[0] * n_samples / (sr * 30.0)))))
        return frames, valid


class WavLMExtractor:
    """WavLM hidden states straight from the waveform: [T x 768] for the
    large checkpoint, no padding (valid_len = T)."""

    expected_shape = (None, 768)

    def __init__(self, checkpoint: str = "microsoft/wavlm-large", layer="final"):
        _require_torch()
        import torch
        from transformers import WavLMModel

        self.model = WavLMModel.from_pretrained(checkpoint).eval()
        self.layer = layer
        self._torch = torch

    def extract(self, waveform: np.ndarray, sr: int):
        torch = self._torch
        if sr != 16_000:
            raise ValueError("WavLM expects 16 kHz input")
        wav = torch.from_numpy(np.asarray(waveform, dtype=np.float32))[None, :]
        with torch.no_grad():
            out = self.model(wav, output_hidden_states=self.layer != "final")
        hidden = (
            out.last_hidden_state if self.layer == "final" else out.hidden_states[int(self.layer)]
        )
        frames = hidden[0].cpu().numpy().astype(np.float32)
        return frames, frames.shape[0]
