"""Batch extraction: audio manifest in, interchange tensors + manifest out."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from . import logmel
from .audio import TARGET_SR, load_clip
from .tensorfile import read_audio_manifest, write_manifest, write_tensor

log = logging.getLogger("geomeval_adapters")


@dataclass(frozen=True)
class AdapterSpec:
    model_id: str
    output_dir: str
    layer: str = "final"
    sample_rate: int = TARGET_SR


class _LogMel:
    expected_shape = (None, 128)

    def __init__(self, layer="final"):
        if layer != "final":
            raise ValueError("the log-mel front end has no layers; use --layer final")

    def extract(self, waveform, sr):
        return logmel.extract(waveform, sr)


def _build_extractor(spec: AdapterSpec):
    if spec.model_id == "logmel":
        return _LogMel(spec.layer)
    if spec.model_id == "whisper":
        from .encoders import WhisperEncoderExtractor

        return WhisperEncoderExtractor(layer=spec.layer)
    if spec.model_id == "wavlm":
        from .encoders import WavLMExtractor

        return WavLMExtractor(layer=spec.layer)
    raise ValueError(f"unknown model {spec.model_id!r}; expected logmel, whisper, or wavlm")


MODEL_IDS = ("logmel", "whisper", "wavlm")


def expected_shape(model_id: str):
    """Declared [T, D] for a model; None marks a clip-dependent axis."""
    return {
        "logmel": _LogMel.expected_shape,
        "whisper": (1500, 1280),
        "wavlm": (None, 768),
    }[model_id]


def extract_and_dump(spec: AdapterSpec, audio_manifest_path) -> str:
    """Run the extractor over every manifest clip; write one tensor per clip
    plus a dataset manifest. Undecodable clips are skipped with a log entry;
    zero successes is an error. Returns the output manifest path."""
    clips = read_audio_manifest(audio_manifest_path)
    os.makedirs(spec.output_dir, exist_ok=True)
    extractor = _build_extractor(spec)

    rows = []
    skipped = 0
    for clip_id, label, audio_path in clips:
        try:
            waveform, duration = load_clip(audio_path, spec.sample_rate)
            frames, valid_len = extractor.extract(waveform, spec.sample_rate)
        except (OSError, ValueError) as exc:
            skipped += 1
            log.warning("skipping clip %r (%s): %s", clip_id, audio_path, exc)
            continue
        tensor_path = os.path.join(spec.output_dir, f"{clip_id}.gevl")
        write_tensor(tensor_path, frames, valid_len=valid_len)
        rows.append((clip_id, label, duration, tensor_path))

    if not rows:
        raise RuntimeError(f"no clip could be extracted from {audio_manifest_path}")
    if skipped:
        log.warning("%d of %d clips skipped", skipped, len(clips))
    manifest_path = os.path.join(spec.output_dir, "manifest.csv")
    write_manifest(manifest_path, rows)
    return manifest_path
