"""Audio front ends that emit geomeval interchange tensors."""

__version__ = "0.1.0"

from .extract import AdapterSpec, MODEL_IDS, expected_shape, extract_and_dump  # noqa: F401
