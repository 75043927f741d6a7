"""Training-free geometric evaluation of frozen embeddings."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    DatasetManifest,
    DistanceMatrix,
    EmbeddingSet,
    LabelSet,
    ManifestItem,
    SequenceEmbedding,
)
from .errors import DegenerateDataError, FormatError, GeomevalError, ParameterError  # noqa: F401
