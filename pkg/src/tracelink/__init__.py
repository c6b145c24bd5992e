"""Trace link recovery, maintenance, explanation, and vetting toolkit."""

from .corpus import (
    Artifact,
    ArtifactSet,
    Dataset,
    TraceLink,
    TraceMatrix,
    build_vocabulary,
    load_dataset,
    save_dataset,
)
from .preprocess import DEFAULT_STOPWORDS, PreprocessConfig, preprocess

__version__ = "0.1.0"

__all__ = [
    "Artifact",
    "ArtifactSet",
    "Dataset",
    "TraceLink",
    "TraceMatrix",
    "PreprocessConfig",
    "DEFAULT_STOPWORDS",
    "build_vocabulary",
    "load_dataset",
    "save_dataset",
    "preprocess",
    "__version__",
]
