"""Feature-bundle extraction from annotated images.

Turns images plus bounding-box annotations into the four-CSV feature
bundle exchange format: 512-dim residual-network features of the
original, object-only, and context-only versions of each image, plus
per-class log odds from a small classifier head.
"""

from feature_extractor.annotations import (
    AnnotatedImage,
    AnnotationError,
    load_annotations,
)
from feature_extractor.preprocess import (
    NoBoxForClass,
    UndecodableImage,
    blackout,
    preprocess_image,
)
from feature_extractor.extract import extract_bundles

__all__ = [
    "AnnotatedImage",
    "AnnotationError",
    "NoBoxForClass",
    "UndecodableImage",
    "blackout",
    "extract_bundles",
    "load_annotations",
    "preprocess_image",
]

__version__ = "0.1.0"
