"""Export CLIP text embeddings and dense image features in the lesplat file formats."""

from .export import (
    ExportManifest,
    ExportError,
    PhraseTooLongError,
    export_image_features,
    export_text_embeddings,
    load_phrases,
    read_legf,
    write_legf,
)

__all__ = [
    "ExportManifest",
    "ExportError",
    "PhraseTooLongError",
    "export_image_features",
    "export_text_embeddings",
    "load_phrases",
    "read_legf",
    "write_legf",
]
