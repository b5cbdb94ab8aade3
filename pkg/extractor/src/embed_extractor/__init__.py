"""Frozen-encoder embedding extraction into embedded-dataset directories.

Reads labeled TSV text, runs a frozen pretrained encoder-only model in
evaluation mode, and writes the last-layer token embeddings (or mean-pooled
vectors) in the binary dataset-directory format consumed by downstream
training tools.  Output is deterministic: the same input and encoder produce
byte-identical files.
"""

__version__ = "0.1.0"

from .extract import ExtractError, extract
from .records import TextRecord, read_tsv
from .writer import write_dataset_dir

__all__ = ["ExtractError", "TextRecord", "extract", "read_tsv", "write_dataset_dir"]
