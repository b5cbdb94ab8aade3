"""Test-time adaptation of a recurrent head over frozen text embeddings.

The package trains a bidirectional-GRU bottleneck plus classifier on labeled
source embeddings, adapts it to an unlabeled target set by information
maximization with centroid pseudo-labels, and builds the evaluation apparatus
around it: train-by-eval dialect matrices, dialect-gap statistics, and their
Pearson correlation.
"""

__version__ = "0.1.0"

from .data import EmbeddedDataset, ShiftConfig, batch_iter, gen_synthetic_shift, load_dataset, save_dataset, split
from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import EvalResult, accuracy, dialectal_gap, mcc, pearson, rescale_mcc
from .model import Arch, Head, classifier_digest
from .numerics import AdamW, lr_at, softmax
from .reports import (
    build_comparison_report,
    build_gap_report,
    build_matrix_report,
)
from .shot import (
    HyperParams,
    PseudoLabelState,
    adapt,
    compute_pseudo_labels,
    evaluate,
    train_source,
    tta_loss,
)

__all__ = [
    "AdamW",
    "Arch",
    "EmbeddedDataset",
    "EvalResult",
    "Head",
    "HyperParams",
    "PseudoLabelState",
    "ShiftConfig",
    "accuracy",
    "adapt",
    "batch_iter",
    "build_comparison_report",
    "build_gap_report",
    "build_matrix_report",
    "classifier_digest",
    "compute_pseudo_labels",
    "dialectal_gap",
    "evaluate",
    "gen_synthetic_shift",
    "load_checkpoint",
    "load_dataset",
    "lr_at",
    "mcc",
    "pearson",
    "rescale_mcc",
    "save_checkpoint",
    "save_dataset",
    "softmax",
    "split",
    "train_source",
    "tta_loss",
]
