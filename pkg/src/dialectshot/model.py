"""The trainable head over frozen embeddings: GRU bottleneck, feature norm, classifier.

A :class:`Head` owns all trainable parameters plus the normalization layer's
running statistics, exposes them as a flat named map, and provides cached
forward/backward passes.  The frozen encoder itself never appears here; its
output arrives as the embedded sequences in a dataset.
"""

import hashlib
from dataclasses import dataclass, asdict

import numpy as np

from .layers import BatchNorm1d, BiGRU, Identity, LayerNorm, Linear
from .numerics import NumericsError

CLASSIFIER_PREFIX = "cls."

NORM_KINDS = ("batch", "layer", "none")


@dataclass
class Arch:
    """Architecture descriptor; every parameter shape derives from these sizes."""

    input_dim: int
    gru_hidden: int = 256
    classifier_hidden: int = 256
    n_classes: int = 2
    gru_layers: int = 2
    norm: str = "batch"

    def validate(self):
        for field in ("input_dim", "gru_hidden", "classifier_hidden", "gru_layers"):
            if getattr(self, field) < 1:
                raise NumericsError(f"arch.{field} must be >= 1")
        if self.n_classes < 2:
            raise NumericsError("arch.n_classes must be >= 2")
        if self.norm not in NORM_KINDS:
            raise NumericsError(f"arch.norm must be one of {NORM_KINDS}")

    @property
    def feature_dim(self):
        return 2 * self.gru_hidden

    def to_dict(self):
        return asdict(self)


class Head:
    """Bottleneck + classifier with hand-written backward passes.

    Parameters live in ``self.params`` (name -> array); normalization running
    statistics live in ``self.stats``.  Forward passes mutate nothing except
    the running statistics, and those only in training mode.
    """

    def __init__(self, arch: Arch, seed=0, dtype=np.float32):
        arch.validate()
        self.arch = arch
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.gru = BiGRU(arch.input_dim, arch.gru_hidden, arch.gru_layers, rng, dtype)
        if arch.norm == "batch":
            self.norm = BatchNorm1d(arch.feature_dim, dtype)
        elif arch.norm == "layer":
            self.norm = LayerNorm(arch.feature_dim, dtype)
        else:
            self.norm = Identity()
        self.fc1 = Linear(arch.feature_dim, arch.classifier_hidden, rng, dtype)
        self.fc2 = Linear(arch.classifier_hidden, arch.n_classes, rng, dtype)
        self.params = {}
        for name, arr in self.gru.params().items():
            self.params[f"gru.{name}"] = arr
        for name, arr in self.norm.params().items():
            self.params[f"norm.{name}"] = arr
        for name, arr in self.fc1.params().items():
            self.params[f"{CLASSIFIER_PREFIX}fc1.{name}"] = arr
        for name, arr in self.fc2.params().items():
            self.params[f"{CLASSIFIER_PREFIX}fc2.{name}"] = arr
        self.stats = {f"norm.{k}": v for k, v in self.norm.stats().items()}
        self._relu_mask = None

    def forward(self, x, lengths, training=False):
        """Run the head on a (batch, S, D) embedding batch.

        Returns ``(features, logits)`` with features of shape (batch, 2H) and
        logits of shape (batch, K).  Caches activations for ``backward``.
        """
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3 or x.shape[2] != self.arch.input_dim:
            raise NumericsError(
                f"expected batch of shape (n, S, {self.arch.input_dim}), got {x.shape}"
            )
        feat = self.norm.forward(self.gru.forward(x, lengths), training)
        a1 = self.fc1.forward(feat)
        h1 = np.maximum(a1, 0.0)
        self._relu_mask = (a1 > 0.0).astype(self.dtype)
        logits = self.fc2.forward(h1)
        return feat, logits

    def backward(self, dlogits, freeze=()):
        """Backpropagate from a logits gradient; returns a name -> grad map.

        ``freeze`` is a tuple of parameter-name prefixes whose gradients are
        omitted from the result.  The chain rule still runs through frozen
        layers so upstream gradients stay exact.
        """
        if self._relu_mask is None:
            raise NumericsError("model backward called without a forward pass")
        dh1 = self.fc2.backward(np.asarray(dlogits, dtype=self.dtype))
        da1 = dh1 * self._relu_mask
        dfeat = self.fc1.backward(da1)
        dgru_feat = self.norm.backward(dfeat)
        self.gru.backward(dgru_feat)
        grads = {}
        for name, g in self.gru.grads.items():
            grads[f"gru.{name}"] = g
        for name, g in self.norm.grads.items():
            grads[f"norm.{name}"] = g
        for name, g in self.fc1.grads.items():
            grads[f"{CLASSIFIER_PREFIX}fc1.{name}"] = g
        for name, g in self.fc2.grads.items():
            grads[f"{CLASSIFIER_PREFIX}fc2.{name}"] = g
        if freeze:
            grads = {
                name: g
                for name, g in grads.items()
                if not any(name.startswith(p) for p in freeze)
            }
        return grads

    def trainable_names(self, freeze=()):
        return [
            name
            for name in self.params
            if not any(name.startswith(p) for p in freeze)
        ]

    def copy(self):
        """Deep copy: parameters, statistics, and descriptor all duplicated."""
        other = Head(self.arch, seed=0, dtype=self.dtype)
        for name, arr in self.params.items():
            other.params[name][...] = arr
        for name, arr in self.stats.items():
            other.stats[name][...] = arr
        return other


def classifier_digest(head: Head) -> str:
    """Hex sha256 over the classifier parameter block, in sorted name order."""
    h = hashlib.sha256()
    for name in sorted(head.params):
        if name.startswith(CLASSIFIER_PREFIX):
            h.update(np.ascontiguousarray(head.params[name]).tobytes())
    return h.hexdigest()
