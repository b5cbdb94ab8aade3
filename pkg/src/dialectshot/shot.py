"""Source finetuning and source-free test-time adaptation.

``train_source`` fits the head on labeled source data with label-smoothed
cross entropy.  ``adapt`` then improves it on an unlabeled target set: the
classifier stays frozen while the bottleneck and normalization minimize an
information-maximization objective plus a cross-entropy pull toward centroid
pseudo-labels, recomputed once per epoch.  Target labels are never read.
"""

import csv
import math
from dataclasses import dataclass, asdict, replace

import numpy as np

from .data import EmbeddedDataset, batch_iter
from .losses import diversity_loss, entropy_loss, smoothed_cross_entropy
from .metrics import accuracy, mcc
from .model import Arch, CLASSIFIER_PREFIX, Head
from .numerics import AdamW, lr_at, softmax, softmax_backward


class ShotError(ValueError):
    """Raised on invalid training or adaptation inputs."""


@dataclass
class HyperParams:
    """Every training/adaptation tunable, with reproducible defaults."""

    epochs: int = 30
    batch_size: int = 32
    label_smoothing: float = 0.1
    im_multiplier: float = 1.0
    cls_multiplier: float = 0.3
    entropy_epsilon: float = 1e-5
    eta0: float = 0.001
    seed: int = 0
    gru_hidden: int = 256
    classifier_hidden: int = 256
    gru_layers: int = 2
    norm: str = "batch"
    # Smoothing for the pseudo-label term; source-style smoothing is not
    # applied to pseudo-labels by default.
    pl_smoothing: float = 0.0
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.01

    def validate(self):
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ShotError("label_smoothing must be in [0, 1)")
        if not 0.0 <= self.pl_smoothing < 1.0:
            raise ShotError("pl_smoothing must be in [0, 1)")
        if self.cls_multiplier < 0 or self.im_multiplier < 0:
            raise ShotError("loss multipliers must be >= 0")
        if self.entropy_epsilon <= 0:
            raise ShotError("entropy_epsilon must be > 0")
        if self.epochs < 0:
            raise ShotError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ShotError("batch_size must be >= 1")
        if self.eta0 < 0:
            raise ShotError("eta0 must be >= 0")
        return self

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = sorted(set(d) - {f for f in cls.__dataclass_fields__})
        if unknown:
            raise ShotError(f"unknown hyperparameter keys: {unknown}")
        d = dict(d)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return cls(**d).validate()

    def with_seed(self, seed):
        return replace(self, seed=seed)


@dataclass
class PseudoLabelState:
    """Class centroids and the current hard assignment for a target set."""

    centroids: np.ndarray  # (K, feature_dim)
    labels: np.ndarray  # (N,) int64
    round: int


def _cosine_distances(features, centroids):
    f_norm = np.linalg.norm(features, axis=1, keepdims=True)
    c_norm = np.linalg.norm(centroids, axis=1, keepdims=True)
    sims = (features @ centroids.T) / (f_norm * np.maximum(c_norm.T, 1e-12))
    return 1.0 - sims


def compute_pseudo_labels(features, probs) -> PseudoLabelState:
    """Two-round centroid pseudo-labeling.

    Round 0 builds probability-weighted centroids and assigns each example to
    its nearest centroid in cosine distance; round 1 rebuilds centroids from
    the resulting one-hot assignment (empty classes keep their round-0
    centroid) and reassigns.  Ties break toward the lowest class index.
    """
    features = np.asarray(features, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    n, k = probs.shape
    if features.shape[0] != n:
        raise ShotError("features and probs must cover the same examples")
    zero = np.nonzero(np.linalg.norm(features, axis=1) == 0.0)[0]
    if zero.size:
        raise ShotError(f"example {int(zero[0])} has an all-zero feature vector")

    weight = probs.sum(axis=0)
    centroids = (probs.T @ features) / np.maximum(weight, 1e-12)[:, None]
    labels = np.argmin(_cosine_distances(features, centroids), axis=1)

    refined = centroids.copy()
    for cls in range(k):
        members = labels == cls
        if members.any():
            refined[cls] = features[members].mean(axis=0)
    labels = np.argmin(_cosine_distances(features, refined), axis=1)
    return PseudoLabelState(centroids=refined, labels=labels.astype(np.int64), round=1)


def tta_loss(probs, logits, pseudo_labels, hp: HyperParams):
    """Adaptation objective; returns (total, dtotal/dlogits, component dict).

    ``probs`` must be the softmax of ``logits``.  The total is
    im_multiplier * (entropy + diversity) + cls_multiplier * pseudo-label CE.
    """
    ent, dent = entropy_loss(probs, hp.entropy_epsilon)
    div, ddiv = diversity_loss(probs, hp.entropy_epsilon)
    ce, dce = smoothed_cross_entropy(logits, pseudo_labels, hp.pl_smoothing)
    total = hp.im_multiplier * (ent + div) + hp.cls_multiplier * ce
    dlogits = softmax_backward(hp.im_multiplier * (dent + ddiv), probs)
    dlogits += hp.cls_multiplier * dce
    parts = {"entropy": ent, "diversity": div, "pseudo_ce": ce}
    return total, dlogits, parts


def _write_log(path, rows, fieldnames):
    if path is None or not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def _check_dataset_for(model: Head, ds: EmbeddedDataset, what):
    if ds.d != model.arch.input_dim:
        raise ShotError(
            f"{what} embedding dim {ds.d} does not match model input dim {model.arch.input_dim}"
        )
    if ds.k != model.arch.n_classes:
        raise ShotError(f"{what} has k={ds.k}, model expects {model.arch.n_classes} classes")


def train_source(dataset: EmbeddedDataset, hp: HyperParams, log_path=None) -> Head:
    """Train bottleneck and classifier jointly on a labeled source set.

    Deterministic given ``hp.seed``: initialization, epoch shuffles, and the
    optimizer all derive from it.
    """
    hp.validate()
    if dataset.labels is None:
        raise ShotError("source training requires a labeled dataset")
    arch = Arch(
        input_dim=dataset.d,
        gru_hidden=hp.gru_hidden,
        classifier_hidden=hp.classifier_hidden,
        n_classes=dataset.k,
        gru_layers=hp.gru_layers,
        norm=hp.norm,
    )
    model = Head(arch, seed=hp.seed)
    opt = AdamW(hp.betas, hp.adam_eps, hp.weight_decay)
    n_batches = math.ceil(dataset.n / hp.batch_size)
    total_steps = hp.epochs * n_batches
    step = 0
    rows = []
    for epoch in range(hp.epochs):
        losses = []
        lr = hp.eta0
        order_seed = np.random.SeedSequence([hp.seed, epoch])
        for batch in batch_iter(dataset, hp.batch_size, seed=order_seed, shuffle=True):
            _, logits = model.forward(batch.embeddings, batch.lengths, training=True)
            loss, dlogits = smoothed_cross_entropy(logits, batch.labels, hp.label_smoothing)
            grads = model.backward(dlogits)
            lr = lr_at(step / total_steps, hp.eta0)
            opt.step(model.params, grads, lr)
            step += 1
            losses.append(loss)
        rows.append({"epoch": epoch, "loss": float(np.mean(losses)), "lr": lr})
    _write_log(log_path, rows, ["epoch", "loss", "lr"])
    return model


def _forward_full(model: Head, ds: EmbeddedDataset, chunk=256):
    """Evaluation-mode forward over the whole set, in file order."""
    feats, probs = [], []
    for batch in batch_iter(ds, chunk):
        f, logits = model.forward(batch.embeddings, batch.lengths, training=False)
        feats.append(f)
        probs.append(softmax(logits))
    return np.concatenate(feats), np.concatenate(probs)


def adapt(model: Head, target: EmbeddedDataset, hp: HyperParams, log_path=None) -> Head:
    """Source-free adaptation of ``model`` to an unlabeled target set.

    The classifier block is frozen (bit-identical before and after); the
    bottleneck and normalization layer carry the adaptation.  Each epoch
    recomputes centroid pseudo-labels from the current features, then takes
    one pass of tta_loss steps over shuffled batches.  Target labels, when
    present, are never read.
    """
    hp.validate()
    _check_dataset_for(model, target, "target dataset")
    work = model.copy()
    freeze = (CLASSIFIER_PREFIX,)
    opt = AdamW(hp.betas, hp.adam_eps, hp.weight_decay)
    n_batches = math.ceil(target.n / hp.batch_size)
    total_steps = hp.epochs * n_batches
    step = 0
    rows = []
    for epoch in range(hp.epochs):
        features, probs = _forward_full(work, target)
        pseudo = compute_pseudo_labels(features, probs)
        sums = {"entropy": 0.0, "diversity": 0.0, "pseudo_ce": 0.0, "total": 0.0}
        lr = hp.eta0
        order_seed = np.random.SeedSequence([hp.seed, epoch])
        for batch in batch_iter(target, hp.batch_size, seed=order_seed, shuffle=True):
            _, logits = work.forward(batch.embeddings, batch.lengths, training=True)
            batch_probs = softmax(logits)
            total, dlogits, parts = tta_loss(
                batch_probs, logits, pseudo.labels[batch.indices], hp
            )
            grads = work.backward(dlogits, freeze=freeze)
            lr = lr_at(step / total_steps, hp.eta0)
            opt.step(work.params, grads, lr)
            step += 1
            for key, val in parts.items():
                sums[key] += val
            sums["total"] += total
        row = {key: val / n_batches for key, val in sums.items()}
        row.update({"epoch": epoch, "lr": lr})
        rows.append(row)
    _write_log(log_path, rows, ["epoch", "entropy", "diversity", "pseudo_ce", "total", "lr"])
    return work


def predict(model: Head, ds: EmbeddedDataset, chunk=256):
    """Evaluation-mode class predictions over the whole set, in file order."""
    preds = []
    for batch in batch_iter(ds, chunk):
        _, logits = model.forward(batch.embeddings, batch.lengths, training=False)
        preds.append(np.argmax(logits, axis=1))
    return np.concatenate(preds)


def evaluate(model: Head, ds: EmbeddedDataset):
    """Score the model on a labeled set with the dataset's metric.

    Returns a percentage: accuracy in [0, 100], or the Matthews coefficient
    scaled to [-100, 100].
    """
    if ds.labels is None:
        raise ShotError("evaluation requires a labeled dataset")
    _check_dataset_for(model, ds, "evaluation dataset")
    preds = predict(model, ds)
    if ds.metric == "accuracy":
        return accuracy(preds, ds.labels)
    return 100.0 * mcc(preds, ds.labels)
