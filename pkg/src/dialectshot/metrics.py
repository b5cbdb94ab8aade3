"""Task metrics, the dialect-gap statistic, and Pearson correlation with p-values.

All functions are pure and operate in float64.  Performance values travel as
percentages: accuracy in [0, 100], Matthews correlation in [-100, 100]; gap
arithmetic rescales the latter onto [0, 100] first so tasks are comparable.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special


class MetricsError(ValueError):
    """Raised on invalid metric inputs (empty, mismatched, or degenerate)."""


@dataclass
class EvalResult:
    """One evaluation cell: a model trained on one dialect scored on another."""

    train_dialect: str
    eval_dialect: str
    task: str
    mode: str  # "F" (finetuned only) or "TTA" (adapted)
    metric: str  # "accuracy" or "mcc"
    value: float  # percentage

    def __post_init__(self):
        if self.mode not in ("F", "TTA"):
            raise MetricsError(f"mode must be F or TTA, got {self.mode!r}")
        if self.metric == "accuracy":
            if not 0.0 <= self.value <= 100.0:
                raise MetricsError(f"accuracy {self.value} outside [0, 100]")
        elif self.metric == "mcc":
            if not -100.0 <= self.value <= 100.0:
                raise MetricsError(f"mcc percentage {self.value} outside [-100, 100]")
        else:
            raise MetricsError(f"unknown metric kind {self.metric!r}")


def _as_int_arrays(predictions, labels, what):
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise MetricsError(f"{what} called with empty input")
    if predictions.shape != labels.shape:
        raise MetricsError(
            f"{what}: {predictions.shape[0]} predictions vs {labels.shape[0]} labels"
        )
    return predictions, labels


def accuracy(predictions, labels):
    """Percentage of exact matches."""
    predictions, labels = _as_int_arrays(predictions, labels, "accuracy")
    return 100.0 * float(np.mean(predictions == labels))


def mcc(predictions, labels):
    """Matthews correlation coefficient for binary predictions, in [-1, 1].

    Returns 0 when any confusion-matrix margin is empty, the usual convention
    for a degenerate denominator.
    """
    predictions, labels = _as_int_arrays(predictions, labels, "mcc")
    values = set(np.unique(predictions)) | set(np.unique(labels))
    if not values <= {0, 1}:
        raise MetricsError(f"mcc requires binary classes, saw values {sorted(values)}")
    tp = float(np.sum((predictions == 1) & (labels == 1)))
    tn = float(np.sum((predictions == 0) & (labels == 0)))
    fp = float(np.sum((predictions == 1) & (labels == 0)))
    fn = float(np.sum((predictions == 0) & (labels == 1)))
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def rescale_mcc(m):
    """Map a Matthews coefficient from [-1, 1] onto [0, 1]."""
    if not -1.0 <= m <= 1.0:
        raise MetricsError(f"mcc value {m} outside [-1, 1]")
    return (m + 1.0) / 2.0


def _rescaled_pct(value, metric):
    if metric == "mcc":
        return 100.0 * rescale_mcc(value / 100.0)
    if metric == "accuracy":
        return value
    raise MetricsError(f"unknown metric kind {metric!r}")


def dialectal_gap(self_perf, cross_perfs, metric):
    """Per-dialect gaps and their average, in percentage points.

    Each gap is the self-evaluation performance minus one cross-dialect
    performance, after Matthews values are rescaled onto [0, 100] so both
    metric kinds share a range.
    """
    cross_perfs = list(cross_perfs)
    if not cross_perfs:
        raise MetricsError("dialectal_gap needs at least one cross-dialect value")
    base = _rescaled_pct(self_perf, metric)
    gaps = [base - _rescaled_pct(c, metric) for c in cross_perfs]
    return gaps, float(np.mean(gaps))


def pearson(xs, ys):
    """Sample Pearson correlation with a two-sided t-test p-value.

    The p-value comes from t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of
    freedom, evaluated through the regularized incomplete beta function.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise MetricsError("pearson requires two equal-length 1-D arrays")
    n = xs.size
    if n < 3:
        raise MetricsError(f"pearson requires n >= 3, got {n}")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise MetricsError("correlation undefined: an input has zero variance")
    r = float(dx @ dy) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return r, 0.0
    # Two-sided tail of Student's t: I_x(df/2, 1/2) at x = df / (df + t^2).
    t2 = r * r * df / (1.0 - r * r)
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t2)))
    return r, p
