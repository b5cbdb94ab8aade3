import numpy as np
import pytest
from scipy import stats as scipy_stats
from sklearn.metrics import matthews_corrcoef

from dialectshot.metrics import (
    EvalResult,
    MetricsError,
    accuracy,
    dialectal_gap,
    mcc,
    pearson,
    rescale_mcc,
)

from paper_tables import GAP_TABLE, PEARSON_P, PEARSON_R


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 100.0

    def test_all_wrong(self):
        assert accuracy([1, 1, 1], [0, 0, 0]) == 0.0

    def test_three_of_four(self):
        assert accuracy([1, 0, 1, 1], [1, 0, 1, 0]) == 75.0

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, 50)
        labels = rng.integers(0, 2, 50)
        perm = rng.permutation(50)
        assert accuracy(preds, labels) == accuracy(preds[perm], labels[perm])

    def test_empty_rejected(self):
        with pytest.raises(MetricsError):
            accuracy([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricsError):
            accuracy([1, 0], [1])


class TestMcc:
    def test_perfect(self):
        assert mcc([1, 0, 1, 0], [1, 0, 1, 0]) == pytest.approx(1.0)

    def test_inverted(self):
        assert mcc([0, 1, 0, 1], [1, 0, 1, 0]) == pytest.approx(-1.0)

    def test_frozen_confusion_counts(self):
        # TP=3, FP=1, FN=2, TN=4: 10 / sqrt(600)
        preds = [1] * 3 + [1] + [0] * 2 + [0] * 4
        labels = [1] * 3 + [0] + [1] * 2 + [0] * 4
        assert mcc(preds, labels) == pytest.approx(0.4082482904638631, abs=1e-12)

    def test_zero_denominator_convention(self):
        assert mcc([1, 1, 1], [1, 0, 1]) == 0.0
        assert mcc([0, 1, 0], [0, 0, 0]) == 0.0

    def test_class_swap_symmetry(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 2, 40)
        labels = rng.integers(0, 2, 40)
        assert mcc(preds, labels) == pytest.approx(mcc(1 - preds, 1 - labels), abs=1e-12)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            preds = rng.integers(0, 2, 30)
            labels = rng.integers(0, 2, 30)
            assert mcc(preds, labels) == pytest.approx(
                matthews_corrcoef(labels, preds), abs=1e-12
            )

    def test_non_binary_rejected(self):
        with pytest.raises(MetricsError, match="binary"):
            mcc([0, 1, 2], [0, 1, 1])


class TestRescaleMcc:
    def test_endpoints(self):
        assert rescale_mcc(-1.0) == 0.0
        assert rescale_mcc(1.0) == 1.0

    def test_published_self_performance(self):
        assert rescale_mcc(0.4944) == pytest.approx(0.7472)

    def test_out_of_range(self):
        with pytest.raises(MetricsError):
            rescale_mcc(1.2)


class TestDialectalGap:
    def test_published_mcc_row(self):
        gaps, _ = dialectal_gap(49.44, [15.55], "mcc")
        assert gaps[0] == pytest.approx(16.95, abs=0.0105)

    def test_published_accuracy_rows(self):
        gaps, _ = dialectal_gap(91.97, [87.52], "accuracy")
        assert gaps[0] == pytest.approx(4.45, abs=0.0105)
        gaps, _ = dialectal_gap(58.12, [58.57], "accuracy")
        assert gaps[0] == pytest.approx(-0.45, abs=0.0105)

    def test_identical_values_give_zero(self):
        for metric, value in (("accuracy", 73.0), ("mcc", -12.0)):
            gaps, avg = dialectal_gap(value, [value], metric)
            assert gaps == [0.0] and avg == 0.0

    def test_antisymmetry(self):
        a, b = 61.0, 48.5
        (g1,), _ = dialectal_gap(a, [b], "accuracy")
        (g2,), _ = dialectal_gap(b, [a], "accuracy")
        assert g1 == pytest.approx(-g2)

    def test_average_is_mean(self):
        gaps, avg = dialectal_gap(90.0, [80.0, 85.0, 70.0], "accuracy")
        assert gaps == [10.0, 5.0, 20.0]
        assert avg == pytest.approx(np.mean(gaps))

    def test_bad_metric_kind(self):
        with pytest.raises(MetricsError):
            dialectal_gap(50.0, [40.0], "f1")

    def test_empty_cross_list(self):
        with pytest.raises(MetricsError):
            dialectal_gap(50.0, [], "accuracy")


class TestPearson:
    def test_positive_affine_gives_one(self):
        xs = np.arange(5.0)
        r, p = pearson(xs, 2 * xs + 1)
        assert r == pytest.approx(1.0)
        assert p == pytest.approx(0.0, abs=1e-12)

    def test_negation_gives_minus_one(self):
        xs = np.array([0.3, 1.9, -0.7, 2.2])
        r, _ = pearson(xs, -xs)
        assert r == pytest.approx(-1.0)

    def test_published_gap_delta_pairs(self):
        gaps = [GAP_TABLE[k][0] for k in sorted(GAP_TABLE)]
        deltas = [GAP_TABLE[k][1] for k in sorted(GAP_TABLE)]
        r, p = pearson(gaps, deltas)
        assert r == pytest.approx(PEARSON_R, abs=0.001)
        assert p == pytest.approx(PEARSON_P, abs=0.0005)

    def test_affine_invariance(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(size=12)
        ys = rng.normal(size=12)
        r0, p0 = pearson(xs, ys)
        r1, p1 = pearson(3.7 * xs + 11.0, 0.25 * ys - 4.0)
        assert abs(r0 - r1) < 1e-12
        assert abs(p0 - p1) < 1e-12

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(4)
        for n in (3, 5, 9, 40):
            xs = rng.normal(size=n)
            ys = rng.normal(size=n) + 0.5 * xs
            r, p = pearson(xs, ys)
            ref_r, ref_p = scipy_stats.pearsonr(xs, ys)
            assert r == pytest.approx(ref_r, abs=1e-12)
            assert p == pytest.approx(ref_p, abs=1e-10)

    def test_zero_variance_rejected(self):
        with pytest.raises(MetricsError, match="variance"):
            pearson([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])

    def test_too_short_rejected(self):
        with pytest.raises(MetricsError):
            pearson([1.0, 2.0], [2.0, 4.0])


class TestEvalResult:
    def test_range_validation(self):
        with pytest.raises(MetricsError):
            EvalResult("a", "b", "t", "F", "accuracy", 105.0)
        with pytest.raises(MetricsError):
            EvalResult("a", "b", "t", "F", "mcc", -150.0)
        with pytest.raises(MetricsError):
            EvalResult("a", "b", "t", "X", "accuracy", 50.0)
        EvalResult("a", "b", "t", "TTA", "mcc", -50.0)
