import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from notepool.errors import MetricsError
from notepool.metrics import auc_roc, roc_points
from notepool.persist import read_csv


def auc_pairwise(scores, labels):
    """Brute-force Mann-Whitney: average pair credit with 1/2 for ties."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    credit = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                credit += 1.0
            elif p == q:
                credit += 0.5
    return credit / (len(pos) * len(neg))


score_label_sets = st.integers(min_value=0, max_value=10 ** 9).map(
    lambda seed: _random_set(seed))


def _random_set(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 40))
    # Coarse grid forces plenty of ties.
    scores = rng.integers(0, 5, size=n) / 4.0
    labels = rng.integers(0, 2, size=n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    return scores, labels


class TestAucRoc:
    def test_textbook_example(self):
        assert auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_ties_get_half_credit(self):
        assert auc_roc([1.0, 1.0, 1.0, 0.0], [1, 0, 1, 0]) == 0.75

    def test_perfect_and_inverted(self):
        assert auc_roc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
        assert auc_roc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_constant_scores_are_chance(self):
        assert auc_roc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_matches_pairwise_oracle_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            scores, labels = _random_set(int(rng.integers(0, 2 ** 32)))
            assert auc_roc(scores, labels) == auc_pairwise(scores, labels)

    @given(score_label_sets)
    def test_pairwise_oracle_property(self, case):
        scores, labels = case
        assert auc_roc(scores, labels) == auc_pairwise(scores, labels)

    @given(score_label_sets)
    def test_monotone_transform_invariance(self, case):
        scores, labels = case
        assert auc_roc(3.0 * scores - 1.0, labels) == auc_roc(scores, labels)

    @given(score_label_sets)
    def test_label_flip_complements(self, case):
        scores, labels = case
        assert auc_roc(scores, 1 - labels) == pytest.approx(
            1.0 - auc_roc(scores, labels))

    def test_single_class_rejected(self):
        with pytest.raises(MetricsError, match="positive and.*negative"):
            auc_roc([0.1, 0.2], [1, 1])

    def test_bad_labels_rejected(self):
        with pytest.raises(MetricsError, match="0 or 1"):
            auc_roc([0.1, 0.2], [1, 2])

    def test_non_finite_scores_rejected(self):
        with pytest.raises(MetricsError, match="non-finite"):
            auc_roc([np.nan, 0.2], [1, 0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(MetricsError, match="aligned"):
            auc_roc([0.1, 0.2, 0.3], [1, 0])

    def test_empty_rejected(self):
        with pytest.raises(MetricsError, match="empty"):
            auc_roc([], [])


class TestRocPoints:
    def test_textbook_vertices(self):
        curve = roc_points([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert curve.thresholds.tolist() == [np.inf, 0.8, 0.4, 0.35, 0.1]
        assert curve.fpr.tolist() == [0.0, 0.0, 0.5, 0.5, 1.0]
        assert curve.tpr.tolist() == [0.0, 0.5, 0.5, 1.0, 1.0]

    def test_tied_scores_pool_into_one_vertex(self):
        curve = roc_points([1.0, 1.0, 1.0, 0.0], [1, 0, 1, 0])
        assert curve.thresholds.tolist() == [np.inf, 1.0, 0.0]
        assert curve.fpr.tolist() == [0.0, 0.5, 1.0]
        assert curve.tpr.tolist() == [0.0, 1.0, 1.0]

    def test_starts_at_origin_ends_at_corner(self):
        curve = roc_points([0.3, 0.7, 0.1], [0, 1, 1])
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    @given(score_label_sets)
    @settings(max_examples=60)
    def test_area_equals_auc(self, case):
        scores, labels = case
        curve = roc_points(scores, labels)
        assert curve.area() == pytest.approx(auc_roc(scores, labels), abs=1e-12)

    @given(score_label_sets)
    @settings(max_examples=60)
    def test_rates_monotone(self, case):
        scores, labels = case
        curve = roc_points(scores, labels)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)
        assert np.all(np.diff(curve.thresholds) < 0)

    def test_save_csv(self, tmp_path):
        curve = roc_points([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        path = tmp_path / "roc.csv"
        curve.save_csv(path)
        header, rows = read_csv(path)
        assert header == ["fpr", "tpr", "threshold"]
        assert len(rows) == 5
        assert rows[0] == ["0.0", "0.0", "inf"]
