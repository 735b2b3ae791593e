import numpy as np
import pytest
from scipy.stats import norm

from imbkit.decision import ThresholdRule, bayes_threshold
from imbkit.errors import (
    BinMismatchError,
    EmptyInputError,
    LengthMismatchError,
    MissingClassError,
)
from imbkit.metrics import (
    DIAG_CALIBRATED,
    DIAG_CLASS0_BIASED,
    average_curves,
    best_balanced_threshold,
    calibration_curve,
    evaluate,
    operating_point,
    roc_curve,
    write_calibration_csv,
    write_roc_csv,
)
from imbkit.synthetic import sample_context, true_posterior


def pair_counting_auc(scores, y):
    """O(n^2) Mann-Whitney oracle: P(s1 > s0) + 0.5 P(s1 == s0)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(y)
    s1 = s[y == 1][:, None]
    s0 = s[y == 0][None, :]
    wins = np.sum(s1 > s0) + 0.5 * np.sum(s1 == s0)
    return wins / (s1.size * s0.size)


class TestEvaluate:
    def test_perfect(self):
        r = evaluate([0, 1, 0, 1], [0, 1, 0, 1])
        assert (r.balanced, r.worst_class, r.prob_error) == (1.0, 1.0, 0.0)

    def test_all_majority_predictor(self):
        r = evaluate([0, 0, 1, 1], [0, 0, 0, 0])
        assert (r.acc_class0, r.acc_class1) == (1.0, 0.0)
        assert (r.balanced, r.worst_class) == (0.5, 0.0)

    def test_hand_arithmetic(self):
        y_true = [0] * 10 + [1] * 10
        y_pred = [0] * 9 + [1] + [1] * 7 + [0] * 3
        r = evaluate(y_true, y_pred)
        assert (r.acc_class0, r.acc_class1) == (0.9, 0.7)
        assert r.balanced == pytest.approx(0.8)
        assert r.worst_class == 0.7
        assert r.average == pytest.approx(0.8)  # balanced test set
        assert r.confusion.total == 20

    def test_validation(self):
        with pytest.raises(LengthMismatchError):
            evaluate([0, 1], [0])
        with pytest.raises(MissingClassError):
            evaluate([0, 0], [0, 1])


class TestRocCurve:
    def test_perfect_ranking(self):
        c = roc_curve([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert c.auc == 1.0
        assert c.points[0] == (0.0, 0.0)
        assert c.points[-1] == (1.0, 1.0)

    def test_constant_scores_single_diagonal_segment(self):
        c = roc_curve([0.4, 0.4, 0.4, 0.4], [0, 1, 0, 1])
        assert c.auc == 0.5
        assert c.points == [(0.0, 0.0), (1.0, 1.0)]
        assert c.thresholds[0] == 0.4
        assert np.isneginf(c.thresholds[-1])

    def test_matches_pair_counting_oracle_with_ties(self, rng):
        for _ in range(25):
            n = int(rng.integers(10, 300))
            # mixture of a coarse discrete grid (forces ties) and noise
            discrete = rng.choice([0.1, 0.25, 0.5, 0.75], size=n)
            noise = rng.uniform(size=n)
            scores = np.where(rng.uniform(size=n) < 0.6, discrete, noise)
            y = rng.integers(0, 2, size=n)
            y[:2] = [0, 1]
            assert abs(roc_curve(scores, y).auc - pair_counting_auc(scores, y)) < 1e-12

    def test_monotone_rates(self, rng):
        scores = rng.uniform(size=500)
        y = rng.integers(0, 2, size=500)
        y[:2] = [0, 1]
        c = roc_curve(scores, y)
        assert np.all(np.diff(c.fa_rate) >= 0)
        assert np.all(np.diff(c.detection_rate) >= 0)

    def test_vertices_realize_thresholds(self, rng):
        scores = rng.choice([0.2, 0.4, 0.6], size=60)
        y = rng.integers(0, 2, size=60)
        y[:2] = [0, 1]
        c = roc_curve(scores, y)
        for fa, tp, tau in zip(c.fa_rate, c.detection_rate, c.thresholds):
            fa_emp, md_emp = operating_point(scores, y, ThresholdRule(max(tau, 0.0)) if np.isfinite(tau) else 0.0)
            if np.isfinite(tau):
                assert fa == pytest.approx(fa_emp)
                assert tp == pytest.approx(1.0 - md_emp)

    def test_missing_class(self):
        with pytest.raises(MissingClassError):
            roc_curve([0.4, 0.6], [1, 1])


class TestOperatingPoint:
    def test_perfect_scores_at_half(self):
        fa, md = operating_point([0.1, 0.2, 0.9, 0.8], [0, 0, 1, 1], ThresholdRule(0.5))
        assert (fa, md) == (0.0, 0.0)

    def test_zero_threshold_boundary(self):
        fa, md = operating_point([0.3, 0.5, 0.7, 0.9], [0, 0, 1, 1], ThresholdRule(0.0))
        assert (fa, md) == (1.0, 0.0)  # every positive-score row fires

    def test_two_gaussian_analytic_operating_points(self):
        # oracle posterior under pi1 = 0.1; thresholds 0.5 and 0.1 have
        # closed-form (FA, MD) via the Gaussian CDF
        test = sample_context(20000, 20000, dim=1, separation=1.0, seed=2)
        pi1 = 0.1
        scores = true_posterior(test.features, pi1)
        L = np.log(pi1 / (1 - pi1))

        def analytic(tau):
            xb = (np.log(tau / (1 - tau)) - L) / 2.0
            return 1.0 - norm.cdf(xb + 1.0), norm.cdf(xb - 1.0)

        for tau in (0.5, 0.1):
            fa, md = operating_point(scores, test.labels, ThresholdRule(tau))
            fa_true, md_true = analytic(tau)
            assert fa == pytest.approx(fa_true, abs=0.02)
            assert md == pytest.approx(md_true, abs=0.02)
        fa_half, md_half = operating_point(scores, test.labels, ThresholdRule(0.5))
        fa_bayes, md_bayes = operating_point(scores, test.labels, bayes_threshold(pi1))
        assert md_bayes < md_half - 0.3  # misdetection drops substantially
        assert fa_bayes > fa_half  # false alarms rise


class TestBestBalancedThreshold:
    def test_separated_scores_gap_midpoint(self):
        tau, bal = best_balanced_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert bal == 1.0
        assert tau == 0.5  # midpoint of the (0.2, 0.8) gap

    def test_constant_scores_degenerate(self):
        tau, bal = best_balanced_threshold([0.3, 0.3, 0.3], [0, 1, 0])
        assert bal == 0.5
        assert tau == 0.3  # smallest (only) grid value

    def test_never_below_default_threshold(self, rng):
        for _ in range(50):
            n = int(rng.integers(6, 120))
            scores = rng.uniform(size=n)
            y = rng.integers(0, 2, size=n)
            y[:2] = [0, 1]
            _, best = best_balanced_threshold(scores, y)
            at_half = evaluate(y, (scores > 0.5).astype(int)).balanced
            assert best >= at_half - 1e-12


class TestCalibrationCurve:
    def test_calibrated_construction(self):
        rng = np.random.default_rng(3)
        scores = rng.uniform(size=20000)
        y = (rng.uniform(size=20000) < scores).astype(int)
        curve = calibration_curve(scores, y, n_bins=10)
        assert curve.diagnosis == DIAG_CALIBRATED
        assert curve.ece < 0.02
        for b in curve.nonempty():
            assert b.observed_freq == pytest.approx(b.mean_predicted, abs=0.05)

    def test_class0_shifted_labels_diagnosed(self):
        # scores are the balanced-prior posterior, labels drawn with the
        # prior shifted toward class 0: observed sits below predicted in
        # every nonempty bin
        rng = np.random.default_rng(4)
        test = sample_context(9000, 1000, dim=1, separation=1.0, seed=4)
        scores = true_posterior(test.features, 0.5)  # stale balanced scores
        curve = calibration_curve(scores, test.labels, n_bins=10)
        named = [b for b in curve.nonempty() if b.count >= 20]
        assert all(b.observed_freq < b.mean_predicted for b in named)
        assert curve.diagnosis == DIAG_CLASS0_BIASED

    def test_single_bin_degenerate(self):
        curve = calibration_curve([0.52, 0.55, 0.58], [1, 0, 1], n_bins=10)
        nonempty = curve.nonempty()
        assert len(nonempty) == 1
        b = nonempty[0]
        assert curve.ece == pytest.approx(abs(b.observed_freq - b.mean_predicted))

    def test_constant_prior_scores_vanishing_ece(self):
        rng = np.random.default_rng(5)
        pi1 = 0.3
        y = (rng.uniform(size=10000) < pi1).astype(int)
        curve = calibration_curve(np.full(10000, pi1), y, n_bins=10)
        assert curve.ece < 0.02

    def test_bins_partition_unit_interval(self, rng):
        curve = calibration_curve(rng.uniform(size=100), rng.integers(0, 2, size=100), 7)
        assert curve.bins[0].lo == 0.0
        assert curve.bins[-1].hi == 1.0
        assert sum(b.count for b in curve.bins) == 100
        for a, b in zip(curve.bins, curve.bins[1:]):
            assert a.hi == b.lo

    def test_validation(self):
        with pytest.raises(EmptyInputError):
            calibration_curve([], [])
        with pytest.raises(ValueError):
            calibration_curve([0.5], [1], n_bins=1)


class TestAverageCurves:
    def test_self_average_is_identity(self, rng):
        scores = rng.uniform(size=500)
        y = rng.integers(0, 2, size=500)
        c = calibration_curve(scores, y, 10)
        avg = average_curves([c, c])
        for a, b in zip(avg.bins, c.bins):
            assert a.count == 2 * b.count
            if b.count:
                assert a.mean_predicted == pytest.approx(b.mean_predicted)
                assert a.observed_freq == pytest.approx(b.observed_freq)
        assert avg.ece == pytest.approx(c.ece)

    def test_disjoint_bins_union(self):
        low = calibration_curve([0.05, 0.08], [0, 1], 10)
        high = calibration_curve([0.95, 0.92], [1, 1], 10)
        avg = average_curves([low, high])
        assert avg.bins[0].count == 2
        assert avg.bins[9].count == 2
        assert avg.bins[0].mean_predicted == pytest.approx(low.bins[0].mean_predicted)
        assert avg.bins[9].observed_freq == pytest.approx(high.bins[9].observed_freq)

    def test_matches_pooled_recompute(self, rng):
        s1, s2 = rng.uniform(size=300), rng.uniform(size=150)
        y1, y2 = rng.integers(0, 2, 300), rng.integers(0, 2, 150)
        avg = average_curves([
            calibration_curve(s1, y1, 10),
            calibration_curve(s2, y2, 10),
        ])
        pooled = calibration_curve(np.concatenate([s1, s2]), np.concatenate([y1, y2]), 10)
        for a, p in zip(avg.bins, pooled.bins):
            assert a.count == p.count
            if p.count:
                assert a.mean_predicted == pytest.approx(p.mean_predicted)
                assert a.observed_freq == pytest.approx(p.observed_freq)
        assert avg.ece == pytest.approx(pooled.ece)

    def test_bin_mismatch(self, rng):
        a = calibration_curve(rng.uniform(size=50), rng.integers(0, 2, 50), 10)
        b = calibration_curve(rng.uniform(size=50), rng.integers(0, 2, 50), 8)
        with pytest.raises(BinMismatchError):
            average_curves([a, b])

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            average_curves([])


class TestCsvExport:
    def test_roc_csv_columns(self, tmp_path, rng):
        scores = rng.uniform(size=30)
        y = rng.integers(0, 2, size=30)
        y[:2] = [0, 1]
        path = tmp_path / "roc.csv"
        write_roc_csv(roc_curve(scores, y), path)
        header, *rows = path.read_text().strip().splitlines()
        assert header == "x,y,threshold"
        assert rows[0].startswith("0.0,0.0,")
        assert rows[-1].endswith("-inf")

    def test_calibration_csv_columns(self, tmp_path, rng):
        curve = calibration_curve(rng.uniform(size=40), rng.integers(0, 2, 40), 5)
        path = tmp_path / "cal.csv"
        write_calibration_csv(curve, path)
        header, *rows = path.read_text().strip().splitlines()
        assert header == "bin_lo,bin_hi,mean_predicted,observed_freq,count"
        assert len(rows) == 5
