#!/usr/bin/env python3
"""
Tests for Spearman correlation, its p-value, MAE, the median baseline and
evaluation reports.
"""

import math

import numpy as np
import pandas as pd
import pytest
from scipy import integrate, special

from streamqoe.errors import StatsInputError
from streamqoe.evalstats import (
    baseline_median,
    correlate,
    correlation_table,
    evaluation_report,
    log_pvalue_tail,
    mae,
    spearman,
    spearman_log10_pvalue,
    spearman_pvalue,
)


def _average_ranks(values):
    """Brute-force fractional ranks."""
    ranks = []
    for v in values:
        below = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        ranks.append(below + (equal + 1) / 2.0)
    return np.array(ranks)


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    return float(a @ b / math.sqrt((a @ a) * (b @ b)))


def _t_pdf(t, dof):
    log_norm = special.gammaln((dof + 1) / 2) - special.gammaln(dof / 2) - 0.5 * math.log(dof * math.pi)
    return math.exp(log_norm - (dof + 1) / 2 * math.log1p(t * t / dof))


class TestSpearman:
    def test_monotone(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == -1.0

    def test_ties(self):
        x, y = [1, 2, 2, 4], [1, 2, 3, 4]
        expected = _pearson(_average_ranks(x), _average_ranks(y))
        assert spearman(x, y) == pytest.approx(expected, abs=1e-12)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        checked = 0
        while checked < 500:
            n = int(rng.integers(3, 21))
            x = rng.integers(0, 6, size=n).astype(float)
            y = rng.integers(0, 6, size=n).astype(float)
            if len(set(x)) < 2 or len(set(y)) < 2:
                continue
            expected = _pearson(_average_ranks(x.tolist()), _average_ranks(y.tolist()))
            assert spearman(x, y) == pytest.approx(expected, abs=1e-12)
            checked += 1

    @pytest.mark.parametrize("transform", [np.exp, lambda v: 3 * v - 7, lambda v: v ** 3])
    def test_invariant_under_monotone_transform(self, transform):
        rng = np.random.default_rng(1)
        x = rng.normal(size=40)
        y = x + rng.normal(size=40)
        assert spearman(transform(x), y) == pytest.approx(spearman(x, y), abs=1e-12)

    def test_self_correlation(self):
        x = np.array([3.0, 1.0, 1.0, 7.0])
        assert spearman(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_too_few_samples(self):
        with pytest.raises(StatsInputError, match="at least 3"):
            spearman([1, 2], [1, 2])

    def test_zero_rank_variance(self):
        with pytest.raises(StatsInputError, match="zero rank variance"):
            spearman([1, 1, 1], [1, 2, 3])

    def test_length_mismatch(self):
        with pytest.raises(StatsInputError, match="length mismatch"):
            spearman([1, 2, 3], [1, 2, 3, 4])

    def test_nan_rejected(self):
        with pytest.raises(StatsInputError, match="NaN"):
            spearman([1.0, np.nan, 3.0], [1.0, 2.0, 3.0])


class TestSpearmanPValue:
    def test_null_correlation(self):
        assert spearman_pvalue(0.0, 50) == 1.0

    def test_perfect_correlation(self):
        assert spearman_pvalue(1.0, 10) == 0.0
        assert spearman_pvalue(-1.0, 10) == 0.0
        assert spearman_log10_pvalue(1.0, 10) == -math.inf

    def test_published_magnitude(self):
        p = spearman_pvalue(0.5118, 450)
        assert 2.1e-32 <= p <= 2.1e-30

    def test_quadrature_oracle(self):
        r, n = 0.9, 10
        dof = n - 2
        t = r * math.sqrt(dof / (1 - r * r))
        tail, _ = integrate.quad(_t_pdf, t, math.inf, args=(dof,), epsabs=0, epsrel=1e-12)
        assert spearman_pvalue(r, n) == pytest.approx(2 * tail, rel=1e-8)

    def test_monotone_in_correlation(self):
        values = [spearman_pvalue(r, 30) for r in np.linspace(0.0, 0.95, 20)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_monotone_in_sample_size(self):
        values = [spearman_pvalue(0.3, n) for n in range(5, 200, 10)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_symmetric(self):
        assert spearman_pvalue(-0.4, 25) == spearman_pvalue(0.4, 25)

    def test_small_n_rejected(self):
        with pytest.raises(StatsInputError):
            spearman_pvalue(0.5, 2)


class TestLogPValue:
    def test_tail_matches_direct_log(self):
        p = spearman_pvalue(0.9, 200)
        assert p > 0
        assert log_pvalue_tail(0.9, 200) == pytest.approx(math.log(p), rel=1e-9)

    def test_tail_matches_moderate_case(self):
        p = spearman_pvalue(0.5118, 450)
        assert log_pvalue_tail(0.5118, 450) == pytest.approx(math.log(p), rel=1e-9)

    def test_finite_where_p_underflows(self):
        assert spearman_pvalue(0.999, 2000) == 0.0
        log10_p = spearman_log10_pvalue(0.999, 2000)

        assert math.isfinite(log10_p)
        assert log10_p < -300

    def test_log10_matches_p_when_representable(self):
        assert spearman_log10_pvalue(0.3, 100) == pytest.approx(math.log10(spearman_pvalue(0.3, 100)))

    def test_correlate_bundle(self):
        result = correlate([1, 2, 3, 4, 5], [2, 1, 4, 3, 5])

        assert result.n == 5
        assert result.srcc == pytest.approx(0.8)
        assert result.p_value == pytest.approx(spearman_pvalue(0.8, 5))
        assert result.log10_p == pytest.approx(math.log10(result.p_value))


class TestMae:
    def test_identical(self):
        assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_constant_offset(self):
        assert mae(np.arange(5.0) + 1, np.arange(5.0)) == 1.0

    def test_hand_sum(self):
        assert mae([1.0, -2.0, 4.0], [0.5, 1.0, 4.0]) == pytest.approx((0.5 + 3.0 + 0.0) / 3)

    def test_length_mismatch(self):
        with pytest.raises(StatsInputError):
            mae([1.0], [1.0, 2.0])

    def test_empty(self):
        with pytest.raises(StatsInputError):
            mae([], [])


class TestMedianBaseline:
    def test_predicts_median(self):
        baseline = baseline_median([1.0, 2.0, 3.0])

        assert baseline.value == 2.0
        np.testing.assert_array_equal(baseline.predict(4), np.full(4, 2.0))

    def test_symmetric_target(self):
        y = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
        baseline = baseline_median(y)
        assert mae(baseline.predict(len(y)), y) == pytest.approx(np.mean(np.abs(y)))

    def test_median_minimizes_mae(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            y = rng.normal(size=int(rng.integers(1, 30)))
            best = mae(baseline_median(y).predict(len(y)), y)
            candidates = np.concatenate([y, np.linspace(y.min() - 1, y.max() + 1, 101)])
            for c in candidates:
                assert best <= mae(np.full(len(y), c), y) + 1e-12

    def test_empty(self):
        with pytest.raises(StatsInputError):
            baseline_median([])


class TestEvaluationReport:
    def test_perfect_predictions(self):
        truth = np.arange(10.0)
        report = evaluation_report(truth, truth)

        assert report["partition"].tolist() == ["all"]
        assert report.loc[0, "srcc"] == 1.0
        assert report.loc[0, "mae"] == 0.0
        assert report.loc[0, "n"] == 10

    def test_partition_rows(self):
        rng = np.random.default_rng(3)
        truth = rng.normal(size=30)
        pred = truth + rng.normal(scale=0.5, size=30)
        labels = ["validate"] * 5 + ["train"] * 20 + ["test"] * 5
        report = evaluation_report(pred, truth, labels)

        assert list(report.columns) == ["partition", "n", "srcc", "p_value", "log10_p", "mae"]
        assert report["partition"].tolist() == ["train", "test", "validate"]
        train = report[report["partition"] == "train"].iloc[0]
        mask = np.array(labels) == "train"
        assert train["n"] == 20
        assert train["srcc"] == pytest.approx(spearman(pred[mask], truth[mask]))
        assert train["p_value"] == pytest.approx(spearman_pvalue(train["srcc"], 20))
        assert train["mae"] == pytest.approx(mae(pred[mask], truth[mask]))

    def test_empty_partition_omitted(self, caplog):
        truth = np.arange(12.0)
        with caplog.at_level("INFO", logger="streamqoe.evalstats"):
            report = evaluation_report(truth, truth, ["train"] * 10 + ["test"] * 2)

        assert report["partition"].tolist() == ["train", "test"]
        assert "'validate' is empty" in caplog.text
        assert math.isnan(report.loc[1, "srcc"])
        assert report.loc[1, "mae"] == 0.0

    def test_label_count_mismatch(self):
        with pytest.raises(StatsInputError):
            evaluation_report([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], ["train"])

    def test_log10_p_where_p_underflows(self):
        truth = np.arange(2000.0)
        pred = truth.copy()
        pred[[-2, -1]] = pred[[-1, -2]]
        report = evaluation_report(pred, truth)
        row = report.iloc[0]

        assert 0.9999999 < row["srcc"] < 1.0
        assert row["p_value"] == 0.0
        assert math.isfinite(row["log10_p"])
        assert row["log10_p"] < -300
        assert row["log10_p"] == pytest.approx(spearman_log10_pvalue(row["srcc"], 2000))

    def test_log10_p_matches_p_value(self):
        rng = np.random.default_rng(5)
        truth = rng.normal(size=40)
        report = evaluation_report(truth + rng.normal(size=40), truth)

        assert report.loc[0, "log10_p"] == pytest.approx(math.log10(report.loc[0, "p_value"]))


class TestCorrelationTable:
    def test_rows_per_feature(self):
        frame = pd.DataFrame({
            "a": [1.0, 2.0, 3.0, 4.0],
            "b": [4.0, 3.0, 2.0, 1.0],
            "c": [1.0, 1.0, 1.0, 1.0],
            "mos": [10.0, 20.0, 30.0, 40.0],
        })
        table = correlation_table(frame, "mos", ["a", "b", "c"])

        assert table["feature"].tolist() == ["a", "b", "c"]
        assert table["srcc"].tolist()[:2] == [1.0, -1.0]
        assert math.isnan(table.loc[2, "srcc"])

    def test_missing_target(self):
        with pytest.raises(StatsInputError):
            correlation_table(pd.DataFrame({"a": [1.0]}), "mos", ["a"])

    def test_log10_p_where_p_underflows(self):
        target = np.arange(2000.0)
        feature = target.copy()
        feature[[-2, -1]] = feature[[-1, -2]]
        table = correlation_table(pd.DataFrame({"f": feature, "mos": target}), "mos", ["f"])

        assert list(table.columns) == ["feature", "n", "srcc", "p_value", "log10_p"]
        assert table.loc[0, "p_value"] == 0.0
        assert table.loc[0, "log10_p"] < -300
        assert table.loc[0, "log10_p"] == pytest.approx(spearman_log10_pvalue(table.loc[0, "srcc"], 2000))

    def test_undefined_rows_leave_log10_p_empty(self):
        frame = pd.DataFrame({"c": [1.0, 1.0, 1.0, 1.0], "mos": [1.0, 2.0, 3.0, 4.0]})
        assert math.isnan(correlation_table(frame, "mos", ["c"]).loc[0, "log10_p"])
