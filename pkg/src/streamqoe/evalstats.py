"""
Rank statistics and error metrics: Spearman correlation with average-rank
ties, its two-sided Student-t p-value, MAE, the median baseline and the
per-partition evaluation report.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import StatsInputError
from .schema import CORRELATION_COLUMNS, PART_ALL, PARTITIONS, REPORT_COLUMNS

logger = logging.getLogger(__name__)

MIN_CORRELATION_SAMPLES = 3
SMALLEST_NORMAL = float(np.finfo(np.float64).tiny)
MAX_SERIES_TERMS = 100000
SERIES_TOLERANCE = 1e-17


@dataclass(frozen=True)
class CorrelationResult:
    srcc: float
    p_value: float
    n: int
    log10_p: float


def _paired(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise StatsInputError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    return x, y


def spearman(x, y) -> float:
    """Pearson correlation of fractional ranks."""
    x, y = _paired(x, y)
    n = x.shape[0]
    if n < MIN_CORRELATION_SAMPLES:
        raise StatsInputError(f"spearman needs at least {MIN_CORRELATION_SAMPLES} samples, got {n}")
    if np.isnan(x).any() or np.isnan(y).any():
        raise StatsInputError("spearman inputs contain NaN")
    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denominator = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denominator == 0:
        raise StatsInputError("spearman undefined: zero rank variance")
    r = float(dx @ dy) / denominator
    return min(1.0, max(-1.0, r))


def _t_statistic(srcc, n):
    return srcc * math.sqrt((n - 2) / (1 - srcc * srcc))


def spearman_pvalue(srcc, n) -> float:
    """Two-sided p of t = r sqrt((n-2)/(1-r^2)) under Student-t with n-2 dof."""
    if n < MIN_CORRELATION_SAMPLES:
        raise StatsInputError(f"p-value needs n >= {MIN_CORRELATION_SAMPLES}, got {n}")
    if abs(srcc) >= 1:
        return 0.0
    t = _t_statistic(srcc, n)
    return float(min(1.0, 2.0 * special.stdtr(n - 2, -abs(t))))


def log_pvalue_tail(srcc, n) -> float:
    """Natural log of the two-sided p-value, computed in log space.

    The two-sided Student-t tail equals the regularized incomplete beta
    I_x(a, 1/2) with a = (n-2)/2 and x = 1 - r^2; its hypergeometric series
    is summed directly so the result stays finite where p underflows.
    """
    a = (n - 2) / 2.0
    b = 0.5
    x = (1.0 - srcc) * (1.0 + srcc)
    series = term = 1.0
    for k in range(MAX_SERIES_TERMS):
        term *= (a + b + k) / (a + 1.0 + k) * x
        series += term
        if term < SERIES_TOLERANCE * series:
            break
    return a * math.log(x) + b * math.log1p(-x) - math.log(a) - float(special.betaln(a, b)) + math.log(series)


def spearman_log10_pvalue(srcc, n) -> float:
    """log10 of the two-sided p-value; stays finite where p underflows."""
    p = spearman_pvalue(srcc, n)
    if p == 0.0 and abs(srcc) >= 1:
        return -math.inf
    if p >= SMALLEST_NORMAL:
        return math.log10(p)
    return log_pvalue_tail(srcc, n) / math.log(10.0)


def correlate(x, y) -> CorrelationResult:
    x, y = _paired(x, y)
    r = spearman(x, y)
    n = x.shape[0]
    return CorrelationResult(srcc=r, p_value=spearman_pvalue(r, n), n=n, log10_p=spearman_log10_pvalue(r, n))


def mae(pred, truth) -> float:
    pred, truth = _paired(pred, truth)
    if pred.shape[0] == 0:
        raise StatsInputError("mae needs at least one sample")
    return float(np.mean(np.abs(pred - truth)))


@dataclass(frozen=True)
class MedianBaseline:
    """Constant predictor at the training median."""
    value: float

    @classmethod
    def fit(cls, y_train):
        y_train = np.asarray(y_train, dtype=np.float64).ravel()
        if y_train.shape[0] == 0:
            raise StatsInputError("baseline needs at least one training target")
        return cls(float(np.median(y_train)))

    def predict(self, n_rows):
        return np.full(n_rows, self.value)


def baseline_median(y_train) -> MedianBaseline:
    return MedianBaseline.fit(y_train)


# --- Reports ---

def _partition_order(labels):
    present = list(dict.fromkeys(labels))
    known = [p for p in PARTITIONS if p in present]
    return known + [p for p in present if p not in PARTITIONS]


def _report_row(partition, pred, truth):
    n = pred.shape[0]
    row = {
        "partition": partition, "n": n,
        "srcc": math.nan, "p_value": math.nan, "log10_p": math.nan,
        "mae": mae(pred, truth),
    }
    if n < MIN_CORRELATION_SAMPLES:
        logger.info(f"Partition '{partition}' has {n} rows; correlation left empty")
        return row
    try:
        result = correlate(pred, truth)
    except StatsInputError as e:
        logger.info(f"Partition '{partition}': {e}")
        return row
    row["srcc"] = result.srcc
    row["p_value"] = result.p_value
    row["log10_p"] = result.log10_p
    return row


def evaluation_report(pred, truth, partitions=None) -> pd.DataFrame:
    """One `partition,n,srcc,p_value,log10_p,mae` row per non-empty partition.

    `log10_p` stays finite where `p_value` underflows to 0.
    """
    pred, truth = _paired(pred, truth)
    if partitions is None:
        partitions = [PART_ALL] * pred.shape[0]
    labels = np.asarray(list(partitions), dtype=object)
    if labels.shape[0] != pred.shape[0]:
        raise StatsInputError(f"{labels.shape[0]} partition labels for {pred.shape[0]} predictions")

    present = set(labels.tolist())
    if PART_ALL not in present:
        for partition in PARTITIONS:
            if partition not in present:
                logger.info(f"Partition '{partition}' is empty; omitted from report")

    rows = []
    for partition in _partition_order(labels.tolist()):
        mask = labels == partition
        rows.append(_report_row(partition, pred[mask], truth[mask]))
    return pd.DataFrame(rows, columns=list(REPORT_COLUMNS))


def correlation_table(frame: pd.DataFrame, target, columns) -> pd.DataFrame:
    """SRCC and p-value of every column against the target column."""
    if target not in frame.columns:
        raise StatsInputError(f"table has no target column '{target}'")
    rows = []
    for column in columns:
        pair = frame[[column, target]].dropna()
        n = len(pair)
        row = {"feature": column, "n": n, "srcc": math.nan, "p_value": math.nan, "log10_p": math.nan}
        if n >= MIN_CORRELATION_SAMPLES:
            try:
                result = correlate(pair[column].to_numpy(), pair[target].to_numpy())
                row["srcc"] = result.srcc
                row["p_value"] = result.p_value
                row["log10_p"] = result.log10_p
            except StatsInputError as e:
                logger.info(f"Feature '{column}': {e}")
        else:
            logger.info(f"Feature '{column}' has {n} usable rows; correlation left empty")
        rows.append(row)
    return pd.DataFrame(rows, columns=list(CORRELATION_COLUMNS))
