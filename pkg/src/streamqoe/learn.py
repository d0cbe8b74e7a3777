"""
Training stack: sorted-stratified splitting, min-max normalization, ordinary
least squares and Lasso regression by cyclic coordinate descent.

Gradient-boosted trees live in gbm.py.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .arrays import as_design_matrix, as_target, canonical_row_order
from .errors import FeatureError, InputError, SingularMatrixError, SplitError
from .models import LinearModel
from .schema import COL_PARTITION, COL_SESSION_ID, CURVE_DIRECT_MOS, PARTITIONS
from .utils import log_event

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (8, 1, 1)


# --- Sorted-stratified splitting ---

@dataclass(frozen=True)
class SplitAssignment:
    """Partition label per sample, in input order."""
    partition_of: tuple
    ratios: tuple
    seed: int

    def __len__(self):
        return len(self.partition_of)

    def mask(self, partition):
        return np.array([label == partition for label in self.partition_of], dtype=bool)

    def indices(self, partition):
        return np.flatnonzero(self.mask(partition))

    def sizes(self):
        return {partition: int(self.mask(partition).sum()) for partition in PARTITIONS}

    def to_frame(self, session_ids):
        return pd.DataFrame({COL_SESSION_ID: list(session_ids), COL_PARTITION: list(self.partition_of)})


def parse_ratios(text):
    """'8,1,1' -> (8, 1, 1)."""
    try:
        ratios = tuple(int(part) for part in str(text).split(","))
    except ValueError as e:
        raise SplitError(f"ratios must be three comma-separated integers, got '{text}'") from e
    return validate_ratios(ratios)


def validate_ratios(ratios):
    ratios = tuple(ratios)
    if len(ratios) != len(PARTITIONS):
        raise SplitError(f"ratios must have {len(PARTITIONS)} entries (train, test, validate), got {len(ratios)}")
    if any(not isinstance(r, (int, np.integer)) or r < 0 for r in ratios):
        raise SplitError(f"ratios must be non-negative integers, got {ratios}")
    if sum(ratios) == 0:
        raise SplitError("ratios must not all be zero")
    return tuple(int(r) for r in ratios)


def sorted_stratified_split(y, ratios=DEFAULT_RATIOS, seed=0) -> SplitAssignment:
    """Sort samples by target and deal each window of k = sum(ratios)
    consecutive samples into the partitions in exact proportion.

    The trailing N mod k samples each draw one of the k window slots at
    random, so they land in a partition with probability proportional to its
    ratio.
    """
    ratios = validate_ratios(ratios)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    k = sum(ratios)
    if n < k:
        raise SplitError(f"need at least {k} samples for ratios {ratios}, got {n}")
    if np.isnan(y).any():
        raise SplitError("split target contains NaN values")

    rng = np.random.default_rng(seed)
    order = np.argsort(y, kind="stable")
    slots = np.repeat(np.arange(len(ratios)), ratios)
    labels = np.empty(n, dtype=np.int64)

    n_windows = n // k
    for window in range(n_windows):
        labels[order[window * k:(window + 1) * k]] = rng.permutation(slots)
    leftover = order[n_windows * k:]
    if leftover.size:
        labels[leftover] = slots[rng.integers(0, k, size=leftover.size)]

    return SplitAssignment(
        partition_of=tuple(PARTITIONS[label] for label in labels),
        ratios=ratios,
        seed=seed,
    )


def assignment_from_frame(frame, session_ids):
    """Rebuild a SplitAssignment from a `session_id,partition` table, aligned
    to `session_ids`."""
    for column in (COL_SESSION_ID, COL_PARTITION):
        if column not in frame.columns:
            raise SplitError(f"split table lacks column '{column}'")
    lookup = dict(zip(frame[COL_SESSION_ID].astype(str), frame[COL_PARTITION].astype(str)))
    labels = []
    for session_id in session_ids:
        label = lookup.get(str(session_id))
        if label is None:
            raise SplitError(f"session '{session_id}' has no partition label")
        if label not in PARTITIONS:
            raise SplitError(f"session '{session_id}' has unknown partition '{label}'")
        labels.append(label)
    return SplitAssignment(partition_of=tuple(labels), ratios=(), seed=-1)


# --- Min-max scaling ---

@dataclass(frozen=True)
class MinMaxScaler:
    """Per-column (min, max) learned on training rows."""
    columns: tuple
    mins: np.ndarray = field(repr=False)
    maxs: np.ndarray = field(repr=False)

    def to_normalization(self):
        return {name: (float(lo), float(hi)) for name, lo, hi in zip(self.columns, self.mins, self.maxs)}


def fit_scaler(X_train, columns=None) -> MinMaxScaler:
    """Learn column minima and maxima; NaNs are ignored."""
    if isinstance(X_train, pd.DataFrame):
        columns = tuple(X_train.columns) if columns is None else tuple(columns)
        X_train = X_train.to_numpy(dtype=np.float64)
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.ndim != 2 or X_train.shape[0] == 0:
        raise FeatureError("cannot fit a scaler on an empty training matrix")
    if columns is None:
        columns = tuple(f"x{j}" for j in range(X_train.shape[1]))
    empty = [name for name, col in zip(columns, X_train.T) if np.isnan(col).all()]
    if empty:
        raise FeatureError(f"columns without any training value: {', '.join(empty)}")
    return MinMaxScaler(columns=tuple(columns), mins=np.nanmin(X_train, axis=0), maxs=np.nanmax(X_train, axis=0))


def apply_scaler(X, scaler: MinMaxScaler):
    """(x - min) / (max - min) per column, unclipped; constant columns map to 0."""
    if isinstance(X, pd.DataFrame):
        scaled = apply_scaler(X[list(scaler.columns)].to_numpy(dtype=np.float64), scaler)
        return pd.DataFrame(scaled, columns=list(scaler.columns), index=X.index)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(scaler.columns):
        raise FeatureError(f"scaler expects {len(scaler.columns)} columns, got {X.shape[-1]}")
    span = scaler.maxs - scaler.mins
    constant = span == 0
    scaled = (X - scaler.mins) / np.where(constant, 1.0, span)
    return np.where(constant, 0.0, scaled)


# --- Linear regression ---

def _dependent_columns(A, names):
    """Columns of A that add no rank given the columns before them."""
    dependent = []
    kept = A[:, :0]
    rank = 0
    for j, name in enumerate(names):
        candidate = np.column_stack([kept, A[:, j]])
        new_rank = np.linalg.matrix_rank(candidate)
        if new_rank > rank:
            kept, rank = candidate, new_rank
        else:
            dependent.append(name)
    return dependent


def _feature_names(X, feature_names):
    d = X.shape[1]
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(d))
    if len(names) != d:
        raise FeatureError(f"{len(names)} feature names given for {d} columns")
    return names


def ols_fit(X, y, feature_names=None, name="ols", curve_mode=CURVE_DIRECT_MOS) -> LinearModel:
    """Least squares with an intercept; rank deficiency is an error."""
    X = as_design_matrix(X)
    y = as_target(y, X.shape[0])
    names = _feature_names(X, feature_names)
    order = canonical_row_order(X, y)
    X, y = X[order], y[order]

    A = np.column_stack([np.ones(X.shape[0]), X])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise SingularMatrixError(_dependent_columns(A, ("intercept",) + names))
    solution, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel(
        name=name,
        intercept=float(solution[0]),
        weights=dict(zip(names, solution[1:].tolist())),
        curve_mode=curve_mode,
    )


@dataclass(frozen=True)
class LassoConfig:
    alpha: float = 0.00005
    max_iter: int = 10000
    tol: float = 1e-8

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InputError(f"lasso alpha must be non-negative, got {self.alpha}")
        if not isinstance(self.max_iter, int) or self.max_iter < 1:
            raise InputError(f"lasso max_iter must be a positive integer, got {self.max_iter}")
        if not self.tol > 0:
            raise InputError(f"lasso tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class LassoResult:
    coef: np.ndarray
    intercept: float
    n_iter: int
    converged: bool
    objective_history: tuple


def soft_threshold(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def lasso_objective(X, y, coef, intercept, alpha):
    """(1/2N) ||y - w0 - Xw||^2 + alpha ||w||_1"""
    residual = y - intercept - X @ coef
    return float(residual @ residual / (2 * X.shape[0]) + alpha * np.abs(coef).sum())


def lasso_coordinate_descent(X, y, cfg: LassoConfig = LassoConfig()) -> LassoResult:
    """Cyclic coordinate descent on centered data; the intercept is not
    penalized. Stops once a full sweep moves no coefficient by tol or more."""
    X = as_design_matrix(X)
    y = as_target(y, X.shape[0])
    n, d = X.shape

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = np.asfortranarray(X - x_mean)
    residual = y - y_mean
    col_sq = (Xc ** 2).sum(axis=0) / n
    coef = np.zeros(d)

    def objective():
        return float(residual @ residual / (2 * n) + cfg.alpha * np.abs(coef).sum())

    history = [objective()]
    converged = False
    n_iter = 0
    for n_iter in range(1, cfg.max_iter + 1):
        max_change = 0.0
        for j in range(d):
            if col_sq[j] == 0:
                continue
            old = coef[j]
            rho = Xc[:, j] @ residual / n + col_sq[j] * old
            new = soft_threshold(rho, cfg.alpha) / col_sq[j]
            if new != old:
                residual -= Xc[:, j] * (new - old)
                coef[j] = new
                max_change = max(max_change, abs(new - old))
        history.append(objective())
        if max_change < cfg.tol:
            converged = True
            break

    return LassoResult(
        coef=coef,
        intercept=y_mean - float(x_mean @ coef),
        n_iter=n_iter,
        converged=converged,
        objective_history=tuple(history),
    )


def lasso_fit(X, y, cfg: LassoConfig = LassoConfig(), feature_names=None, name="lasso",
              curve_mode=CURVE_DIRECT_MOS) -> LinearModel:
    """Lasso regression; zero coefficients are left out of the weights."""
    X = as_design_matrix(X)
    y = as_target(y, X.shape[0])
    names = _feature_names(X, feature_names)
    order = canonical_row_order(X, y)

    result = lasso_coordinate_descent(X[order], y[order], cfg)
    if not result.converged:
        logger.warning(
            f"Lasso did not converge within {cfg.max_iter} sweeps (alpha={cfg.alpha}, tol={cfg.tol})"
        )
        log_event("lasso_not_converged", model=name, alpha=cfg.alpha, max_iter=cfg.max_iter)

    weights = {feature: float(w) for feature, w in zip(names, result.coef) if w != 0}
    return LinearModel(
        name=name,
        intercept=result.intercept,
        weights=weights,
        curve_mode=curve_mode,
        converged=result.converged,
    )
