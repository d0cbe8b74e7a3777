"""
Gradient-boosted regression trees.

Each boosting stage fits a depth-limited regression tree to the negative
gradient of the loss (Huber by default) and adds it, shrunk by the learning
rate, to the running prediction. Splits are scored with Friedman's
improvement criterion over a random subset of features per node.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .arrays import as_design_matrix, as_target, canonical_row_order
from .errors import FeatureError, InputError, ModelFormatError

logger = logging.getLogger(__name__)

LOSSES = ("huber", "squared_error")
CRITERIA = ("friedman_mse",)
# Splits must improve on the node's sum of squares by more than this share.
MIN_RELATIVE_GAIN = 1e-12


@dataclass(frozen=True)
class GbmHyperParams:
    n_estimators: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_split: int = 10
    min_samples_leaf: int = 6
    max_features: str | int | None = "sqrt"
    loss: str = "huber"
    huber_quantile: float = 0.9
    criterion: str = "friedman_mse"

    def __post_init__(self):
        if not isinstance(self.n_estimators, int) or self.n_estimators < 0:
            raise InputError(f"n_estimators must be a non-negative integer, got {self.n_estimators}")
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if not isinstance(self.max_depth, int) or self.max_depth < 1:
            raise InputError(f"max_depth must be a positive integer, got {self.max_depth}")
        if not isinstance(self.min_samples_split, int) or self.min_samples_split < 2:
            raise InputError(f"min_samples_split must be an integer >= 2, got {self.min_samples_split}")
        if not isinstance(self.min_samples_leaf, int) or self.min_samples_leaf < 1:
            raise InputError(f"min_samples_leaf must be a positive integer, got {self.min_samples_leaf}")
        if self.loss not in LOSSES:
            raise InputError(f"loss must be one of {', '.join(LOSSES)}, got '{self.loss}'")
        if self.criterion not in CRITERIA:
            raise InputError(f"criterion must be one of {', '.join(CRITERIA)}, got '{self.criterion}'")
        if not 0 < self.huber_quantile <= 1:
            raise InputError(f"huber_quantile must lie in (0, 1], got {self.huber_quantile}")
        if isinstance(self.max_features, str):
            if self.max_features not in ("sqrt", "all"):
                raise InputError(f"max_features must be 'sqrt', 'all' or an integer, got '{self.max_features}'")
        elif self.max_features is not None and (not isinstance(self.max_features, int) or self.max_features < 1):
            raise InputError(f"max_features must be a positive integer, got {self.max_features}")

    def candidate_count(self, n_features):
        """Number of features searched at each node."""
        if self.max_features == "sqrt":
            return max(1, math.ceil(math.sqrt(n_features)))
        if self.max_features in (None, "all"):
            return n_features
        return min(n_features, self.max_features)

    def to_dict(self):
        return {
            "n_estimators": self.n_estimators,
            "learning_rate": self.learning_rate,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "loss": self.loss,
            "huber_quantile": self.huber_quantile,
            "criterion": self.criterion,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class TreeNode:
    """A split (feature_index set) or a leaf of a regression tree.

    `value` is the leaf output; on split nodes it is the mean pseudo-residual
    and is informational only. `impurity` is the node's mean squared deviation
    of pseudo-residuals.
    """
    n_samples: int
    impurity: float
    value: float
    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self):
        return self.feature_index is None

    def iter_nodes(self):
        yield self
        if not self.is_leaf:
            yield from self.left.iter_nodes()
            yield from self.right.iter_nodes()

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def predict(self, X):
        out = np.empty(X.shape[0], dtype=np.float64)
        self._fill(X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, X, rows, out):
        if self.is_leaf:
            out[rows] = self.value
            return
        goes_left = X[rows, self.feature_index] <= self.threshold
        self.left._fill(X, rows[goes_left], out)
        self.right._fill(X, rows[~goes_left], out)

    def to_dict(self):
        node = {"samples": self.n_samples, "impurity": self.impurity, "value": self.value}
        if not self.is_leaf:
            node.update({
                "feature": self.feature_index,
                "threshold": self.threshold,
                "left": self.left.to_dict(),
                "right": self.right.to_dict(),
            })
        return node

    @classmethod
    def from_dict(cls, data):
        try:
            if "feature" in data:
                return cls(
                    n_samples=int(data["samples"]),
                    impurity=float(data["impurity"]),
                    value=float(data["value"]),
                    feature_index=int(data["feature"]),
                    threshold=float(data["threshold"]),
                    left=cls.from_dict(data["left"]),
                    right=cls.from_dict(data["right"]),
                )
            return cls(n_samples=int(data["samples"]), impurity=float(data["impurity"]), value=float(data["value"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"invalid tree node: {e}") from e


@dataclass(frozen=True)
class GbmEnsemble:
    """prediction = init_value + learning_rate * sum(tree outputs)."""
    init_value: float
    trees: tuple
    learning_rate: float
    hyper: GbmHyperParams
    feature_names: tuple
    huber_deltas: tuple = field(default=())

    @property
    def n_features(self):
        return len(self.feature_names)

    def to_dict(self):
        return {
            "init_value": self.init_value,
            "learning_rate": self.learning_rate,
            "hyper": self.hyper.to_dict(),
            "feature_names": list(self.feature_names),
            "huber_deltas": list(self.huber_deltas),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                init_value=float(data["init_value"]),
                trees=tuple(TreeNode.from_dict(t) for t in data["trees"]),
                learning_rate=float(data["learning_rate"]),
                hyper=GbmHyperParams.from_dict(data["hyper"]),
                feature_names=tuple(data["feature_names"]),
                huber_deltas=tuple(float(d) for d in data.get("huber_deltas", [])),
            )
        except (KeyError, TypeError) as e:
            raise ModelFormatError(f"invalid gradient-boosting ensemble: {e}") from e


# --- Tree construction ---

def huber_leaf_value(residuals, delta):
    """Median plus the clipped mean deviation from it."""
    median = np.median(residuals)
    deviation = residuals - median
    return float(median + np.mean(np.sign(deviation) * np.minimum(np.abs(deviation), delta)))


class _TreeBuilder:
    """Grows one regression tree on pseudo-residuals."""

    def __init__(self, hyper: GbmHyperParams, rng: np.random.Generator):
        self.hyper = hyper
        self.rng = rng

    def build(self, X, pseudo, residuals, delta):
        self.X = X
        self.pseudo = pseudo
        self.residuals = residuals
        self.delta = delta
        self.n_candidates = self.hyper.candidate_count(X.shape[1])
        return self._grow(np.arange(X.shape[0]), depth=0)

    def _leaf_value(self, rows):
        if self.hyper.loss == "huber":
            return huber_leaf_value(self.residuals[rows], self.delta)
        return float(np.mean(self.residuals[rows]))

    def _grow(self, rows, depth):
        target = self.pseudo[rows]
        n = rows.shape[0]
        impurity = float(np.var(target))
        hyper = self.hyper

        can_split = (
            depth < hyper.max_depth
            and n >= hyper.min_samples_split
            and n >= 2 * hyper.min_samples_leaf
        )
        split = self._best_split(rows) if can_split else None
        if split is None:
            return TreeNode(n_samples=n, impurity=impurity, value=self._leaf_value(rows))

        feature, threshold = split
        goes_left = self.X[rows, feature] <= threshold
        return TreeNode(
            n_samples=n,
            impurity=impurity,
            value=float(np.mean(target)),
            feature_index=feature,
            threshold=threshold,
            left=self._grow(rows[goes_left], depth + 1),
            right=self._grow(rows[~goes_left], depth + 1),
        )

    def _best_split(self, rows):
        """Best (feature, threshold) by Friedman improvement, or None.

        Ties go to the lowest feature index, then the lowest threshold.
        """
        n = rows.shape[0]
        min_leaf = self.hyper.min_samples_leaf
        target = self.pseudo[rows]
        node_sse = float(np.sum((target - target.mean()) ** 2))
        if node_sse <= 0:
            return None

        n_features = self.X.shape[1]
        candidates = np.sort(self.rng.choice(n_features, size=self.n_candidates, replace=False))
        n_left = np.arange(1, n)
        n_right = n - n_left
        size_ok = (n_left >= min_leaf) & (n_right >= min_leaf)

        best_gain = MIN_RELATIVE_GAIN * node_sse
        best = None
        for feature in candidates:
            values = self.X[rows, feature]
            order = np.argsort(values, kind="stable")
            xs = values[order]
            cumulative = np.cumsum(target[order])
            total = cumulative[-1]

            valid = size_ok & (xs[1:] > xs[:-1])
            if not valid.any():
                continue
            sum_left = cumulative[:-1]
            mean_diff = sum_left / n_left - (total - sum_left) / n_right
            gain = np.where(valid, n_left * n_right / n * mean_diff ** 2, -np.inf)
            position = int(np.argmax(gain))
            if gain[position] > best_gain:
                best_gain = float(gain[position])
                low, high = xs[position], xs[position + 1]
                threshold = (low + high) / 2.0
                if threshold >= high:
                    threshold = low
                best = (int(feature), float(threshold))
        return best


# --- Boosting ---

def huber_loss(residuals, delta):
    """Mean Huber loss of residuals at threshold delta."""
    a = np.abs(residuals)
    quadratic = 0.5 * a ** 2
    linear = delta * (a - 0.5 * delta)
    return float(np.mean(np.where(a <= delta, quadratic, linear)))


def gbm_fit(X, y, hyper: GbmHyperParams = GbmHyperParams(), seed=0, feature_names=None) -> GbmEnsemble:
    """Fit a gradient-boosted tree ensemble; deterministic given seed."""
    X = as_design_matrix(X)
    y = as_target(y, X.shape[0])
    n, d = X.shape
    if n < hyper.min_samples_split:
        raise InputError(f"need at least min_samples_split={hyper.min_samples_split} rows, got {n}")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(d))
    if len(names) != d:
        raise FeatureError(f"{len(names)} feature names given for {d} columns")

    order = canonical_row_order(X, y)
    X, y = X[order], y[order]

    rng = np.random.default_rng(seed)
    builder = _TreeBuilder(hyper, rng)
    init_value = float(np.median(y)) if hyper.loss == "huber" else float(np.mean(y))
    prediction = np.full(n, init_value)

    trees, deltas = [], []
    for _ in range(hyper.n_estimators):
        residuals = y - prediction
        if hyper.loss == "huber":
            delta = float(np.quantile(np.abs(residuals), hyper.huber_quantile))
            pseudo = np.where(np.abs(residuals) <= delta, residuals, delta * np.sign(residuals))
        else:
            delta = 0.0
            pseudo = residuals
        tree = builder.build(X, pseudo, residuals, delta)
        prediction = prediction + hyper.learning_rate * tree.predict(X)
        trees.append(tree)
        deltas.append(delta)

    logger.debug(f"Fitted {len(trees)} trees on {n} rows x {d} features")
    return GbmEnsemble(
        init_value=init_value,
        trees=tuple(trees),
        learning_rate=hyper.learning_rate,
        hyper=hyper,
        feature_names=names,
        huber_deltas=tuple(deltas),
    )


def _check_width(X, ensemble):
    X = as_design_matrix(X)
    if X.shape[1] != ensemble.n_features:
        raise FeatureError(f"model expects {ensemble.n_features} features, got {X.shape[1]}")
    return X


def staged_predict(X, ensemble: GbmEnsemble):
    """Yield predictions after each successive tree."""
    X = _check_width(X, ensemble)
    prediction = np.full(X.shape[0], ensemble.init_value)
    for tree in ensemble.trees:
        prediction = prediction + ensemble.learning_rate * tree.predict(X)
        yield prediction


def gbm_predict(X, ensemble: GbmEnsemble, n_trees=None) -> np.ndarray:
    """init + learning_rate * sum of the first n_trees trees (all by default)."""
    X = _check_width(X, ensemble)
    trees = ensemble.trees if n_trees is None else ensemble.trees[:n_trees]
    if n_trees is not None and not 0 <= n_trees <= len(ensemble.trees):
        raise InputError(f"n_trees must lie in 0..{len(ensemble.trees)}, got {n_trees}")
    total = np.zeros(X.shape[0])
    for tree in trees:
        total += tree.predict(X)
    return ensemble.init_value + ensemble.learning_rate * total


def feature_importance(ensemble: GbmEnsemble) -> dict:
    """Mean decrease in impurity per feature, normalized to sum 1.

    Each split contributes its weighted impurity decrease divided by the
    tree's root sample count; contributions are averaged over the trees that
    split at all.
    """
    per_tree = []
    for tree in ensemble.trees:
        if tree.is_leaf:
            continue
        accumulated = np.zeros(ensemble.n_features)
        for node in tree.iter_nodes():
            if node.is_leaf:
                continue
            decrease = (
                node.n_samples * node.impurity
                - node.left.n_samples * node.left.impurity
                - node.right.n_samples * node.right.impurity
            )
            accumulated[node.feature_index] += decrease / tree.n_samples
        per_tree.append(accumulated)

    if not per_tree:
        importances = np.zeros(ensemble.n_features)
    else:
        importances = np.mean(per_tree, axis=0)
        total = importances.sum()
        if total > 0:
            importances = importances / total
        else:
            importances = np.zeros(ensemble.n_features)
    return dict(zip(ensemble.feature_names, importances.tolist()))
