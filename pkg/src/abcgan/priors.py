"""Explicit prior generative models: ordinary least squares and boosted trees.

Both priors are fit on training data and used as the point-prediction base
that the misspecification injectors corrupt.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

RIDGE_FALLBACK_LAMBDA = 1e-8

PRIOR_KINDS = ("linear", "gbt")


class RankDeficientError(ValueError):
    """The design matrix is rank deficient; a ridge fallback is available."""


class NotFittedError(ValueError):
    """The model has no populated fit."""


@dataclass
class LinearFit:
    """OLS coefficients, intercept first: yhat = beta[0] + X @ beta[1:]."""

    beta: np.ndarray

    def __post_init__(self) -> None:
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.beta.ndim != 1 or not np.all(np.isfinite(self.beta)):
            raise ValueError("beta must be a finite 1-D coefficient vector")


def fit_ols(X: np.ndarray, y: np.ndarray, allow_ridge_fallback: bool = True) -> LinearFit:
    """Least-squares fit via the normal equations and a Cholesky solve.

    A rank-deficient design either raises RankDeficientError or, with the
    default fallback enabled, is regularized with a tiny ridge term and a
    warning (keeps collinear real-world tables usable).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if n <= p + 1:
        raise ValueError(f"need more than p+1={p + 1} rows to fit OLS, got {n}")
    A = np.column_stack([np.ones(n), X])
    gram = A.T @ A
    rhs = A.T @ y
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        if not allow_ridge_fallback:
            raise RankDeficientError(
                "design matrix is rank deficient; retry with "
                "allow_ridge_fallback=True to use a small ridge penalty"
            ) from None
        warnings.warn(
            f"rank-deficient design; falling back to ridge with "
            f"lambda={RIDGE_FALLBACK_LAMBDA}",
            stacklevel=2,
        )
        chol = np.linalg.cholesky(gram + RIDGE_FALLBACK_LAMBDA * np.eye(p + 1))
    beta = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    return LinearFit(beta)


def predict_linear(fit: LinearFit, X: np.ndarray) -> np.ndarray:
    """Deterministic mean predictions intercept + X @ coefficients."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != fit.beta.shape[0] - 1:
        raise ValueError(
            f"fit has {fit.beta.shape[0] - 1} features, X has {X.shape[1]} columns"
        )
    return fit.beta[0] + X @ fit.beta[1:]


@dataclass
class GBTConfig:
    n_trees: int = 200
    max_depth: int = 3
    shrinkage: float = 0.1
    min_leaf: int = 2


@dataclass
class RegressionTree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray    # int, split feature or -1
    threshold: np.ndarray  # split point (midpoint between sorted neighbours)
    left: np.ndarray       # child index or -1
    right: np.ndarray
    value: np.ndarray      # node mean; the prediction at leaves
    max_depth: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


@dataclass
class TreeEnsemble:
    """base + shrinkage * sum of tree outputs."""

    base: float
    trees: list[RegressionTree]
    shrinkage: float


class _TreeBuilder:
    def __init__(self, X: np.ndarray, max_depth: int, min_leaf: int):
        self.X = X
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def _best_split(self, idx: np.ndarray, resid: np.ndarray):
        # Exhaustive scan over every (feature, midpoint) candidate; the split
        # minimizing total within-child SSE wins, ties to the lowest feature
        # index then the lowest position (argmin's first occurrence).
        n = idx.shape[0]
        best = None
        r = resid[idx]
        parent_sse = float(np.sum(r * r) - np.sum(r) ** 2 / n)
        for f in range(self.X.shape[1]):
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            rs = r[order]
            c1 = np.cumsum(rs)
            c2 = np.cumsum(rs * rs)
            sizes = np.arange(1, n)
            valid = (
                (sizes >= self.min_leaf)
                & (n - sizes >= self.min_leaf)
                & (xs_sorted[1:] > xs_sorted[:-1])
            )
            if not np.any(valid):
                continue
            s1l, s2l = c1[:-1], c2[:-1]
            sse_left = s2l - s1l * s1l / sizes
            sse_right = (c2[-1] - s2l) - (c1[-1] - s1l) ** 2 / (n - sizes)
            sse = np.where(valid, sse_left + sse_right, np.inf)
            pos = int(np.argmin(sse))
            if best is None or sse[pos] < best[0]:
                thr = 0.5 * (xs_sorted[pos] + xs_sorted[pos + 1])
                best = (float(sse[pos]), f, thr)
        if best is None or best[0] >= parent_sse - 1e-12 * (1.0 + abs(parent_sse)):
            return None
        return best[1], best[2]

    def build(self, idx: np.ndarray, resid: np.ndarray, depth: int) -> int:
        node = self._new_node(float(resid[idx].mean()))
        if depth >= self.max_depth or idx.shape[0] < 2 * self.min_leaf:
            return node
        split = self._best_split(idx, resid)
        if split is None:
            return node
        f, thr = split
        go_left = self.X[idx, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(idx[go_left], resid, depth + 1)
        self.right[node] = self.build(idx[~go_left], resid, depth + 1)
        return node

    def finish(self) -> RegressionTree:
        return RegressionTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
            max_depth=self.max_depth,
        )


def _tree_predict(tree: RegressionTree, X: np.ndarray) -> np.ndarray:
    if tree.feature.max(initial=-1) >= X.shape[1]:
        raise ValueError(
            f"tree splits on feature {int(tree.feature.max())} but X has only "
            f"{X.shape[1]} columns"
        )
    cur = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        internal = tree.feature[cur] >= 0
        if not np.any(internal):
            return tree.value[cur]
        f = np.where(internal, tree.feature[cur], 0)
        go_left = X[np.arange(X.shape[0]), f] <= tree.threshold[cur]
        nxt = np.where(go_left, tree.left[cur], tree.right[cur])
        cur = np.where(internal, nxt, cur)


def fit_gbt(X: np.ndarray, y: np.ndarray, config: GBTConfig | None = None) -> TreeEnsemble:
    """Least-squares gradient boosting: tree t fits the residuals after t-1 trees.

    Splits greedily minimize within-child SSE over midpoints between
    consecutive sorted unique feature values. A degenerate constant target
    yields trivial trees and a base-only ensemble, which is valid output.
    """
    config = config or GBTConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 2 * config.min_leaf:
        raise ValueError(
            f"need at least 2*min_leaf={2 * config.min_leaf} rows, got {n}"
        )
    base = float(y.mean())
    pred = np.full(n, base)
    trees: list[RegressionTree] = []
    for _ in range(config.n_trees):
        builder = _TreeBuilder(X, config.max_depth, config.min_leaf)
        builder.build(np.arange(n), y - pred, depth=0)
        tree = builder.finish()
        trees.append(tree)
        pred += config.shrinkage * _tree_predict(tree, X)
    return TreeEnsemble(base=base, trees=trees, shrinkage=config.shrinkage)


def predict_gbt(ensemble: TreeEnsemble, X: np.ndarray) -> np.ndarray:
    """Deterministic ensemble prediction base + shrinkage * sum of trees."""
    X = np.asarray(X, dtype=np.float64)
    out = np.full(X.shape[0], ensemble.base)
    for tree in ensemble.trees:
        out += ensemble.shrinkage * _tree_predict(tree, X)
    return out


@dataclass
class PriorModel:
    """A fitted prior: exactly one of the two fits is populated."""

    kind: str
    linear: LinearFit | None = None
    trees: TreeEnsemble | None = None

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if (self.kind == "linear") != (self.linear is not None) or (
            self.kind == "gbt"
        ) != (self.trees is not None):
            raise ValueError("exactly the fit matching `kind` must be populated")


def fit_prior(
    kind: str, X: np.ndarray, y: np.ndarray, gbt_config: GBTConfig | None = None
) -> PriorModel:
    if kind == "linear":
        return PriorModel(kind="linear", linear=fit_ols(X, y))
    if kind == "gbt":
        return PriorModel(kind="gbt", trees=fit_gbt(X, y, gbt_config))
    raise ValueError(f"unknown prior kind {kind!r}; expected one of {PRIOR_KINDS}")


def prior_point_predictions(model: PriorModel, X: np.ndarray) -> np.ndarray:
    """Noise-free point predictions; the base that misspecification corrupts."""
    if model.kind == "linear":
        if model.linear is None:
            raise NotFittedError("linear prior has no fit")
        return predict_linear(model.linear, X)
    if model.trees is None:
        raise NotFittedError("tree prior has no fit")
    return predict_gbt(model.trees, X)
