"""Leaf-wise gradient-boosted regression trees for squared loss.

Each boosting round fits a tree to the current residuals (the negative
gradient of squared loss). Trees grow best-first: the leaf with the
largest split gain anywhere in the tree is expanded next, under joint
constraints on depth, leaf count, and minimum leaf population.

Split scoring uses score(S) = -(sum r)^2 / (|S| + lambda_l2) with
gain = score(parent) - score(left) - score(right), and leaf values
sum(r) / (|S| + lambda_l2). Candidate thresholds are midpoints between
consecutive distinct sorted feature values (exact enumeration; the data
here is small enough that histogram binning buys nothing).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GbmHyperparams",
    "TreeNode",
    "RegressionTree",
    "GbmModel",
    "SplitImportance",
    "ShapleyResult",
    "FeatureBudgetError",
    "fit_gbm",
    "predict_gbm",
    "predict_gbm_batch",
    "split_importance",
    "shapley_values",
    "structural_violations",
]

SHAPLEY_MAX_FEATURES = 15


class FeatureBudgetError(ValueError):
    """Exact Shapley enumeration was requested beyond its feature budget."""


@dataclass
class GbmHyperparams:
    n_trees: int = 50
    max_depth: int = 3
    lambda_l2: float = 10.0
    num_leaves: int = 7
    min_data_in_leaf: int = 70
    eta: float = 0.1

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.lambda_l2 < 0:
            raise ValueError("lambda_l2 must be >= 0")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must be in (0, 1]")


@dataclass
class TreeNode:
    """Internal node (feature >= 0) or leaf (feature == -1)."""

    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: float = 0.0
    n_samples: int = 0
    depth: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class RegressionTree:
    nodes: list[TreeNode] = field(default_factory=list)
    split_gains: list[float] = field(default_factory=list)

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0], dtype=np.float64)
        self._eval(0, np.arange(X.shape[0]), X, out)
        return out

    def _eval(self, node_id: int, idx: np.ndarray, X: np.ndarray, out: np.ndarray):
        node = self.nodes[node_id]
        if node.is_leaf:
            out[idx] = node.value
            return
        go_left = X[idx, node.feature] <= node.threshold
        self._eval(node.left, idx[go_left], X, out)
        self._eval(node.right, idx[~go_left], X, out)


@dataclass
class GbmModel:
    base_score: float
    trees: list[RegressionTree]
    eta: float
    hyperparams: GbmHyperparams
    n_features: int
    feature_names: list[str] | None = None


@dataclass
class SplitImportance:
    """How often each feature is chosen to split, over all trees."""

    counts: np.ndarray
    percentages: np.ndarray
    feature_names: list[str] | None = None


@dataclass
class ShapleyResult:
    phi: np.ndarray
    base_value: float


def _leaf_value(residual_sum: float, count: int, lam: float) -> float:
    return residual_sum / (count + lam)


def _score(residual_sum: float, count: int, lam: float) -> float:
    return -(residual_sum * residual_sum) / (count + lam)


def _best_split(X, r, idx, hp: GbmHyperparams):
    """Best (gain, feature, threshold, left_idx, right_idx) for one leaf.

    Ties break to the lowest feature index, then the lowest threshold
    (first maximum in the ascending threshold scan). Returns None when no
    split has positive gain under the min-leaf constraint.
    """
    n = idx.size
    if n < 2 * hp.min_data_in_leaf:
        return None
    total = float(r[idx].sum())
    parent_score = _score(total, n, hp.lambda_l2)
    best = None
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cum = np.cumsum(r[idx][order])
        boundaries = np.nonzero(sv[:-1] != sv[1:])[0]
        if boundaries.size == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        ok = (n_left >= hp.min_data_in_leaf) & (n_right >= hp.min_data_in_leaf)
        if not ok.any():
            continue
        boundaries = boundaries[ok]
        n_left = n_left[ok]
        n_right = n_right[ok]
        sum_left = cum[boundaries]
        sum_right = total - sum_left
        gains = (
            parent_score
            + sum_left**2 / (n_left + hp.lambda_l2)
            + sum_right**2 / (n_right + hp.lambda_l2)
        )
        k = int(np.argmax(gains))  # first max -> lowest threshold
        if gains[k] <= 0:
            continue
        if best is None or gains[k] > best[0]:
            threshold = float((sv[boundaries[k]] + sv[boundaries[k] + 1]) / 2.0)
            go_left = vals <= threshold
            best = (float(gains[k]), f, threshold, idx[go_left], idx[~go_left])
    return best


def _grow_tree(X, r, hp: GbmHyperparams) -> RegressionTree:
    n = X.shape[0]
    lam = hp.lambda_l2
    all_idx = np.arange(n)
    tree = RegressionTree()
    tree.nodes.append(
        TreeNode(value=_leaf_value(float(r.sum()), n, lam), n_samples=n, depth=0)
    )
    # Leaves eligible for expansion, each with its precomputed best split.
    leaf_rows: dict[int, np.ndarray] = {0: all_idx}
    candidates = {0: _best_split(X, r, all_idx, hp) if hp.max_depth > 0 else None}

    n_leaves = 1
    while n_leaves < hp.num_leaves:
        chosen_id, chosen = None, None
        for node_id in sorted(leaf_rows):  # creation order breaks leaf ties
            cand = candidates.get(node_id)
            if cand is not None and (chosen is None or cand[0] > chosen[0]):
                chosen_id, chosen = node_id, cand
        if chosen is None:
            break
        gain, feat, threshold, left_idx, right_idx = chosen
        parent = tree.nodes[chosen_id]
        child_depth = parent.depth + 1
        for side_idx in (left_idx, right_idx):
            tree.nodes.append(
                TreeNode(
                    value=_leaf_value(float(r[side_idx].sum()), side_idx.size, lam),
                    n_samples=side_idx.size,
                    depth=child_depth,
                )
            )
        parent.feature = feat
        parent.threshold = threshold
        parent.left = len(tree.nodes) - 2
        parent.right = len(tree.nodes) - 1
        tree.split_gains.append(gain)

        del leaf_rows[chosen_id], candidates[chosen_id]
        for child_id, side_idx in (
            (parent.left, left_idx),
            (parent.right, right_idx),
        ):
            leaf_rows[child_id] = side_idx
            candidates[child_id] = (
                _best_split(X, r, side_idx, hp)
                if child_depth < hp.max_depth
                else None
            )
        n_leaves += 1
    return tree


def fit_gbm(x_list, y_list, hp: GbmHyperparams | None = None,
            feature_names: list[str] | None = None) -> GbmModel:
    """Boosted ensemble: base score plus eta-shrunk residual trees."""
    if hp is None:
        hp = GbmHyperparams()
    X = np.asarray(x_list, dtype=np.float64)
    y = np.asarray(y_list, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-dimensional design matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not np.isfinite(y).all():
        raise ValueError("targets must be finite")
    if X.shape[0] < 2 * hp.min_data_in_leaf:
        warnings.warn(
            f"only {X.shape[0]} examples with min_data_in_leaf="
            f"{hp.min_data_in_leaf}: no split is possible and the model "
            "degenerates to its base score",
            stacklevel=2,
        )

    base = float(y.mean())
    pred = np.full(y.shape[0], base)
    trees: list[RegressionTree] = []
    for _ in range(hp.n_trees):
        residual = y - pred
        tree = _grow_tree(X, residual, hp)
        trees.append(tree)
        pred += hp.eta * tree.predict_batch(X)
    return GbmModel(
        base_score=base,
        trees=trees,
        eta=hp.eta,
        hyperparams=hp,
        n_features=X.shape[1],
        feature_names=feature_names,
    )


def predict_gbm(model: GbmModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {x.shape[-1]}")
    return float(predict_gbm_batch(model, x.reshape(1, -1))[0])


def predict_gbm_batch(model: GbmModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        out += model.eta * tree.predict_batch(X)
    return out


def split_importance(model: GbmModel) -> SplitImportance:
    """Split counts per feature and their share of all splits."""
    counts = np.zeros(model.n_features, dtype=np.int64)
    for tree in model.trees:
        for node in tree.nodes:
            if not node.is_leaf:
                counts[node.feature] += 1
    total = counts.sum()
    percentages = (
        counts / total * 100.0 if total > 0 else np.zeros(model.n_features)
    )
    return SplitImportance(
        counts=counts, percentages=percentages, feature_names=model.feature_names
    )


def shapley_values(model: GbmModel, x, background) -> ShapleyResult:
    """Exact interventional Shapley attribution by subset enumeration.

    v(S) is the mean model output over background rows with the features
    in S overridden by x. phi_j sums the weighted marginal contributions
    of j over every subset of the remaining features; this is exponential
    in the feature count, hence the hard budget.
    """
    x = np.asarray(x, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    m = x.shape[0]
    if m != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {m}")
    if m > SHAPLEY_MAX_FEATURES:
        raise FeatureBudgetError(
            f"{m} features exceeds the exact-enumeration budget of "
            f"{SHAPLEY_MAX_FEATURES}; attribute a feature subset instead"
        )
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise ValueError("background must be a non-empty 2-dimensional array")
    if bg.shape[1] != m:
        raise ValueError("background feature count must match x")

    n_subsets = 1 << m
    n_bg = bg.shape[0]
    masks = np.arange(n_subsets, dtype=np.uint32)
    bits = ((masks[:, None] >> np.arange(m)) & 1).astype(bool)  # subsets x m

    v = np.empty(n_subsets, dtype=np.float64)
    chunk = max(1, (1 << 22) // max(1, n_bg * m))  # cap hybrid matrix size
    for start in range(0, n_subsets, chunk):
        stop = min(start + chunk, n_subsets)
        take_x = np.repeat(bits[start:stop], n_bg, axis=0)
        hybrid = np.where(take_x, x[None, :], np.tile(bg, (stop - start, 1)))
        preds = predict_gbm_batch(model, hybrid)
        v[start:stop] = preds.reshape(stop - start, n_bg).mean(axis=1)

    sizes = bits.sum(axis=1)
    fact = [math.factorial(i) for i in range(m + 1)]
    weight_by_size = np.array(
        [fact[s] * fact[m - s - 1] / fact[m] for s in range(m)], dtype=np.float64
    )
    phi = np.zeros(m, dtype=np.float64)
    for j in range(m):
        without_j = masks[~bits[:, j]]
        with_j = without_j | (1 << j)
        w = weight_by_size[sizes[without_j]]
        phi[j] = float(np.sum(w * (v[with_j] - v[without_j])))
    return ShapleyResult(phi=phi, base_value=float(v[0]))


def structural_violations(model: GbmModel) -> list[str]:
    """Walk every tree, reporting any violated growth constraint.

    Checks depth, leaf count, minimum leaf population (single-node trees
    exempt: an unsplittable root holds the whole dataset), positive
    recorded gains, and child-link consistency.
    """
    hp = model.hyperparams
    problems = []
    for t, tree in enumerate(model.trees):
        leaves = [n for n in tree.nodes if n.is_leaf]
        if not leaves:
            problems.append(f"tree {t}: no leaves")
        if len(leaves) > hp.num_leaves:
            problems.append(f"tree {t}: {len(leaves)} leaves > {hp.num_leaves}")
        for i, node in enumerate(tree.nodes):
            if node.depth > hp.max_depth:
                problems.append(f"tree {t} node {i}: depth {node.depth}")
            if node.is_leaf:
                if len(tree.nodes) > 1 and node.n_samples < hp.min_data_in_leaf:
                    problems.append(
                        f"tree {t} node {i}: leaf population {node.n_samples}"
                        f" < {hp.min_data_in_leaf}"
                    )
            else:
                left, right = tree.nodes[node.left], tree.nodes[node.right]
                if left.n_samples + right.n_samples != node.n_samples:
                    problems.append(f"tree {t} node {i}: child populations")
                if left.depth != node.depth + 1 or right.depth != node.depth + 1:
                    problems.append(f"tree {t} node {i}: child depths")
        if len(tree.split_gains) != len(tree.nodes) - len(leaves):
            problems.append(f"tree {t}: gain trace length mismatch")
        for g, gain in enumerate(tree.split_gains):
            if gain <= 0:
                problems.append(f"tree {t} split {g}: non-positive gain {gain}")
    return problems
