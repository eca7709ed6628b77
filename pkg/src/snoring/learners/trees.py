"""Entropy-split decision trees shared by the stump, forest, and pruned tree.

Nodes are plain dicts so models serialize to JSON without ceremony.  Every
leaf keeps its training class counts; its score is the defective fraction.
"""

from __future__ import annotations

import numpy as np


def _entropy_terms(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    """n * H(pos/n) computed elementwise with 0*log(0) = 0."""
    pos = pos.astype(float)
    n = n.astype(float)
    neg = n - pos
    with np.errstate(divide="ignore", invalid="ignore"):
        term_p = np.where(pos > 0, pos * np.log2(pos / n), 0.0)
        term_n = np.where(neg > 0, neg * np.log2(neg / n), 0.0)
    return -(term_p + term_n)


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_ids: np.ndarray,
    min_leaf: int,
) -> tuple[int, float, float] | None:
    """Best (feature, midpoint threshold, information gain) over candidates.

    Only splits leaving at least `min_leaf` rows on each side qualify; None
    when no qualifying split has positive gain.  Ties keep the earliest
    candidate feature and the lowest threshold.
    """
    n = len(y)
    total_pos = int(y.sum())
    parent = _entropy_terms(np.array([total_pos]), np.array([n]))[0]
    best: tuple[int, float, float] | None = None
    for feature in feature_ids:
        values = X[:, feature]
        order = np.argsort(values, kind="mergesort")
        sv = values[order]
        sy = y[order]
        cut = np.flatnonzero(sv[:-1] < sv[1:]) + 1  # left side sizes
        cut = cut[(cut >= min_leaf) & (cut <= n - min_leaf)]
        if len(cut) == 0:
            continue
        left_pos = np.cumsum(sy)[cut - 1]
        left_n = cut
        right_pos = total_pos - left_pos
        right_n = n - left_n
        child = _entropy_terms(left_pos, left_n) + _entropy_terms(right_pos, right_n)
        gains = (parent - child) / n
        idx = int(np.argmax(gains))
        gain = float(gains[idx])
        if gain <= 1e-12:
            continue
        if best is None or gain > best[2] + 1e-12:
            threshold = float((sv[cut[idx] - 1] + sv[cut[idx]]) / 2)
            best = (int(feature), threshold, gain)
    return best


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    min_leaf: int = 2,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
    max_depth: int | None = None,
) -> dict:
    """Grow to purity, subject to the minimum leaf size (and depth, if any)."""
    n = len(y)
    pos = int(y.sum())
    m = X.shape[1]

    def leaf() -> dict:
        return {"leaf": True, "n": n, "pos": pos}

    if pos == 0 or pos == n or (max_depth is not None and max_depth <= 0):
        return leaf()
    if max_features is not None and rng is not None and max_features < m:
        feature_ids = np.sort(rng.choice(m, size=max_features, replace=False))
    else:
        feature_ids = np.arange(m)
    split = best_split(X, y, feature_ids, min_leaf)
    if split is None:
        return leaf()
    feature, threshold, _gain = split
    mask = X[:, feature] <= threshold
    depth = None if max_depth is None else max_depth - 1
    return {
        "feature": feature,
        "threshold": threshold,
        "n": n,
        "pos": pos,
        "left": grow_tree(
            X[mask], y[mask],
            min_leaf=min_leaf, max_features=max_features, rng=rng, max_depth=depth,
        ),
        "right": grow_tree(
            X[~mask], y[~mask],
            min_leaf=min_leaf, max_features=max_features, rng=rng, max_depth=depth,
        ),
    }


def tree_score(node: dict, x: np.ndarray) -> float:
    while "leaf" not in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["pos"] / node["n"]


def prune_reduced_error(node: dict, X_val: np.ndarray, y_val: np.ndarray) -> dict:
    """Bottom-up reduced-error pruning against a held-out set.

    A subtree collapses to a leaf when the leaf's error on the validation
    rows reaching it is no worse than the subtree's.  Nodes no validation
    row reaches are left alone.
    """
    if "leaf" in node:
        return node
    mask = X_val[:, node["feature"]] <= node["threshold"]
    left = prune_reduced_error(node["left"], X_val[mask], y_val[mask])
    right = prune_reduced_error(node["right"], X_val[~mask], y_val[~mask])
    pruned = dict(node, left=left, right=right)
    if len(y_val) == 0:
        return pruned
    subtree_errors = sum(
        1
        for x, label in zip(X_val, y_val)
        if (tree_score(pruned, x) >= 0.5) != bool(label)
    )
    leaf_pred = (node["pos"] / node["n"]) >= 0.5
    leaf_errors = sum(1 for label in y_val if leaf_pred != bool(label))
    if leaf_errors <= subtree_errors:
        return {"leaf": True, "n": node["n"], "pos": node["pos"]}
    return pruned
