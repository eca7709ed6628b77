"""Correlation-based feature subset selection.

Greedy forward search over merit(S) = k * rcf / sqrt(k + k(k-1) * rff),
where rcf is the mean |feature-label| correlation of the subset and rff the
mean pairwise |feature-feature| correlation: relevance rewarded, redundancy
penalized.  Each step also considers single deletions (the backtracking
facility); the search stops when no move strictly improves the merit.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import InputError

logger = logging.getLogger(__name__)

_EPS = 1e-12


def _abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    """|Pearson correlation|, with degenerate (constant) inputs treated as 0."""
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        return 0.0
    return abs(float(da @ db) / denom)


def subset_merit(
    subset: tuple[int, ...], corr_fy: np.ndarray, corr_ff: np.ndarray
) -> float:
    k = len(subset)
    if k == 0:
        return 0.0
    rcf = float(corr_fy[list(subset)].mean())
    if k == 1:
        return rcf
    pairs = [
        corr_ff[i][j] for idx, i in enumerate(subset) for j in subset[idx + 1 :]
    ]
    rff = float(np.mean(pairs))
    return k * rcf / math.sqrt(k + k * (k - 1) * rff)


def select_features(X: np.ndarray, y: np.ndarray, names: tuple[str, ...]) -> tuple[str, ...]:
    """Select a feature-name subset; ties always break toward lower index."""
    n, m = X.shape
    if n == 0:
        raise InputError("cannot select features from an empty training set")
    if len(set(y.tolist())) < 2:
        logger.warning("single-label training set: selection undefined, keeping all features")
        return tuple(names)
    corr_fy = np.array([_abs_corr(X[:, i], y.astype(float)) for i in range(m)])
    corr_ff = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            corr_ff[i, j] = corr_ff[j, i] = _abs_corr(X[:, i], X[:, j])

    subset: tuple[int, ...] = (int(np.argmax(corr_fy)),)
    merit = subset_merit(subset, corr_fy, corr_ff)
    while True:
        best_move: tuple[int, ...] | None = None
        best_merit = merit
        for i in range(m):
            if i in subset:
                continue
            candidate = tuple(sorted(subset + (i,)))
            value = subset_merit(candidate, corr_fy, corr_ff)
            if value > best_merit + _EPS:
                best_merit = value
                best_move = candidate
        if len(subset) > 1:
            for i in subset:
                candidate = tuple(f for f in subset if f != i)
                value = subset_merit(candidate, corr_fy, corr_ff)
                if value > best_merit + _EPS:
                    best_merit = value
                    best_move = candidate
        if best_move is None:
            return tuple(names[i] for i in subset)
        subset, merit = best_move, best_merit


def cfs_select(training) -> tuple[str, ...]:
    """Run selection on a Dataset's feature matrix (see select_features)."""
    from ..features import FEATURE_NAMES
    from .models import dataset_matrix

    X, y = dataset_matrix(training, FEATURE_NAMES)
    return select_features(X, y, FEATURE_NAMES)
