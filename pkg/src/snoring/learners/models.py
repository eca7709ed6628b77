"""The classifier suite: six kinds behind one train/predict surface.

Every kind is deterministic given (data, seed), scores defect-proneness in
[0, 1], and predicts using only its selected features, so perturbing an
unselected column can never change a prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import InputError
from ..features import FEATURE_NAMES, FeatureVector
from ..labeling import DEFECTIVE, NON_DEFECTIVE
from .cfs import select_features
from .trees import grow_tree, prune_reduced_error, tree_score

MODEL_JSON_VERSION = 1
DECISION_THRESHOLD = 0.5
VARIANCE_FLOOR = 1e-9
FOREST_TREES = 100
ONER_MIN_BUCKET = 3
PRUNE_TAIL_FRACTION = 0.25


class LearnerKind(str, Enum):
    NAIVE_BAYES = "naive_bayes"
    DECISION_STUMP = "decision_stump"
    ONER = "oner"
    IBK1 = "ibk1"
    RANDOM_FOREST = "random_forest"
    PRUNED_TREE = "pruned_tree"


@dataclass(frozen=True)
class Prediction:
    score: float
    label: str


@dataclass(frozen=True)
class TrainedModel:
    kind: LearnerKind
    params: dict
    selected_features: tuple[str, ...]
    fingerprint: dict


def dataset_matrix(dataset, names: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix (rows x names) and 0/1 label vector for a Dataset."""
    X = np.array(
        [[getattr(row.features, name) for name in names] for row in dataset.rows],
        dtype=float,
    ).reshape(len(dataset.rows), len(names))
    y = np.array(
        [1 if row.label == DEFECTIVE else 0 for row in dataset.rows], dtype=int
    )
    return X, y


def train(
    kind: LearnerKind,
    training,
    seed: int,
    selected: tuple[str, ...] | None = None,
) -> TrainedModel:
    """Fit one classifier; feature selection runs first unless given.

    A single-label training set yields a prior-only model that scores the
    observed defective fraction everywhere.
    """
    if not training.rows:
        raise InputError("cannot train on an empty dataset")
    if selected is None:
        X_all, y_all = dataset_matrix(training, FEATURE_NAMES)
        selected = select_features(X_all, y_all, FEATURE_NAMES)
    X, y = dataset_matrix(training, selected)
    fingerprint = {"rows": len(training.rows), "seed": seed}
    if len(set(y.tolist())) < 2:
        params = {"model": "prior", "prior": float(y.mean())}
        return TrainedModel(kind, params, selected, fingerprint)
    builder = _BUILDERS[kind]
    params = builder(X, y, seed)
    return TrainedModel(kind, params, selected, fingerprint)


# -- builders -----------------------------------------------------------------


def _fit_naive_bayes(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    params = {"model": "naive_bayes", "priors": [], "means": [], "vars": []}
    n = len(y)
    for cls in (0, 1):
        rows = X[y == cls]
        params["priors"].append(len(rows) / n)
        params["means"].append([float(v) for v in rows.mean(axis=0)])
        variances = rows.var(axis=0)
        params["vars"].append([float(max(v, VARIANCE_FLOOR)) for v in variances])
    return params


def _fit_decision_stump(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    tree = grow_tree(X, y, min_leaf=1, max_depth=1)
    return {"model": "tree", "tree": tree}


def _fit_oner(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    n, m = X.shape
    best = None  # (error, feature, uppers, scores)
    for feature in range(m):
        order = np.argsort(X[:, feature], kind="mergesort")
        sv = X[order, feature]
        sy = y[order]
        buckets: list[tuple[int, int]] = []  # (count, positives)
        bounds: list[float] = []  # last value in each bucket
        start = 0
        while start < n:
            end = min(start + ONER_MIN_BUCKET, n)
            while end < n and sv[end] == sv[end - 1]:
                end += 1
            if n - end < ONER_MIN_BUCKET and end < n:
                end = n
            buckets.append((end - start, int(sy[start:end].sum())))
            bounds.append(float(sv[end - 1]))
            start = end
        error = sum(min(pos, count - pos) for count, pos in buckets)
        if best is None or error < best[0]:
            uppers = [
                (bounds[i] + float(sv[np.searchsorted(sv, bounds[i], side="right")]))
                / 2
                for i in range(len(buckets) - 1)
            ]
            scores = [pos / count for count, pos in buckets]
            best = (error, feature, uppers, scores)
    _, feature, uppers, scores = best
    return {"model": "oner", "feature": feature, "uppers": uppers, "scores": scores}


def _fit_ibk1(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    return {
        "model": "ibk1",
        "mins": [float(v) for v in mins],
        "maxs": [float(v) for v in maxs],
        "X": [[float(v) for v in row] for row in _minmax(X, mins, maxs)],
        "y": [int(v) for v in y],
    }


def _fit_random_forest(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    n, m = X.shape
    max_features = math.ceil(math.sqrt(m))
    trees = []
    for index in range(FOREST_TREES):
        rng = np.random.default_rng([seed, index])
        sample = rng.integers(0, n, size=n)
        trees.append(
            grow_tree(
                X[sample],
                y[sample],
                min_leaf=2,
                max_features=max_features,
                rng=rng,
            )
        )
    return {"model": "forest", "trees": trees}


def _fit_pruned_tree(X: np.ndarray, y: np.ndarray, seed: int) -> dict:
    n = len(y)
    grow_n = n - int(n * PRUNE_TAIL_FRACTION)
    tree = grow_tree(X[:grow_n], y[:grow_n], min_leaf=2)
    if grow_n < n:
        tree = prune_reduced_error(tree, X[grow_n:], y[grow_n:])
    return {"model": "tree", "tree": tree}


_BUILDERS = {
    LearnerKind.NAIVE_BAYES: _fit_naive_bayes,
    LearnerKind.DECISION_STUMP: _fit_decision_stump,
    LearnerKind.ONER: _fit_oner,
    LearnerKind.IBK1: _fit_ibk1,
    LearnerKind.RANDOM_FOREST: _fit_random_forest,
    LearnerKind.PRUNED_TREE: _fit_pruned_tree,
}


# -- prediction ---------------------------------------------------------------


def _minmax(X: np.ndarray, mins: np.ndarray, maxs: np.ndarray) -> np.ndarray:
    span = maxs - mins
    safe = np.where(span == 0, 1.0, span)
    normalized = (X - mins) / safe
    return np.where(span == 0, 0.0, normalized)


def _row_values(row, names: tuple[str, ...]) -> np.ndarray:
    values = []
    for name in names:
        if isinstance(row, FeatureVector):
            value = getattr(row, name)
        else:
            try:
                value = row[name]
            except (KeyError, TypeError):
                raise InputError(f"row is missing selected feature {name!r}") from None
        values.append(float(value))
    return np.array(values)


def _gaussian_log_pdf(x: float, mean: float, var: float) -> float:
    return -0.5 * (math.log(2 * math.pi * var) + (x - mean) ** 2 / var)


def _score(model: TrainedModel, x: np.ndarray) -> float:
    params = model.params
    name = params["model"]
    if name == "prior":
        return params["prior"]
    if name == "naive_bayes":
        logs = []
        for cls in (0, 1):
            total = math.log(params["priors"][cls]) if params["priors"][cls] > 0 else -math.inf
            for i, value in enumerate(x):
                total += _gaussian_log_pdf(
                    value, params["means"][cls][i], params["vars"][cls][i]
                )
            logs.append(total)
        peak = max(logs)
        weights = [math.exp(v - peak) for v in logs]
        return weights[1] / (weights[0] + weights[1])
    if name == "tree":
        return tree_score(params["tree"], x)
    if name == "forest":
        return float(np.mean([tree_score(tree, x) for tree in params["trees"]]))
    if name == "oner":
        value = x[params["feature"]]
        for upper, bucket_score in zip(params["uppers"], params["scores"]):
            if value <= upper:
                return bucket_score
        return params["scores"][-1]
    if name == "ibk1":
        mins = np.array(params["mins"])
        maxs = np.array(params["maxs"])
        query = _minmax(x.reshape(1, -1), mins, maxs)[0]
        stored = np.array(params["X"])
        distances = np.sqrt(((stored - query) ** 2).sum(axis=1))
        return float(params["y"][int(np.argmin(distances))])
    raise InputError(f"unknown model payload {name!r}")


def predict(model: TrainedModel, row) -> Prediction:
    """Score one row; the label is defective iff score >= 0.5."""
    x = _row_values(row, model.selected_features)
    value = _score(model, x)
    label = DEFECTIVE if value >= DECISION_THRESHOLD else NON_DEFECTIVE
    return Prediction(score=value, label=label)


def predict_many(model: TrainedModel, rows) -> list[Prediction]:
    return [predict(model, row) for row in rows]


# -- serialization ------------------------------------------------------------


def model_to_json(model: TrainedModel) -> dict:
    return {
        "version": MODEL_JSON_VERSION,
        "kind": model.kind.value,
        "params": model.params,
        "selected_features": list(model.selected_features),
        "fingerprint": model.fingerprint,
    }


def model_from_json(doc: dict) -> TrainedModel:
    if doc.get("version") != MODEL_JSON_VERSION:
        raise InputError(f"unsupported model version {doc.get('version')!r}")
    return TrainedModel(
        kind=LearnerKind(doc["kind"]),
        params=doc["params"],
        selected_features=tuple(doc["selected_features"]),
        fingerprint=doc["fingerprint"],
    )
