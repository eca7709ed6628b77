"""Performance metrics and the statistical testing machinery.

Metrics leave undefined ratios as NaN rather than inventing zeros; callers
exclude NaNs pairwise and report how many were dropped.  The signed-rank
test is exact (full sign-assignment distribution) up to n = 20 and falls
back to the continuity-corrected normal approximation beyond that.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import stdtr

from .errors import DegenerateDataError, InputError

logger = logging.getLogger(__name__)

NAN = float("nan")

METRIC_NAMES = ("precision", "recall", "f1", "kappa", "mcc", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")
        if self.total == 0:
            raise ValueError("confusion matrix cannot be empty")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class PerformanceReport:
    precision: float
    recall: float
    f1: float
    kappa: float
    mcc: float
    auc: float

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise InputError(f"unknown metric {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class EffectSize:
    delta: float
    magnitude: str


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    effect: EffectSize | None = None


def confusion(predictions: Sequence, truth: Sequence, positive) -> ConfusionMatrix:
    """Tally the four outcomes; `positive` is the defective label value."""
    if len(predictions) != len(truth):
        raise InputError(
            f"length mismatch: {len(predictions)} predictions, {len(truth)} truths"
        )
    if not truth:
        raise InputError("cannot score an empty prediction set")
    tp = fp = tn = fn = 0
    for pred, actual in zip(predictions, truth):
        if actual == positive:
            if pred == positive:
                tp += 1
            else:
                fn += 1
        else:
            if pred == positive:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 else NAN


def score(cm: ConfusionMatrix, auc: float = NAN) -> PerformanceReport:
    """All threshold metrics from the matrix; any zero denominator is NaN."""
    tp, fp, tn, fn = cm.tp, cm.fp, cm.tn, cm.fn
    n = cm.total
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if math.isnan(precision) or math.isnan(recall) or precision + recall == 0:
        f1 = NAN
    else:
        f1 = 2 * precision * recall / (precision + recall)
    p_observed = (tp + tn) / n
    p_expected = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n)
    kappa = _ratio(p_observed - p_expected, 1 - p_expected)
    mcc_den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = _ratio(tp * tn - fp * fn, mcc_den)
    return PerformanceReport(
        precision=precision, recall=recall, f1=f1, kappa=kappa, mcc=mcc, auc=auc
    )


def mcc_magnitude(value: float) -> str:
    """Interpretation bands for the correlation-style metrics."""
    if math.isnan(value):
        return "undefined"
    if value < 0.2:
        return "low"
    if value < 0.4:
        return "fair"
    if value < 0.6:
        return "moderate"
    if value < 0.8:
        return "strong"
    return "very strong"


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def auc(scores: Sequence[float], truth: Sequence, positive) -> float:
    """Rank-based (Mann-Whitney) AUC with midranks for ties.

    NaN when only one label is present: the curve is undefined.
    """
    if len(scores) != len(truth):
        raise InputError("scores and truth must have equal length")
    labels = np.array([1 if t == positive else 0 for t in truth])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return NAN
    ranks = _midranks(np.asarray(scores, dtype=float))
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def relative_loss(pp_snoring: float, pp_no_snoring: float) -> float:
    """Relative distance between the two performance readings; may exceed 1."""
    if math.isnan(pp_snoring) or math.isnan(pp_no_snoring) or pp_no_snoring == 0:
        logger.warning(
            "relative loss undefined for (%s, %s); excluded from aggregation",
            pp_snoring,
            pp_no_snoring,
        )
        return NAN
    return abs(pp_snoring - pp_no_snoring) / pp_no_snoring


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]]) -> TestResult:
    """Two-sided signed-rank test on paired samples.

    Zero differences are dropped and tied magnitudes midranked.  The p-value
    is exact by enumeration of the 2^n sign assignments (via the subset-sum
    distribution) for n <= 20, otherwise a continuity-corrected normal
    approximation with tie-adjusted variance.
    """
    diffs = [x - y for x, y in pairs]
    diffs = [d for d in diffs if d != 0]
    if not diffs:
        raise DegenerateDataError("degenerate sample: all differences are zero")
    magnitudes = np.abs(np.array(diffs, dtype=float))
    ranks = _midranks(magnitudes)
    w_pos = float(ranks[np.array(diffs) > 0].sum())
    n = len(diffs)
    if n <= 20:
        # midranks are multiples of 1/2; double them for integer arithmetic
        scaled = [int(round(2 * r)) for r in ranks]
        total = sum(scaled)
        counts: dict[int, int] = {0: 1}
        for r in scaled:
            nxt: dict[int, int] = {}
            for s, c in counts.items():
                nxt[s] = nxt.get(s, 0) + c
                nxt[s + r] = nxt.get(s + r, 0) + c
            counts = nxt
        observed_dev = abs(2 * int(round(2 * w_pos)) - total)
        extreme = sum(
            c for s, c in counts.items() if abs(2 * s - total) >= observed_dev
        )
        p = extreme / 2**n
    else:
        mu = float(ranks.sum()) / 2
        sigma = math.sqrt(float((ranks**2).sum()) / 4)
        z = max(0.0, (abs(w_pos - mu) - 0.5)) / sigma
        p = min(1.0, math.erfc(z / math.sqrt(2)))
    return TestResult(statistic=w_pos, p_value=p)


def cliffs_delta_paired(pairs: Sequence[tuple[float, float]]) -> EffectSize:
    """Paired Cliff's delta: net dominance of x over y, in [-1, 1]."""
    if not pairs:
        raise InputError("cliffs_delta_paired needs at least one pair")
    gt = sum(1 for x, y in pairs if x > y)
    lt = sum(1 for x, y in pairs if x < y)
    delta = (gt - lt) / len(pairs)
    magnitude = abs(delta)
    if magnitude < 0.147:
        label = "negligible"
    elif magnitude < 0.33:
        label = "small"
    elif magnitude < 0.474:
        label = "medium"
    else:
        label = "large"
    return EffectSize(delta=delta, magnitude=label)


def holm_adjust(p_values: Sequence[float]) -> list[float]:
    """Holm's step-down correction, returned in the input order."""
    for p in p_values:
        if not (0.0 <= p <= 1.0) and not math.isnan(p):
            raise InputError(f"p-value {p} outside [0, 1]")
    n = len(p_values)
    order = sorted(range(n), key=lambda i: p_values[i])
    adjusted = [0.0] * n
    running = 0.0
    for rank, idx in enumerate(order):
        value = min(1.0, p_values[idx] * (n - rank))
        running = max(running, value)
        adjusted[idx] = running
    return adjusted


def spearman(xs: Sequence[float], ys: Sequence[float]) -> TestResult:
    """Spearman rank correlation with the t-approximation p-value."""
    if len(xs) != len(ys):
        raise InputError("samples must have equal length")
    n = len(xs)
    if n < 3:
        raise InputError(f"spearman needs n >= 3, got {n}")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return TestResult(statistic=NAN, p_value=NAN)
    rx = _midranks(x)
    ry = _midranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))
    if abs(rho) >= 1.0:
        return TestResult(statistic=math.copysign(1.0, rho), p_value=0.0)
    t = rho * math.sqrt((n - 2) / (1 - rho * rho))
    p = 2 * (1 - float(stdtr(n - 2, abs(t))))
    return TestResult(statistic=rho, p_value=min(1.0, max(0.0, p)))


def _between_ss(values: np.ndarray, codes: np.ndarray, n_levels: int) -> float:
    counts = np.bincount(codes, minlength=n_levels)
    sums = np.bincount(codes, weights=values, minlength=n_levels)
    grand = values.mean()
    present = counts > 0
    means = sums[present] / counts[present]
    return float((counts[present] * (means - grand) ** 2).sum())


def permutation_test_repeated(
    measurements: Iterable[tuple],
    iterations: int = 5000,
    seed: int = 0,
) -> dict[str, TestResult]:
    """Repeated-measure permutation test with the project as a random block.

    Records are (project, classifier, drop_count, value).  For each factor,
    its labels are permuted within each project block and the between-level
    sum of squares recomputed; p is the fraction of permuted statistics at
    least as large as the observed one.
    """
    materialized = list(measurements)
    records = [r for r in materialized if not math.isnan(r[3])]
    dropped = len(materialized) - len(records)
    if dropped:
        logger.warning("permutation test: %d NaN measurements excluded", dropped)
    if not records:
        raise DegenerateDataError("no usable measurements")
    projects = {p: i for i, p in enumerate(sorted({r[0] for r in records}))}
    if len(projects) < 2:
        raise DegenerateDataError("permutation test needs at least 2 projects")
    values = np.array([r[3] for r in records], dtype=float)
    project_codes = np.array([projects[r[0]] for r in records])
    blocks = [np.flatnonzero(project_codes == p) for p in range(len(projects))]

    results: dict[str, TestResult] = {}
    for factor_idx, factor in ((1, "classifier"), (2, "drop_count")):
        levels = {v: i for i, v in enumerate(sorted({r[factor_idx] for r in records}))}
        if len(levels) < 2:
            raise DegenerateDataError(
                f"factor {factor!r} has fewer than 2 levels"
            )
        codes = np.array([levels[r[factor_idx]] for r in records])
        observed = _between_ss(values, codes, len(levels))
        at_least = 0
        for iteration in range(iterations):
            rng = np.random.default_rng([seed, iteration, factor_idx])
            permuted = codes.copy()
            for block in blocks:
                permuted[block] = codes[block][rng.permutation(len(block))]
            if _between_ss(values, permuted, len(levels)) >= observed - 1e-12:
                at_least += 1
        results[factor] = TestResult(
            statistic=observed, p_value=at_least / iterations
        )
    return results


# ---------------------------------------------------------------------------
# Delimited outputs
# ---------------------------------------------------------------------------


def write_results_csv(rows: list[tuple], path) -> None:
    """results.csv: project, classifier, dataset_variant, metric, value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["project", "classifier", "dataset_variant", "metric", "value"])
        for project, classifier, variant, metric, value in rows:
            writer.writerow([project, classifier, variant, metric, f"{value:.9g}"])


def write_stats_csv(rows: list[tuple], path) -> None:
    """stats.csv: comparison, metric, p_raw, p_holm, delta, magnitude."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["comparison", "metric", "p_raw", "p_holm", "delta", "magnitude"])
        for comparison, metric, p_raw, p_holm, delta, magnitude in rows:
            writer.writerow(
                [
                    comparison,
                    metric,
                    f"{p_raw:.9g}",
                    f"{p_holm:.9g}",
                    f"{delta:.9g}",
                    magnitude,
                ]
            )
