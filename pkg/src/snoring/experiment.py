"""End-to-end experiment drivers behind the rq1/rq2 commands.

Everything downstream of the config is deterministic: projects are built or
loaded in a fixed order, every classifier trains with the configured seed,
and all aggregation iterates sorted collections, so reruns produce
byte-identical delimited outputs.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
from dataclasses import dataclass
from pathlib import Path

from .classes import ClassIndex
from .config import ExperimentConfig, ProjectSource
from .dataset import (
    Dataset,
    assemble,
    drop_nondefective_tail,
    export_csv,
    ordered_holdout,
    training_views,
    truncate_recent,
)
from .errors import DegenerateDataError
from .features import FEATURE_NAMES
from .history import (
    ProjectHistory,
    ingest_history,
    link_tickets,
    load_history,
    save_history,
)
from .issues import Ticket, load_issues
from .labeling import DEFECTIVE, end_of_project
from .learners import LearnerKind, model_to_json, predict_many, train
from .learners.cfs import select_features
from .learners.models import dataset_matrix
from .stats import (
    NAN,
    METRIC_NAMES,
    PerformanceReport,
    TestResult,
    auc,
    cliffs_delta_paired,
    confusion,
    holm_adjust,
    permutation_test_repeated,
    relative_loss,
    score,
    spearman,
    wilcoxon_signed_rank,
)
from .synth import SynthConfig, generate, write_issues_json
from .szz import fixed_release_of, resolve_introductions, write_introductions_csv

logger = logging.getLogger(__name__)

PERMUTATION_METRICS = ("precision", "recall", "kappa", "mcc", "auc")


@dataclass(frozen=True)
class ProjectData:
    name: str
    history: ProjectHistory
    tickets: list[Ticket]


@dataclass(frozen=True)
class ProjectSplits:
    project: ProjectData
    full: Dataset
    train_releases: tuple
    test_releases: tuple
    train_clean: Dataset  # TrNS
    train_snoring: Dataset  # TrS
    test: Dataset  # TeNS


def load_projects(config: ExperimentConfig) -> list[ProjectData]:
    projects: list[ProjectData] = []
    if config.synth is not None:
        for i in range(config.synth_projects):
            synth_cfg = SynthConfig(
                releases=config.synth.releases,
                classes=config.synth.classes,
                commits_per_release=config.synth.commits_per_release,
                defect_rate=config.synth.defect_rate,
                dormancy=config.synth.dormancy,
                av_availability=config.synth.av_availability,
                seed=config.seed + i,
                project_key=f"SYN{i}",
            )
            history, tickets, _truth = generate(synth_cfg)
            projects.append(ProjectData(f"synth-{i:02d}", history, tickets))
    for source in config.projects:
        projects.append(_load_mined(source))
    return projects


def _load_mined(source: ProjectSource) -> ProjectData:
    if source.history is not None:
        history = load_history(source.history)
    else:
        history = ingest_history(source.repo, source.tag_pattern)
    tickets = load_issues(source.issues)
    return ProjectData(source.name, history, tickets)


def build_splits(project: ProjectData) -> ProjectSplits:
    index = ClassIndex(project.history)
    full = assemble(
        project.history, project.tickets, end_of_project(project.history), index=index
    )
    reduced = truncate_recent(full)
    train_releases, test_releases = ordered_holdout(reduced)
    clean, snoring = training_views(
        project.history, project.tickets, train_releases, base=full, index=index
    )
    test = full.restrict(test_releases, "test_view")
    return ProjectSplits(
        project=project,
        full=full,
        train_releases=train_releases,
        test_releases=test_releases,
        train_clean=clean,
        train_snoring=snoring,
        test=test,
    )


def evaluate(
    training: Dataset, test: Dataset, kind: LearnerKind, seed: int
) -> tuple[PerformanceReport, dict]:
    """CFS + train on `training`, score on `test`; returns report and model JSON."""
    X, y = dataset_matrix(training, FEATURE_NAMES)
    selected = select_features(X, y, FEATURE_NAMES)
    model = train(kind, training, seed, selected=selected)
    predictions = predict_many(model, [row.features for row in test.rows])
    truth = [row.label for row in test.rows]
    cm = confusion([p.label for p in predictions], truth, DEFECTIVE)
    area = auc([p.score for p in predictions], truth, DEFECTIVE)
    return score(cm, area), model_to_json(model)


def _paired_test(pairs: list[tuple[float, float]]) -> TestResult | None:
    """Wilcoxon plus paired Cliff's delta on (clean, degraded) value pairs."""
    usable = [
        (x, y) for x, y in pairs if not math.isnan(x) and not math.isnan(y)
    ]
    dropped = len(pairs) - len(usable)
    if dropped:
        logger.info("paired test: %d NaN pairs excluded", dropped)
    if not usable:
        return None
    effect = cliffs_delta_paired(usable)
    try:
        test = wilcoxon_signed_rank(usable)
    except DegenerateDataError:
        return TestResult(statistic=NAN, p_value=NAN, effect=effect)
    return TestResult(statistic=test.statistic, p_value=test.p_value, effect=effect)


def _release_frequencies(history: ProjectHistory) -> tuple[float, float]:
    """(mean days per release, mean commits per release) for one project."""
    releases = history.releases
    days = (releases[-1].date - history.commits[0].timestamp).days / len(releases)
    in_release = sum(
        1 for c in history.commits if c.timestamp <= releases[-1].date
    )
    return days, in_release / len(releases)


def _persist_project(out_dir: Path, splits: ProjectSplits) -> None:
    project_dir = out_dir / "projects" / splits.project.name
    project_dir.mkdir(parents=True, exist_ok=True)
    history = splits.project.history
    save_history(history, project_dir / "history.jsonl")
    write_issues_json(splits.project.tickets, project_dir / "issues.json")
    links = link_tickets(history, splits.project.tickets)
    estimates = resolve_introductions(splits.project.tickets, links, history)
    fixed = {
        key: fixed_release_of(ticket, links, history)
        for key, ticket in ((t.key, t) for t in splits.project.tickets)
        if ticket.is_resolved and links.get(key)
    }
    write_introductions_csv(
        sorted(estimates.values(), key=lambda e: e.ticket_key),
        fixed,
        project_dir / "introductions.csv",
    )
    export_csv(splits.full, project_dir / "dataset.csv")
    export_csv(splits.train_clean, project_dir / "TrNS.csv")
    export_csv(splits.train_snoring, project_dir / "TrS.csv")
    export_csv(splits.test, project_dir / "TeNS.csv")


def _write_model(out_dir: Path, project: str, variant: str, kind: str, doc: dict) -> None:
    model_dir = out_dir / "projects" / project / "models"
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / f"{variant}-{kind}.json").write_text(
        json.dumps(doc, indent=1, sort_keys=True), encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# RQ1: snoring vs clean training
# ---------------------------------------------------------------------------


@dataclass
class Rq1Output:
    results: list[tuple]  # (project, classifier, variant, metric, value)
    losses: list[tuple]  # (project, classifier, metric, relative_loss)
    stats: list[tuple]  # (comparison, metric, p_raw, p_holm, delta, magnitude)
    spearman: list[tuple]  # (frequency, metric, rho, p)


def run_rq1(config: ExperimentConfig, out_dir: Path | None = None) -> Rq1Output:
    out_dir = Path(out_dir) if out_dir is not None else config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = config.kinds()
    projects = load_projects(config)

    results: list[tuple] = []
    losses: list[tuple] = []
    reports: dict[tuple[str, str, str], PerformanceReport] = {}
    frequencies: dict[str, tuple[float, float]] = {}
    for project in projects:
        splits = build_splits(project)
        _persist_project(out_dir, splits)
        frequencies[project.name] = _release_frequencies(project.history)
        for kind in kinds:
            for variant, training in (
                ("TrNS", splits.train_clean),
                ("TrS", splits.train_snoring),
            ):
                report, model_doc = evaluate(training, splits.test, kind, config.seed)
                reports[(project.name, kind.value, variant)] = report
                _write_model(out_dir, project.name, variant, kind.value, model_doc)
                for metric in METRIC_NAMES:
                    results.append(
                        (project.name, kind.value, variant, metric, report.metric(metric))
                    )
            for metric in METRIC_NAMES:
                losses.append(
                    (
                        project.name,
                        kind.value,
                        metric,
                        relative_loss(
                            reports[(project.name, kind.value, "TrS")].metric(metric),
                            reports[(project.name, kind.value, "TrNS")].metric(metric),
                        ),
                    )
                )

    stats_rows: list[tuple] = []
    for metric in METRIC_NAMES:
        tested: list[tuple[str, TestResult | None]] = []
        for kind in kinds:
            pairs = [
                (
                    reports[(p.name, kind.value, "TrNS")].metric(metric),
                    reports[(p.name, kind.value, "TrS")].metric(metric),
                )
                for p in projects
            ]
            tested.append((kind.value, _paired_test(pairs)))
        raw = [t.p_value for _, t in tested if t is not None and not math.isnan(t.p_value)]
        adjusted = holm_adjust(raw)
        holm_iter = iter(adjusted)
        for classifier, test in tested:
            if test is None:
                stats_rows.append((classifier, metric, NAN, NAN, NAN, "degenerate"))
            elif math.isnan(test.p_value):
                stats_rows.append(
                    (classifier, metric, NAN, NAN, test.effect.delta, "degenerate")
                )
            else:
                stats_rows.append(
                    (
                        classifier,
                        metric,
                        test.p_value,
                        next(holm_iter),
                        test.effect.delta,
                        test.effect.magnitude,
                    )
                )

    spearman_rows = _frequency_correlations(
        projects, frequencies, losses, ("precision", "recall")
    )
    return Rq1Output(results, losses, stats_rows, spearman_rows)


def _frequency_correlations(
    projects, frequencies, measurements, metrics
) -> list[tuple]:
    """Spearman of per-project median measurement vs release frequency."""
    rows: list[tuple] = []
    for metric in metrics:
        medians = []
        for project in projects:
            values = [
                value
                for name, _classifier, m, value in measurements
                if name == project.name and m == metric and not math.isnan(value)
            ]
            medians.append(statistics.median(values) if values else NAN)
        for label, pick in (("days_per_release", 0), ("commits_per_release", 1)):
            xs = [frequencies[p.name][pick] for p in projects]
            pairs = [
                (x, m) for x, m in zip(xs, medians) if not math.isnan(m)
            ]
            if len(pairs) >= 3:
                result = spearman([x for x, _ in pairs], [m for _, m in pairs])
                rows.append((label, metric, result.statistic, result.p_value))
            else:
                rows.append((label, metric, NAN, NAN))
    return rows


# ---------------------------------------------------------------------------
# RQ2: dropping recent non-defective training rows
# ---------------------------------------------------------------------------


@dataclass
class Rq2Output:
    results: list[tuple]  # (project, classifier, variant, metric, value)
    gains: list[tuple]  # (k, metric, mean_gain, n_used)
    stats: list[tuple]  # k=1 vs k=0 Wilcoxon table
    permutation: list[tuple]  # (metric, factor, statistic, iterations, p)
    spearman: list[tuple]  # (frequency, metric, rho, p)


def run_rq2(config: ExperimentConfig, out_dir: Path | None = None) -> Rq2Output:
    out_dir = Path(out_dir) if out_dir is not None else config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = config.kinds()
    ks = tuple(sorted(set(config.drop_ks)))
    if 0 not in ks:
        ks = (0,) + ks
    projects = load_projects(config)

    results: list[tuple] = []
    reports: dict[tuple[str, str, int], PerformanceReport] = {}
    frequencies: dict[str, tuple[float, float]] = {}
    for project in projects:
        splits = build_splits(project)
        _persist_project(out_dir, splits)
        frequencies[project.name] = _release_frequencies(project.history)
        max_feasible = len(splits.train_releases) - 1
        if max(ks) > max_feasible:
            raise DegenerateDataError(
                f"project {project.name}: only {len(splits.train_releases)} training "
                f"releases; the maximum feasible drop count is {max_feasible}"
            )
        for k in ks:
            training = drop_nondefective_tail(splits.train_snoring, k)
            export_csv(
                training, out_dir / "projects" / project.name / f"TrS-{k}.csv"
            )
            for kind in kinds:
                report, model_doc = evaluate(training, splits.test, kind, config.seed)
                reports[(project.name, kind.value, k)] = report
                _write_model(
                    out_dir, project.name, f"TrS-{k}", kind.value, model_doc
                )
                for metric in METRIC_NAMES:
                    results.append(
                        (
                            project.name,
                            kind.value,
                            f"TrS-{k}",
                            metric,
                            report.metric(metric),
                        )
                    )

    def gain(project: str, classifier: str, metric: str, k: int) -> float:
        base = reports[(project, classifier, 0)].metric(metric)
        value = reports[(project, classifier, k)].metric(metric)
        if math.isnan(base) or math.isnan(value) or base == 0:
            return NAN
        return (value - base) / base

    gains_rows: list[tuple] = []
    for k in ks:
        if k == 0:
            continue
        for metric in METRIC_NAMES:
            values = [
                gain(p.name, kind.value, metric, k)
                for p in projects
                for kind in kinds
            ]
            usable = [v for v in values if not math.isnan(v)]
            gains_rows.append(
                (
                    k,
                    metric,
                    sum(usable) / len(usable) if usable else NAN,
                    len(usable),
                )
            )

    stats_rows: list[tuple] = []
    if 1 in ks:
        for metric in METRIC_NAMES:
            tested = []
            for kind in kinds:
                pairs = [
                    (
                        reports[(p.name, kind.value, 1)].metric(metric),
                        reports[(p.name, kind.value, 0)].metric(metric),
                    )
                    for p in projects
                ]
                tested.append((kind.value, _paired_test(pairs)))
            raw = [
                t.p_value
                for _, t in tested
                if t is not None and not math.isnan(t.p_value)
            ]
            adjusted = holm_adjust(raw)
            holm_iter = iter(adjusted)
            for classifier, test in tested:
                if test is None:
                    stats_rows.append((classifier, metric, NAN, NAN, NAN, "degenerate"))
                elif math.isnan(test.p_value):
                    stats_rows.append(
                        (classifier, metric, NAN, NAN, test.effect.delta, "degenerate")
                    )
                else:
                    stats_rows.append(
                        (
                            classifier,
                            metric,
                            test.p_value,
                            next(holm_iter),
                            test.effect.delta,
                            test.effect.magnitude,
                        )
                    )

    permutation_rows: list[tuple] = []
    if 1 in ks and len(projects) >= 2:
        for metric in PERMUTATION_METRICS:
            records = [
                (p.name, kind.value, k, reports[(p.name, kind.value, k)].metric(metric))
                for p in projects
                for kind in kinds
                for k in (0, 1)
            ]
            try:
                outcome = permutation_test_repeated(
                    records, iterations=config.iterations, seed=config.seed
                )
            except DegenerateDataError as exc:
                logger.warning("permutation test on %s degenerate: %s", metric, exc)
                continue
            for factor in ("drop_count", "classifier"):
                permutation_rows.append(
                    (
                        metric,
                        factor,
                        outcome[factor].statistic,
                        config.iterations,
                        outcome[factor].p_value,
                    )
                )

    gain_measurements = [
        (p.name, kind.value, metric, gain(p.name, kind.value, metric, 1))
        for p in projects
        for kind in kinds
        for metric in ("precision", "recall")
    ] if 1 in ks else []
    spearman_rows = _frequency_correlations(
        projects, frequencies, gain_measurements, ("precision", "recall")
    )
    return Rq2Output(results, gains_rows, stats_rows, permutation_rows, spearman_rows)
