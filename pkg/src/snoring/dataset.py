"""Experiment dataset assembly and the time-aware transformations.

The full dataset covers every (class, release) cell.  Truncating recent
releases keeps the ground truth quiet (dormant defects live in the tail),
the ordered holdout splits on release boundaries without shuffling, and the
two training views share every feature value and differ only in labels.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .classes import ClassIndex
from .errors import DegenerateDataError, InputError
from .features import FEATURE_NAMES, FeatureVector, build_fix_index, compute_features
from .history import ProjectHistory, Release, link_tickets
from .issues import Ticket
from .labeling import (
    DEFECTIVE,
    NON_DEFECTIVE,
    ObservationPoint,
    end_of_project,
    label_at,
)
from .szz import DEFAULT_FILTER, CosmeticFilter, resolve_introductions

CSV_HEADER = ("class_path", "release_ordinal", *FEATURE_NAMES, "label")

_INT_FEATURES = frozenset(
    name
    for name, typ in FeatureVector.__annotations__.items()
    if typ in ("int", int)
)


@dataclass(frozen=True)
class Provenance:
    observation: str
    transformations: tuple[str, ...] = ()

    def derive(self, step: str) -> "Provenance":
        return Provenance(self.observation, self.transformations + (step,))


@dataclass(frozen=True)
class DatasetRow:
    class_path: str
    release_ordinal: int
    features: FeatureVector
    label: str

    def __post_init__(self) -> None:
        if self.label not in (DEFECTIVE, NON_DEFECTIVE):
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class Dataset:
    rows: tuple[DatasetRow, ...]
    releases: tuple[Release, ...]
    provenance: Provenance

    def __post_init__(self) -> None:
        ordered = sorted(self.rows, key=lambda r: (r.release_ordinal, r.class_path))
        if list(self.rows) != ordered:
            raise ValueError("rows must be ordered by (release_ordinal, class_path)")
        valid = {r.ordinal for r in self.releases}
        for row in self.rows:
            if row.release_ordinal not in valid:
                raise ValueError(
                    f"row ordinal {row.release_ordinal} outside the release span"
                )

    def restrict(self, releases: tuple[Release, ...], step: str) -> "Dataset":
        keep = {r.ordinal for r in releases}
        return Dataset(
            rows=tuple(r for r in self.rows if r.release_ordinal in keep),
            releases=tuple(releases),
            provenance=self.provenance.derive(step),
        )

    def defective_count(self) -> int:
        return sum(1 for r in self.rows if r.label == DEFECTIVE)


def assemble(
    history: ProjectHistory,
    tickets: list[Ticket],
    observation: ObservationPoint,
    *,
    index: ClassIndex | None = None,
    cosmetic: CosmeticFilter = DEFAULT_FILTER,
) -> Dataset:
    """One row per (class, release): features plus the observed label."""
    index = index or ClassIndex(history)
    links = link_tickets(history, tickets)
    estimates = resolve_introductions(tickets, links, history, cosmetic)
    cells = label_at(
        history,
        tickets,
        observation,
        index=index,
        links=links,
        estimates=estimates,
        cosmetic=cosmetic,
    )
    labels = {(c.class_path, c.release.ordinal): c.label for c in cells}
    fix_index = build_fix_index(tickets, links, history)
    rows = []
    for release in history.releases:
        for class_path in sorted(index.class_universe(release.ordinal)):
            rows.append(
                DatasetRow(
                    class_path=class_path,
                    release_ordinal=release.ordinal,
                    features=compute_features(
                        class_path,
                        release,
                        history,
                        index=index,
                        fix_index=fix_index,
                    ),
                    label=labels[(class_path, release.ordinal)],
                )
            )
    return Dataset(
        rows=tuple(rows),
        releases=history.releases,
        provenance=Provenance(observation.instant.isoformat()),
    )


def truncate_recent(dataset: Dataset, fraction: float = 0.5) -> Dataset:
    """Drop the most recent `fraction` of releases (and their rows)."""
    total = len(dataset.releases)
    if total < 4:
        raise DegenerateDataError(
            f"truncation needs at least 4 releases, found {total}"
        )
    if fraction == 0:
        return dataset
    keep = math.ceil(total * (1.0 - fraction))
    return dataset.restrict(
        dataset.releases[:keep], f"truncate_recent({fraction:g})"
    )


def ordered_holdout(
    dataset: Dataset, train_fraction: float = 0.66
) -> tuple[tuple[Release, ...], tuple[Release, ...]]:
    """Split on release boundaries, older releases first; no shuffling."""
    total = len(dataset.releases)
    if total < 3:
        raise DegenerateDataError(
            f"ordered holdout needs at least 3 releases, found {total}"
        )
    n_train = math.ceil(total * train_fraction)
    if n_train >= total:
        n_train = total - 1
    return dataset.releases[:n_train], dataset.releases[n_train:]


def training_views(
    history: ProjectHistory,
    tickets: list[Ticket],
    tr_releases: tuple[Release, ...],
    *,
    base: Dataset | None = None,
    index: ClassIndex | None = None,
    cosmetic: CosmeticFilter = DEFAULT_FILTER,
) -> tuple[Dataset, Dataset]:
    """Build (clean, snoring) training views over the same rows.

    The clean view labels at the end of the project; the snoring view labels
    at the date of the last training release, the way a practitioner would
    when collecting data.  Feature columns are shared object-for-object.
    """
    if not tr_releases:
        raise InputError("empty training release list")
    index = index or ClassIndex(history)
    if base is None:
        base = assemble(
            history, tickets, end_of_project(history), index=index, cosmetic=cosmetic
        )
    clean = base.restrict(tr_releases, "training_view")
    snapshot = ObservationPoint(tr_releases[-1].date)
    cells = label_at(history, tickets, snapshot, index=index, cosmetic=cosmetic)
    labels = {(c.class_path, c.release.ordinal): c.label for c in cells}
    snoring_rows = tuple(
        DatasetRow(
            class_path=row.class_path,
            release_ordinal=row.release_ordinal,
            features=row.features,
            label=labels[(row.class_path, row.release_ordinal)],
        )
        for row in clean.rows
    )
    snoring = Dataset(
        rows=snoring_rows,
        releases=clean.releases,
        provenance=Provenance(snapshot.instant.isoformat(), ("training_view",)),
    )
    return clean, snoring


def drop_nondefective_tail(trs: Dataset, k: int) -> Dataset:
    """Remove non-defective rows from the last k training releases.

    Defective rows of those releases stay: a class labeled defective cannot
    be noise, only the non-defective labels of recent releases can.
    """
    if k < 0 or k > len(trs.releases):
        raise InputError(
            f"k must lie in [0, {len(trs.releases)}], got {k}"
        )
    if k == 0:
        return trs
    tail = {r.ordinal for r in trs.releases[-k:]}
    rows = tuple(
        row
        for row in trs.rows
        if row.release_ordinal not in tail or row.label == DEFECTIVE
    )
    return Dataset(
        rows=rows,
        releases=trs.releases,
        provenance=trs.provenance.derive(f"drop_nondefective_tail({k})"),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _format_value(name: str, value) -> str:
    if name in _INT_FEATURES:
        return str(value)
    return f"{value:.9g}"


def _meta_path(path: Path) -> Path:
    if path.suffix == ".csv":
        return path.with_suffix(".meta.json")
    return Path(str(path) + ".meta.json")


def export_csv(dataset: Dataset, path: str | Path) -> None:
    """Write dataset.csv (fixed header, floats at 9 significant digits)
    plus the dataset.meta.json provenance sidecar."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in dataset.rows:
            writer.writerow(
                [
                    row.class_path,
                    row.release_ordinal,
                    *(
                        _format_value(name, value)
                        for name, value in zip(FEATURE_NAMES, row.features.as_tuple())
                    ),
                    1 if row.label == DEFECTIVE else 0,
                ]
            )
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    meta = {
        "observation": dataset.provenance.observation,
        "transformations": list(dataset.provenance.transformations),
        "releases": [
            {"name": r.name, "ordinal": r.ordinal, "date": r.date.isoformat()}
            for r in dataset.releases
        ],
        "source_hashes": {"rows_csv": digest},
    }
    _meta_path(path).write_text(
        json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8"
    )


def import_csv(path: str | Path) -> Dataset:
    """Read a dataset written by export_csv; schema deviations are errors."""
    from datetime import datetime

    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = tuple(next(reader))
            except StopIteration:
                raise InputError(f"{path}: empty file, missing header") from None
            for pos, (expected, found) in enumerate(zip(CSV_HEADER, header)):
                if expected != found:
                    raise InputError(
                        f"{path}: column {pos} should be {expected!r}, found {found!r}"
                    )
            if len(header) != len(CSV_HEADER):
                raise InputError(
                    f"{path}: expected {len(CSV_HEADER)} columns, found {len(header)}"
                )
            rows = []
            for record in reader:
                class_path, ordinal_s, *feature_values, label_s = record
                kwargs = {}
                for name, text in zip(FEATURE_NAMES, feature_values):
                    kwargs[name] = int(text) if name in _INT_FEATURES else float(text)
                rows.append(
                    DatasetRow(
                        class_path=class_path,
                        release_ordinal=int(ordinal_s),
                        features=FeatureVector(**kwargs),
                        label=DEFECTIVE if label_s == "1" else NON_DEFECTIVE,
                    )
                )
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: malformed value ({exc})") from exc

    meta_path = _meta_path(path)
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        releases = tuple(
            Release(r["name"], r["ordinal"], datetime.fromisoformat(r["date"]))
            for r in meta["releases"]
        )
        provenance = Provenance(
            meta["observation"], tuple(meta["transformations"])
        )
    else:
        from datetime import timedelta, timezone

        top = max((r.release_ordinal for r in rows), default=-1)
        epoch = datetime(2000, 1, 1, tzinfo=timezone.utc)
        releases = tuple(
            Release(f"r{i}", i, epoch + timedelta(days=i)) for i in range(top + 1)
        )
        provenance = Provenance("unknown")
    return Dataset(rows=tuple(rows), releases=releases, provenance=provenance)
