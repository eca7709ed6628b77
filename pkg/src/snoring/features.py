"""The 16 predictor measures for a (class, release) cell.

Every measure is a function of the commit history and ticket links alone,
never of the labeling observation point, so training views that differ only
in when they were labeled share feature values exactly.  Revision aggregates
run over the release's own window, not cumulatively from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from datetime import datetime, timedelta

from .classes import ClassIndex
from .errors import InputError
from .history import ProjectHistory, Release, release_of
from .issues import Ticket
from .labeling import ticket_fix_instant

WEEK = timedelta(weeks=1)

FEATURE_NAMES = (
    "size",
    "loc_touched",
    "nr",
    "nfix",
    "nauth",
    "loc_added",
    "max_loc_added",
    "avg_loc_added",
    "churn",
    "max_churn",
    "avg_churn",
    "change_set_size",
    "max_change_set",
    "avg_change_set",
    "age",
    "weighted_age",
)


def _q9(value: float) -> float:
    """Quantize to 9 significant digits, the dataset CSV precision.

    Keeps export/import a lossless round trip.
    """
    return float(f"{value:.9g}")


@dataclass(frozen=True)
class FeatureVector:
    size: int
    loc_touched: int
    nr: int
    nfix: int
    nauth: int
    loc_added: int
    max_loc_added: int
    avg_loc_added: float
    churn: int
    max_churn: int
    avg_churn: float
    change_set_size: int
    max_change_set: int
    avg_change_set: float
    age: float
    weighted_age: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES


def build_fix_index(
    tickets: list[Ticket],
    links: dict[str, frozenset[str]],
    history: ProjectHistory,
) -> dict[str, datetime]:
    """Map fix-commit id -> earliest instant any linking ticket was fully fixed.

    A commit counts toward nfix at a release once some resolved defect ticket
    linking it has completed (latest fix commit) by the release date.
    """
    fix_index: dict[str, datetime] = {}
    for ticket in tickets:
        if not ticket.is_resolved or not links.get(ticket.key):
            continue
        completed = ticket_fix_instant(ticket, links, history)
        for commit_id in links[ticket.key]:
            current = fix_index.get(commit_id)
            if current is None or completed < current:
                fix_index[commit_id] = completed
    return fix_index


def compute_features(
    class_path: str,
    release: Release,
    history: ProjectHistory,
    *,
    index: ClassIndex | None = None,
    fix_index: dict[str, datetime] | None = None,
) -> FeatureVector:
    """Feature vector for one cell.

    Revision aggregates cover commits that touch the class inside the
    release's interval; size is the physical line count at the release tag;
    age is the class's age at the release date, in weeks.
    """
    index = index or ClassIndex(history)
    fix_index = fix_index or {}
    if not index.exists_at(class_path, release.ordinal):
        raise InputError(
            f"class {class_path} absent at release {release.name}"
        )

    revisions = [
        rev
        for rev in index.revisions(class_path)
        if rev.change.kind != "added"
        and release_of(rev.commit, history.releases) == release
    ]
    created = index.created_at(class_path)
    age_weeks = max(0.0, (release.date - created) / WEEK)

    if not revisions:
        return FeatureVector(
            size=index.size_at(class_path, release.ordinal),
            loc_touched=0,
            nr=0,
            nfix=0,
            nauth=0,
            loc_added=0,
            max_loc_added=0,
            avg_loc_added=0.0,
            churn=0,
            max_churn=0,
            avg_churn=0.0,
            change_set_size=0,
            max_change_set=0,
            avg_change_set=0.0,
            age=_q9(age_weeks),
            weighted_age=0.0,
        )

    added = [rev.loc_added for rev in revisions]
    touched = [rev.loc_added + rev.loc_deleted for rev in revisions]
    churns = [rev.loc_added - rev.loc_deleted for rev in revisions]
    change_sets = [len(rev.commit.changes) for rev in revisions]
    nr = len(revisions)
    nfix = sum(
        1
        for rev in revisions
        if rev.commit.id in fix_index and fix_index[rev.commit.id] <= release.date
    )
    touched_total = sum(touched)
    if touched_total > 0:
        weighted_age = (
            sum(
                max(0.0, (rev.commit.timestamp - created) / WEEK) * t
                for rev, t in zip(revisions, touched)
            )
            / touched_total
        )
    else:
        weighted_age = 0.0

    return FeatureVector(
        size=index.size_at(class_path, release.ordinal),
        loc_touched=touched_total,
        nr=nr,
        nfix=nfix,
        nauth=len({rev.commit.author for rev in revisions}),
        loc_added=sum(added),
        max_loc_added=max(added),
        avg_loc_added=_q9(sum(added) / nr),
        churn=sum(churns),
        max_churn=max(churns),
        avg_churn=_q9(sum(churns) / nr),
        change_set_size=sum(change_sets),
        max_change_set=max(change_sets),
        avg_change_set=_q9(sum(change_sets) / nr),
        age=_q9(age_weeks),
        weighted_age=_q9(weighted_age),
    )
