"""Class-per-release defectiveness labels as seen from a chosen instant.

A defect only becomes visible once its fix has landed, so labeling the same
project earlier in time can only lose defective labels, never gain them.
Cells a later observation flips from non-defective to defective are the
dataset's dormant-defect noise.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime

from .classes import ClassIndex
from .errors import DegenerateDataError, InputError
from .history import ProjectHistory, Release, link_tickets
from .issues import Ticket
from .szz import (
    CosmeticFilter,
    DEFAULT_FILTER,
    IntroductionEstimate,
    fix_commits_of,
    fixed_release_of,
    resolve_introductions,
)

logger = logging.getLogger(__name__)

DEFECTIVE = "defective"
NON_DEFECTIVE = "non_defective"


@dataclass(frozen=True)
class ObservationPoint:
    """The instant the labeling "photo" is taken."""

    instant: datetime

    def __post_init__(self) -> None:
        if self.instant.tzinfo is None:
            raise ValueError("observation instant must be timezone-aware")


def end_of_project(history: ProjectHistory) -> ObservationPoint:
    return ObservationPoint(history.last_instant)


@dataclass(frozen=True)
class LabeledCell:
    class_path: str
    release: Release
    label: str
    observed_at: ObservationPoint

    def __post_init__(self) -> None:
        if self.label not in (DEFECTIVE, NON_DEFECTIVE):
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class CellAssessment:
    class_path: str
    release: Release
    outcome: str  # TP | TN | FN


def defect_interval(
    estimate: IntroductionEstimate, fixed: Release | None, releases: tuple[Release, ...]
) -> range:
    """Half-open ordinal range [introduction, fixed).

    Empty when the defect was fixed in its introducing release: only defects
    fixed in a strictly later release make a class defective.  A fix landing
    after the last release leaves the defect open through the final release.
    """
    if estimate.source == "unknown":
        raise InputError(f"ticket {estimate.ticket_key}: introduction unknown")
    fixed_ordinal = fixed.ordinal if fixed is not None else len(releases)
    return range(estimate.release.ordinal, fixed_ordinal)


def ticket_fix_instant(
    ticket: Ticket, links: dict[str, frozenset[str]], history: ProjectHistory
) -> datetime:
    """When the fix completed: timestamp of the latest linked fix commit."""
    commits = fix_commits_of(ticket, links, history)
    if not commits:
        raise InputError(f"ticket {ticket.key} has no linked commit")
    return max(c.timestamp for c in commits)


def label_at(
    history: ProjectHistory,
    tickets: list[Ticket],
    observation: ObservationPoint,
    *,
    index: ClassIndex | None = None,
    links: dict[str, frozenset[str]] | None = None,
    estimates: dict[str, IntroductionEstimate] | None = None,
    cosmetic: CosmeticFilter = DEFAULT_FILTER,
) -> frozenset[LabeledCell]:
    """Label every (class, release) cell as observed at the given instant.

    Only tickets whose fix completed by the observation instant contribute
    defect intervals; a cell is defective iff some contributing ticket's
    interval contains its release and the ticket's fix commits touched the
    class.  Everything else in the per-release class universe is
    non-defective.
    """
    if not history.releases:
        raise InputError("history has no releases")
    if observation.instant < history.releases[0].date:
        raise InputError("observation point lies before the first release")
    index = index or ClassIndex(history)
    links = links if links is not None else link_tickets(history, tickets)
    if estimates is None:
        estimates = resolve_introductions(tickets, links, history, cosmetic)

    releases = history.releases
    defective: set[tuple[str, int]] = set()
    for ticket in tickets:
        if not ticket.is_resolved or not links.get(ticket.key):
            continue
        estimate = estimates.get(ticket.key)
        if estimate is None or estimate.source == "unknown":
            continue
        if ticket_fix_instant(ticket, links, history) > observation.instant:
            continue
        fixed = fixed_release_of(ticket, links, history)
        interval = defect_interval(estimate, fixed, releases)
        touched: set[str] = set()
        for commit_id in links[ticket.key]:
            touched.update(index.classes_touched(commit_id))
        for ordinal in interval:
            if ordinal >= len(releases):
                break
            for class_path in touched:
                if index.exists_at(class_path, ordinal):
                    defective.add((class_path, ordinal))

    cells = []
    for release in releases:
        for class_path in index.class_universe(release.ordinal):
            label = (
                DEFECTIVE
                if (class_path, release.ordinal) in defective
                else NON_DEFECTIVE
            )
            cells.append(LabeledCell(class_path, release, label, observation))
    return frozenset(cells)


def assess_cells(
    observed: frozenset[LabeledCell], ground: frozenset[LabeledCell]
) -> frozenset[CellAssessment]:
    """Compare an early observation against ground truth, cell by cell.

    TP: both defective.  TN: both non-defective.  FN: ground defective but
    observed non-defective.  The opposite flip cannot happen (a class labeled
    defective stays defective at any later observation); encountering one
    means the inputs were not produced by this toolkit's labeling.
    """
    observed_map = {(c.class_path, c.release.ordinal): c for c in observed}
    ground_map = {(c.class_path, c.release.ordinal): c for c in ground}
    if observed_map.keys() != ground_map.keys():
        raise InputError("observed and ground labelings cover different cells")
    assessments = []
    for key, ground_cell in ground_map.items():
        observed_cell = observed_map[key]
        if ground_cell.label == DEFECTIVE:
            if observed_cell.label == DEFECTIVE:
                outcome = "TP"
            else:
                outcome = "FN"
        else:
            if observed_cell.label == DEFECTIVE:
                raise InputError(
                    f"impossible false positive at {key}: observed defective, "
                    "ground non-defective"
                )
            outcome = "TN"
        assessments.append(
            CellAssessment(ground_cell.class_path, ground_cell.release, outcome)
        )
    return frozenset(assessments)


def snoring_loss(ground_defective_count: int, observed_defective_count: int) -> float:
    """Proportion of truly defective cells the early observation missed."""
    if ground_defective_count == 0:
        raise DegenerateDataError("no defective cells in the ground truth")
    if not 0 <= observed_defective_count <= ground_defective_count:
        raise InputError(
            "observed defective count must lie in [0, ground defective count]"
        )
    return (ground_defective_count - observed_defective_count) / ground_defective_count


def write_labels_csv(cells: frozenset[LabeledCell], path) -> None:
    """Emit labels CSV: class_path, release_ordinal, label."""
    rows = sorted(cells, key=lambda c: (c.release.ordinal, c.class_path))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class_path", "release_ordinal", "label"])
        for cell in rows:
            writer.writerow([cell.class_path, cell.release.ordinal, cell.label])
