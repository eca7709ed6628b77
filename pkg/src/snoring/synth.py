"""Synthetic project generator with exact defect ground truth.

Emits a commit stream, release tags, and defect tickets shaped exactly like
mined data, so the whole pipeline runs unchanged.  Every injected defect has
a known introducing commit, a fix that deletes lines written by that commit
(so line tracing is exercised for real), and a dormancy drawn from a
geometric distribution.  Classes that are defective at a release receive
activity drawn from a shifted distribution, planting a learnable but noisy
signal in the process features.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .errors import InputError
from .history import CommitRecord, FileChange, ProjectHistory, Release
from .issues import Ticket

AUTHORS = ("ana", "bram", "chen", "dara", "emil", "faye")
BASE_LOC_LOG = math.log(12.0)
LOC_SIGMA = 0.6
SIGNAL_SHIFT = 0.8 * LOC_SIGMA  # effect size of the planted churn signal
EXTRA_EDIT_PROB = 0.5
BASE_EDIT_PROB = 0.5
T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SynthConfig:
    releases: int = 20
    classes: int = 40
    commits_per_release: float = 25.0
    defect_rate: float = 4.0
    dormancy: float = 0.2
    av_availability: float = 1.0
    seed: int = 0
    project_key: str = "SYN"

    def validate(self) -> None:
        if self.releases < 6:
            raise InputError("synthetic projects need at least 6 releases")
        if not 0.0 < self.dormancy < 1.0:
            raise InputError("dormancy mean fraction must lie in (0, 1)")
        if not 0.0 <= self.av_availability <= 1.0:
            raise InputError("av_availability must lie in [0, 1]")
        if self.classes < 2 or self.commits_per_release <= 0 or self.defect_rate < 0:
            raise InputError("degenerate synthetic configuration")


@dataclass(frozen=True)
class GroundTruthEntry:
    ticket_key: str
    class_path: str
    intro_ordinal: int
    fixed_ordinal: int


@dataclass
class _Defect:
    key: str
    class_path: str
    intro_ordinal: int
    fixed_ordinal: int
    planted: tuple[str, ...]


class _Generator:
    def __init__(self, config: SynthConfig):
        self.config = config
        self.rng = random.Random(config.seed)
        self.commits: list[CommitRecord] = []
        self.content: dict[str, list[str]] = {}
        self.protected: dict[str, set[str]] = {}
        self.tickets: list[Ticket] = []
        self.defects: list[_Defect] = []
        self.pending_fixes: dict[int, list[_Defect]] = {}
        self._line_serial = 0
        self._commit_serial = 0
        self._ticket_serial = 0

    # -- primitive pieces ---------------------------------------------------

    def _new_line(self) -> str:
        self._line_serial += 1
        return f"state.update(step_{self._line_serial});"

    def _next_commit_id(self) -> str:
        self._commit_serial += 1
        return f"c{self._commit_serial:05d}"

    def _emit(self, ts: datetime, author: str, message: str, changes) -> CommitRecord:
        parents = (self.commits[-1].id,) if self.commits else ()
        commit = CommitRecord(
            id=self._next_commit_id(),
            timestamp=ts,
            author=author,
            message=message,
            parents=parents,
            changes=tuple(changes),
        )
        self.commits.append(commit)
        return commit

    def _create_class(self, path: str) -> FileChange:
        lines = [self._new_line() for _ in range(self.rng.randint(40, 120))]
        self.content[path] = lines
        self.protected[path] = set()
        return FileChange(
            path=path,
            kind="added",
            added_lines=frozenset(enumerate(lines, start=1)),
        )

    def _edit_class(
        self, path: str, touch: int, plant: tuple[str, ...] = ()
    ) -> FileChange:
        """Apply an edit of roughly `touch` lines; planted lines always go in."""
        lines = self.content[path]
        shielded = self.protected[path]
        removable = [i for i, text in enumerate(lines) if text not in shielded]
        n_delete = min(touch // 3, max(0, len(removable) - 10))
        delete_idx = sorted(self.rng.sample(removable, n_delete)) if n_delete else []
        deleted = frozenset((i + 1, lines[i]) for i in delete_idx)
        kept = [text for i, text in enumerate(lines) if i not in set(delete_idx)]
        new_texts = list(plant) + [
            self._new_line() for _ in range(max(0, touch - n_delete - len(plant)))
        ]
        total = len(kept) + len(new_texts)
        positions = sorted(self.rng.sample(range(1, total + 1), len(new_texts)))
        added = set()
        result: list[str] = []
        ki = 0
        queue = list(zip(positions, new_texts))
        for pos in range(1, total + 1):
            if queue and queue[0][0] == pos:
                _, text = queue.pop(0)
                added.add((pos, text))
                result.append(text)
            else:
                result.append(kept[ki])
                ki += 1
        self.content[path] = result
        return FileChange(
            path=path,
            kind="modified",
            added_lines=frozenset(added),
            deleted_lines=deleted,
        )

    def _fix_change(self, defect: _Defect) -> FileChange:
        lines = self.content[defect.class_path]
        deleted = set()
        for text in defect.planted:
            position = lines.index(text) + 1
            deleted.add((position, text))
        kept = [text for text in lines if text not in set(defect.planted)]
        replacement = self._new_line()
        insert_at = min(deleted)[0]
        insert_at = min(insert_at, len(kept) + 1)
        kept.insert(insert_at - 1, replacement)
        self.content[defect.class_path] = kept
        self.protected[defect.class_path].difference_update(defect.planted)
        return FileChange(
            path=defect.class_path,
            kind="modified",
            added_lines=frozenset({(insert_at, replacement)}),
            deleted_lines=frozenset(deleted),
        )

    def _poisson(self, lam: float) -> int:
        threshold = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= self.rng.random()
            if p <= threshold:
                return k
            k += 1

    def _dormancy_draw(self) -> int:
        mean = max(1.0, self.config.dormancy * self.config.releases)
        p = 1.0 / mean
        u = self.rng.random()
        return max(1, math.ceil(math.log(1.0 - u) / math.log(1.0 - p)))

    def _loc_draw(self, defective: bool) -> int:
        mu = BASE_LOC_LOG + (SIGNAL_SHIFT if defective else 0.0)
        return max(3, int(round(math.exp(self.rng.gauss(mu, LOC_SIGMA)))))

    # -- assembly -----------------------------------------------------------

    def run(self) -> tuple[ProjectHistory, list[Ticket], tuple[GroundTruthEntry, ...]]:
        cfg = self.config
        class_paths = [f"src/app/Class{i:03d}.java" for i in range(cfg.classes)]
        release_dates: list[datetime] = []
        cursor = T0
        for _ in range(cfg.releases):
            cursor = cursor + timedelta(days=self.rng.randint(14, 42))
            release_dates.append(cursor)
        releases = tuple(
            Release(name=f"v{i + 1}.0", ordinal=i, date=date)
            for i, date in enumerate(release_dates)
        )

        initial = class_paths[: max(2, int(cfg.classes * 0.6))]
        latecomers = class_paths[len(initial) :]
        births: dict[int, list[str]] = {}
        for path in latecomers:
            births.setdefault(self.rng.randrange(max(1, cfg.releases // 2)), []).append(
                path
            )

        self._emit(
            T0,
            self.rng.choice(AUTHORS),
            "initial import",
            [self._create_class(path) for path in initial],
        )

        living = list(initial)
        previous = T0
        for release in releases:
            self._generate_release(release, previous, living, births)
            previous = release.date

        # a little post-release activity so labeling at end-of-project sees
        # the full history
        tail_ts = releases[-1].date
        for _ in range(2):
            tail_ts = tail_ts + timedelta(days=self.rng.randint(2, 6))
            path = self.rng.choice(living)
            self._emit(
                tail_ts,
                self.rng.choice(AUTHORS),
                "post-release maintenance",
                [self._edit_class(path, self._loc_draw(False))],
            )

        history = ProjectHistory(commits=tuple(self.commits), releases=releases)
        ground_truth = tuple(
            GroundTruthEntry(d.key, d.class_path, d.intro_ordinal, d.fixed_ordinal)
            for d in self.defects
        )
        self.tickets.sort(key=lambda t: int(t.key.rsplit("-", 1)[1]))
        return history, self.tickets, ground_truth

    def _generate_release(
        self,
        release: Release,
        previous: datetime,
        living: list[str],
        births: dict[int, list[str]],
    ) -> None:
        cfg = self.config
        ordinal = release.ordinal

        new_defects: list[_Defect] = []
        candidates = list(living)
        for _ in range(min(self._poisson(cfg.defect_rate), len(candidates))):
            path = candidates.pop(self.rng.randrange(len(candidates)))
            self._ticket_serial += 1
            key = f"{cfg.project_key}-{self._ticket_serial}"
            fixed = min(ordinal + self._dormancy_draw(), cfg.releases - 1)
            planted = tuple(self._new_line() for _ in range(self.rng.randint(1, 3)))
            defect = _Defect(key, path, ordinal, fixed, planted)
            new_defects.append(defect)
            self.defects.append(defect)
            self.pending_fixes.setdefault(fixed, []).append(defect)

        defective_now = {
            d.class_path
            for d in self.defects
            if d.intro_ordinal <= ordinal < d.fixed_ordinal
        }
        intro_by_class = {d.class_path: d for d in new_defects}

        # every defective class gets edited; quieter classes churn at random
        edits: list[tuple[str, int, tuple[str, ...]]] = []
        for path in living:
            plant = intro_by_class.pop(path, None)
            defective = path in defective_now
            if plant is None and not defective:
                if self.rng.random() > BASE_EDIT_PROB:
                    continue
            edits.append(
                (path, self._loc_draw(defective), plant.planted if plant else ())
            )
            if defective and self.rng.random() < EXTRA_EDIT_PROB:
                edits.append((path, self._loc_draw(True), ()))
        self.rng.shuffle(edits)

        # all edit commits precede the window's fix commits, so a defect fixed
        # in its introducing release still has its planted lines in place
        groups: list[list[tuple[str, int, tuple[str, ...]]]] = []
        while edits:
            size = self.rng.choice((1, 1, 2, 3))
            group, edits = edits[:size], edits[size:]
            groups.append(group)

        births_today = [self._create_class(p) for p in births.get(ordinal, [])]
        if births_today:
            groups.insert(0, [])  # placeholder slot for the birth commit

        fixes = self.pending_fixes.pop(ordinal, [])
        slots = len(groups) + len(fixes)
        span = (release.date - previous) / (slots + 1)

        for i, group in enumerate(groups):
            cursor = previous + span * (i + 1)
            if i == 0 and births_today:
                self._emit(
                    cursor, self.rng.choice(AUTHORS), "add new components", births_today
                )
                living.extend(births.get(ordinal, []))
                continue
            merged: dict[str, tuple[int, tuple[str, ...]]] = {}
            for path, touch, plant in group:
                so_far, plants = merged.get(path, (0, ()))
                merged[path] = (so_far + touch, plants + plant)
            changes = []
            for path, (touch, plant) in merged.items():
                if plant:
                    self.protected[path].update(plant)
                changes.append(self._edit_class(path, touch, plant))
            if changes:
                self._emit(
                    cursor,
                    self.rng.choice(AUTHORS),
                    self.rng.choice(
                        (
                            "refine request routing",
                            "update pipeline internals",
                            "tighten validation paths",
                            "adjust caching behavior",
                        )
                    ),
                    changes,
                )

        for j, defect in enumerate(fixes):
            cursor = previous + span * (len(groups) + j + 1)
            fix_commit = self._emit(
                cursor,
                self.rng.choice(AUTHORS),
                f"{defect.key}: fix defect in {defect.class_path.rsplit('/', 1)[-1]}",
                [self._fix_change(defect)],
            )
            has_av = self.rng.random() < self.config.av_availability
            intro_name = f"{defect.intro_ordinal + 1}.0"  # release name sans the v
            opened = fix_commit.timestamp - timedelta(days=self.rng.randint(1, 10))
            self.tickets.append(
                Ticket(
                    key=defect.key,
                    kind="defect",
                    opened=min(opened, fix_commit.timestamp),
                    resolved=fix_commit.timestamp + timedelta(hours=1),
                    affected_versions=(intro_name,) if has_av else (),
                    fixed_versions=(f"{defect.fixed_ordinal + 1}.0",),
                    status="Resolved",
                )
            )


def generate(
    config: SynthConfig,
) -> tuple[ProjectHistory, list[Ticket], tuple[GroundTruthEntry, ...]]:
    """Deterministically generate (history, tickets, ground truth) for a seed."""
    config.validate()
    return _Generator(config).run()


# ---------------------------------------------------------------------------
# On-disk formats (identical to the miners')
# ---------------------------------------------------------------------------


def ticket_to_issue_json(ticket: Ticket) -> dict:
    return {
        "key": ticket.key,
        "fields": {
            "issuetype": {"name": "Bug"},
            "created": ticket.opened.isoformat(),
            "resolutiondate": ticket.resolved.isoformat() if ticket.resolved else None,
            "versions": [{"name": name} for name in ticket.affected_versions],
            "fixVersions": [{"name": name} for name in ticket.fixed_versions],
            "status": {"name": ticket.status},
        },
    }


def write_issues_json(tickets: list[Ticket], path) -> None:
    doc = [ticket_to_issue_json(t) for t in tickets]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def write_ground_truth_csv(entries: tuple[GroundTruthEntry, ...], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticket_key", "class_path", "intro_ordinal", "fixed_ordinal"])
        for entry in entries:
            writer.writerow(
                [
                    entry.ticket_key,
                    entry.class_path,
                    entry.intro_ordinal,
                    entry.fixed_ordinal,
                ]
            )
