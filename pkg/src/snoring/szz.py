"""Defect-introduction identification.

Hybrid of two routes: the oldest affected version recorded on the ticket
when one resolves against the release table, otherwise line tracing over the
fix diff (blame-style), skipping cosmetic changes so that a reformat between
introduction and fix does not steal the attribution.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from typing import Callable

from .errors import InputError
from .history import (
    CommitRecord,
    ProjectHistory,
    Release,
    is_class_path,
    release_of,
)
from .issues import Ticket, resolve_versions

logger = logging.getLogger(__name__)

_BLOCK_COMMENT_RE = re.compile(r"/\*.*?\*/", re.DOTALL)
_WS_RE = re.compile(r"\s+")


def strip_whitespace(text: str) -> str:
    return _WS_RE.sub("", text)


def normalize_code(text: str) -> str:
    """Collapse a line to its code content: no comments, no whitespace.

    Lightweight scanner only; comment markers inside string literals are not
    recognized, and an unterminated '/*' blanks the rest of the line.
    """
    text = _BLOCK_COMMENT_RE.sub("", text)
    open_block = text.find("/*")
    if open_block >= 0:
        text = text[:open_block]
    line_comment = text.find("//")
    if line_comment >= 0:
        text = text[:line_comment]
    return strip_whitespace(text)


# -- cosmetic filtering -------------------------------------------------------

# A rule sees the deleted line text and the whitespace-stripped texts of the
# added lines in the same file change; True means "cosmetic, drop it".
Rule = Callable[[str, frozenset[str]], bool]


def rule_whitespace_only(text: str, added: frozenset[str]) -> bool:
    return strip_whitespace(text) == ""


def rule_comment_only(text: str, added: frozenset[str]) -> bool:
    return text.lstrip().startswith("//")


def rule_documentation(text: str, added: frozenset[str]) -> bool:
    stripped = text.lstrip()
    if stripped.startswith("*"):
        return True  # javadoc continuation
    return stripped.startswith("/*") and normalize_code(text) == ""


def rule_indentation_only(text: str, added: frozenset[str]) -> bool:
    return strip_whitespace(text) in added


@dataclass(frozen=True)
class CosmeticFilter:
    """Ordered predicates marking fix-diff lines to ignore.

    Rules are pure per-line/per-change predicates; a larger rule set can only
    shrink the set of surviving lines.
    """

    rules: tuple[tuple[str, Rule], ...]

    def is_cosmetic(self, text: str, added_stripped: frozenset[str]) -> bool:
        return any(rule(text, added_stripped) for _, rule in self.rules)


DEFAULT_FILTER = CosmeticFilter(
    rules=(
        ("whitespace", rule_whitespace_only),
        ("comment", rule_comment_only),
        ("documentation", rule_documentation),
        ("indentation", rule_indentation_only),
    )
)


@dataclass(frozen=True)
class IntroductionEstimate:
    """Where a defect entered the code, and which route said so."""

    ticket_key: str
    release: Release | None
    source: str  # affected_version | szz | unknown

    def __post_init__(self) -> None:
        if self.source not in ("affected_version", "szz", "unknown"):
            raise ValueError(f"unknown estimate source {self.source!r}")
        if (self.release is None) != (self.source == "unknown"):
            raise ValueError("release is absent iff the source is unknown")


def deleted_defect_lines(
    fix_commit: CommitRecord, cosmetic: CosmeticFilter = DEFAULT_FILTER
) -> frozenset[tuple[str, int, str]]:
    """Deleted/modified lines of the fix diff on class files, minus cosmetics.

    Returned paths and line numbers refer to the file *before* the fix (the
    old side of a rename), which is what line tracing needs.  A fix touching
    no class files yields the empty set.
    """
    survivors: set[tuple[str, int, str]] = set()
    for change in fix_commit.changes:
        if change.kind == "added" or not is_class_path(change.source_path):
            continue
        added_stripped = frozenset(
            strip_whitespace(text) for _, text in change.added_lines
        )
        for line_no, text in change.deleted_lines:
            if not cosmetic.is_cosmetic(text, added_stripped):
                survivors.add((change.source_path, line_no, text))
    return frozenset(survivors)


# -- line lineage -------------------------------------------------------------

# Annotated file content: per path, a list of (text, origin commit id).
AnnotatedState = dict[str, list[tuple[str, str]]]


def _annotate_states(
    history: ProjectHistory, stops: frozenset[str]
) -> dict[str, AnnotatedState]:
    """Replay file contents once, snapshotting just before each stop commit.

    A line whose change was cosmetic (equal code content modulo whitespace
    and comments) keeps the origin of the line it replaced, mirroring blame
    that skips reformats.  Snapshots are shallow copies; _apply_change never
    mutates a line list in place.
    """
    states: dict[str, AnnotatedState] = {}
    state: AnnotatedState = {}
    remaining = set(stops)
    for commit in history.commits:
        if commit.id in remaining:
            states[commit.id] = dict(state)
            remaining.discard(commit.id)
        for change in commit.changes:
            _apply_change(state, commit.id, change)
    if remaining:
        raise InputError(f"commits not in history: {sorted(remaining)}")
    return states


def _apply_change(state, commit_id: str, change) -> None:
    if change.kind == "added":
        lines = [text for _, text in sorted(change.added_lines)]
        state[change.path] = [(text, commit_id) for text in lines]
        return
    source = change.source_path
    old = state.get(source, [])
    if change.kind == "deleted":
        state.pop(source, None)
        return
    deleted_positions = sorted(n for n, _ in change.deleted_lines)
    deleted_set = set(deleted_positions)
    # pool of origins from deleted lines, keyed by code content, for
    # cosmetic inheritance (FIFO per distinct content)
    pool: dict[str, list[str]] = {}
    for pos in deleted_positions:
        if pos - 1 < len(old):
            text, origin = old[pos - 1]
            norm = normalize_code(text)
            if norm:
                pool.setdefault(norm, []).append(origin)
    kept = [entry for i, entry in enumerate(old, start=1) if i not in deleted_set]
    added = sorted(change.added_lines)
    result: list[tuple[str, str]] = []
    ki = 0
    ai = 0
    total = len(kept) + len(added)
    for pos in range(1, total + 1):
        if ai < len(added) and added[ai][0] == pos:
            text = added[ai][1]
            ai += 1
            norm = normalize_code(text)
            origins = pool.get(norm)
            if origins:
                result.append((text, origins.pop(0)))
            else:
                result.append((text, commit_id))
        else:
            if ki >= len(kept):
                raise InputError(
                    f"inconsistent diff for {change.path} at {commit_id}: "
                    f"line numbers do not fit the replayed file"
                )
            result.append(kept[ki])
            ki += 1
    if change.kind == "renamed":
        state.pop(source, None)
    state[change.path] = result


def _origin_in_state(state: AnnotatedState, path: str, line: int, before: str) -> str:
    if path not in state:
        raise InputError(f"no file {path} immediately before commit {before}")
    lines = state[path]
    if not (1 <= line <= len(lines)):
        raise InputError(
            f"line {line} out of range for {path} before {before} "
            f"({len(lines)} lines)"
        )
    return lines[line - 1][1]


def trace_last_touch(
    path: str, line: int, before: str, history: ProjectHistory
) -> str:
    """Commit that last materially changed `line` of `path` before `before`.

    Cosmetic touches (whitespace/comment-equal rewrites) are skipped when
    attributing the origin; a line present since the initial import traces to
    the initial commit.
    """
    state = _annotate_states(history, frozenset({before}))[before]
    return _origin_in_state(state, path, line, before)


# -- introduction resolution --------------------------------------------------


def fix_commits_of(
    ticket: Ticket, links: dict[str, frozenset[str]], history: ProjectHistory
) -> tuple[CommitRecord, ...]:
    ids = links.get(ticket.key, frozenset())
    return tuple(c for c in history.commits if c.id in ids)


def fixed_release_of(
    ticket: Ticket, links: dict[str, frozenset[str]], history: ProjectHistory
) -> Release | None:
    """Release interval containing the ticket's latest linked fix commit."""
    commits = fix_commits_of(ticket, links, history)
    if not commits:
        raise InputError(f"ticket {ticket.key} has no linked commit")
    latest = max(commits, key=lambda c: (c.timestamp, c.id))
    return release_of(latest, history.releases)


def resolve_introductions(
    tickets: list[Ticket],
    links: dict[str, frozenset[str]],
    history: ProjectHistory,
    cosmetic: CosmeticFilter = DEFAULT_FILTER,
) -> dict[str, IntroductionEstimate]:
    """Resolve every resolved-and-linked ticket with one lineage replay.

    Tickets with a resolvable affected version take it (oldest wins); the
    rest trace their fix diffs.  A fix that only adds lines yields source
    "unknown" and is excluded from labeling by callers.
    """
    usable = [t for t in tickets if t.is_resolved and links.get(t.key)]
    commit_by_id = {c.id: c for c in history.commits}
    need_trace: list[tuple[Ticket, tuple[CommitRecord, ...]]] = []
    estimates: dict[str, IntroductionEstimate] = {}
    for ticket in usable:
        fix_commits = fix_commits_of(ticket, links, history)
        avs = resolve_versions(ticket.affected_versions, history.releases)
        if avs:
            fixed = fixed_release_of(ticket, links, history)
            fixed_ordinal = fixed.ordinal if fixed else len(history.releases)
            intro = avs[0]
            if intro.ordinal > fixed_ordinal:
                clamped = history.releases[max(fixed_ordinal - 1, 0)]
                logger.warning(
                    "ticket %s: affected version %s later than fixed release; "
                    "clamped to %s",
                    ticket.key,
                    intro.name,
                    clamped.name,
                )
                intro = clamped
            estimates[ticket.key] = IntroductionEstimate(
                ticket.key, intro, "affected_version"
            )
        else:
            need_trace.append((ticket, fix_commits))

    stops = frozenset(c.id for _, commits in need_trace for c in commits)
    states = _annotate_states(history, stops) if stops else {}
    for ticket, fix_commits in need_trace:
        origin_releases: list[Release] = []
        for fix in sorted(fix_commits, key=lambda c: (c.timestamp, c.id)):
            state = states[fix.id]
            for path, line_no, _text in sorted(deleted_defect_lines(fix, cosmetic)):
                try:
                    origin_id = _origin_in_state(state, path, line_no, fix.id)
                except InputError as exc:
                    logger.warning("ticket %s: trace failed (%s)", ticket.key, exc)
                    continue
                rel = release_of(commit_by_id[origin_id], history.releases)
                if rel is None:
                    continue  # introduced after the last release: never labelable
                origin_releases.append(rel)
        if origin_releases:
            intro = min(origin_releases, key=lambda r: r.ordinal)
            estimates[ticket.key] = IntroductionEstimate(ticket.key, intro, "szz")
        else:
            logger.warning(
                "ticket %s: nothing to trace (pure-addition fix); source unknown",
                ticket.key,
            )
            estimates[ticket.key] = IntroductionEstimate(ticket.key, None, "unknown")
    return estimates


def resolve_introduction(
    ticket: Ticket,
    links: dict[str, frozenset[str]],
    history: ProjectHistory,
    cosmetic: CosmeticFilter = DEFAULT_FILTER,
) -> IntroductionEstimate:
    """Single-ticket convenience wrapper over resolve_introductions."""
    if not ticket.is_resolved:
        raise InputError(f"ticket {ticket.key} is not resolved")
    if not links.get(ticket.key):
        raise InputError(f"ticket {ticket.key} is not linked to any commit")
    return resolve_introductions([ticket], links, history, cosmetic)[ticket.key]


def write_introductions_csv(
    estimates: list[IntroductionEstimate],
    fixed_releases: dict[str, Release | None],
    path,
) -> None:
    """Emit introductions.csv: ticket_key, introducing/fixed release, source."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ticket_key", "introducing_release", "fixed_release", "source"])
        for est in estimates:
            fixed = fixed_releases.get(est.ticket_key)
            writer.writerow(
                [
                    est.ticket_key,
                    est.release.name if est.release else "",
                    fixed.name if fixed else "(post-release)",
                    est.source,
                ]
            )
