"""Git history mining: release-annotated, immutable commit streams.

A ProjectHistory is the raw material for everything downstream: the
first-parent mainline of a repository, its release tags in order, and the
line-level file changes of every commit.  Histories are value objects;
two ingestions of the same repository compare equal.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import InputError

logger = logging.getLogger(__name__)

CLASS_SUFFIX = ".java"
SCHEMA_VERSION = 1

CHANGE_KINDS = ("added", "modified", "deleted", "renamed")


def is_class_path(path: str) -> bool:
    """A "class" is one .java file; everything else is auxiliary."""
    return path.endswith(CLASS_SUFFIX)


@dataclass(frozen=True)
class FileChange:
    """One file's contribution to a commit diff.

    Line sets carry (line number, text) pairs: deleted lines are numbered in
    the pre-commit file, added lines in the post-commit file.
    """

    path: str
    kind: str
    added_lines: frozenset[tuple[int, str]] = frozenset()
    deleted_lines: frozenset[tuple[int, str]] = frozenset()
    old_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in CHANGE_KINDS:
            raise ValueError(f"unknown change kind {self.kind!r}")
        if self.kind == "added" and self.deleted_lines:
            raise ValueError("added file cannot carry deleted lines")
        if (self.old_path is not None) != (self.kind == "renamed"):
            raise ValueError("old_path is present iff kind is 'renamed'")

    @property
    def source_path(self) -> str:
        """Path of the file before this change (old side of a rename)."""
        return self.old_path if self.old_path is not None else self.path


@dataclass(frozen=True)
class CommitRecord:
    id: str
    timestamp: datetime
    author: str
    message: str
    parents: tuple[str, ...]
    changes: tuple[FileChange, ...]

    def __post_init__(self) -> None:
        if self.timestamp.tzinfo is None:
            raise ValueError(f"commit {self.id}: timestamp must be timezone-aware")


@dataclass(frozen=True)
class Release:
    name: str
    ordinal: int
    date: datetime


@dataclass(frozen=True)
class ProjectHistory:
    """Time-ordered commits plus the ordered release table.

    Commits keep first-parent mainline order; releases are ordered by date
    with contiguous ordinals from 0.  Commits dated after the last release
    are retained (they matter for labeling) but never produce dataset rows.
    """

    commits: tuple[CommitRecord, ...]
    releases: tuple[Release, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for i, rel in enumerate(self.releases):
            if rel.ordinal != i:
                raise ValueError("release ordinals must be contiguous from 0")
        for a, b in zip(self.releases, self.releases[1:]):
            if not a.date < b.date:
                raise ValueError(f"release dates must increase: {a.name} !< {b.name}")
        seen: set[str] = set()
        for c in self.commits:
            if c.id in seen:
                raise ValueError(f"duplicate commit id {c.id}")
            seen.add(c.id)
            for p in c.parents:
                if p not in seen:
                    raise ValueError(f"commit {c.id}: parent {p} not ingested earlier")

    @property
    def first_instant(self) -> datetime:
        return self.commits[0].timestamp

    @property
    def last_instant(self) -> datetime:
        return max(c.timestamp for c in self.commits)

    def class_universe(self, ordinal: int) -> frozenset[str]:
        """Classes (final-path keyed) existing at the release tag.

        Derived from a replay of the commit stream; the backing index is
        cached on the instance and excluded from equality.
        """
        index = getattr(self, "_index_cache", None)
        if index is None:
            from .classes import ClassIndex

            index = ClassIndex(self)
            object.__setattr__(self, "_index_cache", index)
        return index.class_universe(ordinal)


def release_of(commit: CommitRecord, releases: tuple[Release, ...]) -> Release | None:
    """Earliest release whose date >= the commit timestamp (inclusive).

    Returns None for commits after the last release (the post-last marker).
    """
    return release_of_instant(commit.timestamp, releases)


def release_of_instant(instant: datetime, releases: tuple[Release, ...]) -> Release | None:
    if not releases:
        raise InputError("release table is empty")
    for rel in releases:
        if rel.date >= instant:
            return rel
    return None


def interval_ordinal(release: Release | None, releases: tuple[Release, ...]) -> int:
    """Ordinal used for interval arithmetic; the post-last marker sorts after all releases."""
    return release.ordinal if release is not None else len(releases)


def link_tickets(history: ProjectHistory, tickets) -> dict[str, frozenset[str]]:
    """Map ticket key -> ids of commits naming that key as a standalone token.

    Word-boundary match, case-insensitive; an empty set flags an unlinked
    ticket (which is data, not a failure).
    """
    patterns = {
        t.key: re.compile(rf"\b{re.escape(t.key)}\b", re.IGNORECASE) for t in tickets
    }
    links: dict[str, set[str]] = {t.key: set() for t in tickets}
    for commit in history.commits:
        for key, pat in patterns.items():
            if pat.search(commit.message):
                links[key].add(commit.id)
    for key, ids in links.items():
        if not ids:
            logger.info("ticket %s has no linked commit", key)
    return {key: frozenset(ids) for key, ids in links.items()}


# ---------------------------------------------------------------------------
# Git ingestion
# ---------------------------------------------------------------------------

_COMMIT_SENTINEL = "\x01commit\x01"
_FIELD_SEP = "\x02"


def _git(repo: Path, *args: str) -> str:
    try:
        proc = subprocess.run(
            ["git", "-C", str(repo), *args],
            capture_output=True,
            text=True,
            check=True,
        )
    except FileNotFoundError as exc:
        raise InputError("git executable not found") from exc
    except subprocess.CalledProcessError as exc:
        raise InputError(f"git {args[0]} failed: {exc.stderr.strip()}") from exc
    return proc.stdout


def _natural_key(name: str) -> tuple:
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name))


def _read_releases(repo: Path, tag_pattern: str) -> tuple[list[Release], list[str]]:
    out = _git(
        repo,
        "for-each-ref",
        "refs/tags",
        f"--format=%(refname:short){_FIELD_SEP}%(creatordate:iso-strict)",
    )
    pat = re.compile(tag_pattern)
    tags: list[tuple[str, datetime]] = []
    for line in out.splitlines():
        if not line.strip():
            continue
        name, _, date_s = line.partition(_FIELD_SEP)
        if pat.fullmatch(name):
            tags.append((name, datetime.fromisoformat(date_s)))
    if len(tags) < 2:
        raise InputError(
            f"fewer than 2 releases: {len(tags)} tag(s) match pattern {tag_pattern!r}"
        )
    warnings: list[str] = []
    tags.sort(key=lambda t: _natural_key(t[0]))
    dates = [d for _, d in tags]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        warnings.append("tag dates non-monotone in name order; re-sorted by date")
        logger.warning(warnings[-1])
        tags.sort(key=lambda t: (t[1], _natural_key(t[0])))
    releases = [
        Release(name=name, ordinal=i, date=date) for i, (name, date) in enumerate(tags)
    ]
    return releases, warnings


_HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def _strip_prefix(target: str) -> str:
    return target[2:] if target.startswith(("a/", "b/")) else target


def _parse_diff(lines: list[str]) -> list[FileChange]:
    """Parse a --unified=0 patch body into FileChange records."""
    changes: list[FileChange] = []
    i = 0
    n = len(lines)
    while i < n:
        if not lines[i].startswith("diff --git "):
            i += 1
            continue
        kind = "modified"
        minus_path: str | None = None
        plus_path: str | None = None
        rename_from: str | None = None
        rename_to: str | None = None
        added: set[tuple[int, str]] = set()
        deleted: set[tuple[int, str]] = set()
        i += 1
        while i < n and not lines[i].startswith("diff --git "):
            hline = lines[i]
            if hline.startswith("new file mode"):
                kind = "added"
            elif hline.startswith("deleted file mode"):
                kind = "deleted"
            elif hline.startswith("rename from "):
                kind = "renamed"
                rename_from = hline[len("rename from ") :]
            elif hline.startswith("rename to "):
                rename_to = hline[len("rename to ") :]
            elif hline.startswith("--- "):
                if hline[4:] != "/dev/null":
                    minus_path = _strip_prefix(hline[4:])
            elif hline.startswith("+++ "):
                if hline[4:] != "/dev/null":
                    plus_path = _strip_prefix(hline[4:])
            elif hline.startswith("@@"):
                m = _HUNK_RE.match(hline)
                if m is None:
                    raise InputError(f"unparseable hunk header: {hline!r}")
                old_start = int(m.group(1))
                new_start = int(m.group(3))
                i += 1
                d_off = a_off = 0
                while i < n and lines[i][:1] in ("+", "-", "\\"):
                    body = lines[i]
                    if body.startswith("-"):
                        deleted.add((old_start + d_off, body[1:]))
                        d_off += 1
                    elif body.startswith("+"):
                        added.add((new_start + a_off, body[1:]))
                        a_off += 1
                    i += 1
                continue
            i += 1
        if kind == "renamed":
            path, old_path = rename_to, rename_from
        elif kind == "deleted":
            path, old_path = minus_path, None
        else:
            path, old_path = plus_path or minus_path, None
        if path is None:
            continue  # binary or otherwise contentless diff entry
        changes.append(
            FileChange(
                path=path,
                kind=kind,
                added_lines=frozenset(added),
                deleted_lines=frozenset(deleted),
                old_path=old_path,
            )
        )
    return changes


def ingest_history(repo_path: str | Path, tag_pattern: str = r"v.*") -> ProjectHistory:
    """Ingest the first-parent mainline of a Git repository.

    Requires at least two tags matching ``tag_pattern`` (full regex match).
    Rename detection runs at the 50% similarity threshold; merge side-chains
    contribute through the merge commit's cumulative diff.  Deterministic for
    a fixed repository state.
    """
    repo = Path(repo_path)
    if not (repo / ".git").exists() and not (repo / "HEAD").exists():
        raise InputError(f"not a readable git repository: {repo}")
    releases, warnings = _read_releases(repo, tag_pattern)

    fmt = (
        f"{_COMMIT_SENTINEL}%H{_FIELD_SEP}%cI{_FIELD_SEP}%an{_FIELD_SEP}"
        f"%P{_FIELD_SEP}%B{_FIELD_SEP}"
    )
    out = _git(
        repo,
        "log",
        "--first-parent",
        "--reverse",
        "-M50%",
        "--unified=0",
        f"--format={fmt}",
        "HEAD",
    )
    commits: list[CommitRecord] = []
    seen: set[str] = set()
    blocks = out.split(_COMMIT_SENTINEL)
    for block in blocks:
        if not block.strip():
            continue
        parts = block.split(_FIELD_SEP, 4)
        if len(parts) < 5:
            raise InputError("unexpected git log output")
        cid, date_s, author, parents_s, rest = parts
        message, _, patch_body = rest.partition(_FIELD_SEP)
        first_parent = parents_s.split()[:1]
        parents = tuple(p for p in first_parent if p in seen)
        changes = _parse_diff(patch_body.splitlines())
        commits.append(
            CommitRecord(
                id=cid,
                timestamp=datetime.fromisoformat(date_s),
                author=author,
                message=message.strip("\n"),
                parents=parents,
                changes=tuple(changes),
            )
        )
        seen.add(cid)
    if not commits:
        raise InputError(f"repository has no commits on HEAD: {repo}")
    for a, b in zip(commits, commits[1:]):
        if b.timestamp < a.timestamp:
            warnings.append(f"commit {b.id} dated before its mainline parent")
    return ProjectHistory(
        commits=tuple(commits), releases=tuple(releases), warnings=tuple(warnings)
    )


# ---------------------------------------------------------------------------
# JSON-lines cache
# ---------------------------------------------------------------------------


def _change_to_json(ch: FileChange) -> dict:
    doc = {
        "path": ch.path,
        "kind": ch.kind,
        "added": sorted(ch.added_lines),
        "deleted": sorted(ch.deleted_lines),
    }
    if ch.old_path is not None:
        doc["old_path"] = ch.old_path
    return doc


def save_history(history: ProjectHistory, path: str | Path) -> None:
    """Persist as history.jsonl: a header record, then one record per commit."""
    header = {
        "schema_version": SCHEMA_VERSION,
        "releases": [
            {"name": r.name, "ordinal": r.ordinal, "date": r.date.isoformat()}
            for r in history.releases
        ],
        "warnings": list(history.warnings),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for c in history.commits:
            record = {
                "id": c.id,
                "ts": c.timestamp.isoformat(),
                "author": c.author,
                "msg": c.message,
                "parents": list(c.parents),
                "changes": [_change_to_json(ch) for ch in c.changes],
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def load_history(path: str | Path) -> ProjectHistory:
    """Reload a history.jsonl cache; reproduces the ingested history exactly."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read history cache {path}: {exc}") from exc
    if not lines:
        raise InputError(f"empty history cache: {path}")
    try:
        header = json.loads(lines[0])
        if header.get("schema_version") != SCHEMA_VERSION:
            raise InputError(
                f"unsupported history schema_version {header.get('schema_version')!r}"
            )
        releases = tuple(
            Release(r["name"], r["ordinal"], datetime.fromisoformat(r["date"]))
            for r in header["releases"]
        )
        commits = []
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            changes = tuple(
                FileChange(
                    path=ch["path"],
                    kind=ch["kind"],
                    added_lines=frozenset((n, t) for n, t in ch["added"]),
                    deleted_lines=frozenset((n, t) for n, t in ch["deleted"]),
                    old_path=ch.get("old_path"),
                )
                for ch in rec["changes"]
            )
            commits.append(
                CommitRecord(
                    id=rec["id"],
                    timestamp=datetime.fromisoformat(rec["ts"]),
                    author=rec["author"],
                    message=rec["msg"],
                    parents=tuple(rec["parents"]),
                    changes=changes,
                )
            )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed history cache {path}: {exc}") from exc
    return ProjectHistory(
        commits=tuple(commits),
        releases=releases,
        warnings=tuple(header.get("warnings", [])),
    )
