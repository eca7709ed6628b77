"""Logical class identities over a history.

A renamed file keeps one logical identity, keyed externally by its final
path.  One forward replay of the commit stream yields, per class: every
revision that touched it, its creation instant, its line count at each
release tag, and per-release membership (the class universe).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .errors import InputError
from .history import CommitRecord, FileChange, ProjectHistory, is_class_path

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Revision:
    """One commit's touch of one class."""

    commit: CommitRecord
    change: FileChange

    @property
    def loc_added(self) -> int:
        return len(self.change.added_lines)

    @property
    def loc_deleted(self) -> int:
        return len(self.change.deleted_lines)


class ClassIndex:
    """Per-class view of a ProjectHistory, computed in a single replay.

    Classes are .java files; identity follows renames and is keyed by the
    final path the file ever had (its path at deletion time, for files
    deleted before the end of history).
    """

    def __init__(self, history: ProjectHistory):
        self.history = history
        self._created: dict[int, CommitRecord] = {}
        self._revisions: dict[int, list[Revision]] = {}
        self._final_path: dict[int, str] = {}
        self._universe: list[frozenset[int]] = []
        self._sizes: list[dict[int, int]] = []
        self._touched: dict[str, set[int]] = {}
        self._replay()
        self._by_path: dict[str, int] = {}
        for cid in sorted(self._final_path):
            path = self._final_path[cid]
            if path in self._by_path:
                logger.warning("final path %s reused by distinct classes; keeping last", path)
            self._by_path[path] = cid

    def _replay(self) -> None:
        live: dict[str, int] = {}  # current path -> class id
        sizes: dict[int, int] = {}  # class id -> current line count
        next_id = 0
        releases = self.history.releases
        boundary = 0

        def snapshot() -> None:
            self._universe.append(frozenset(live.values()))
            self._sizes.append({cid: sizes[cid] for cid in live.values()})

        def create(commit: CommitRecord, change: FileChange, lines: int) -> int:
            nonlocal next_id
            cid = next_id
            next_id += 1
            live[change.path] = cid
            sizes[cid] = lines
            self._created[cid] = commit
            self._final_path[cid] = change.path
            self._revisions[cid] = []
            return cid

        for commit in self.history.commits:
            while boundary < len(releases) and commit.timestamp > releases[boundary].date:
                snapshot()
                boundary += 1
            touched = self._touched.setdefault(commit.id, set())
            for change in commit.changes:
                new_is_class = is_class_path(change.path)
                old_is_class = change.old_path is not None and is_class_path(
                    change.old_path
                )
                if not new_is_class and not old_is_class:
                    continue
                if change.kind == "added":
                    cid = create(commit, change, len(change.added_lines))
                elif change.kind == "renamed" and not old_is_class:
                    # a non-class file became a class; content is unknown
                    cid = create(commit, change, 0)
                    sizes[cid] = len(change.added_lines) - len(change.deleted_lines)
                else:
                    source = change.source_path
                    cid = live.get(source)
                    if cid is None:
                        # edit without a recorded creation (truncated history)
                        cid = create(commit, change, 0)
                        del live[change.path]
                        live[source] = cid
                        self._final_path[cid] = source
                    if change.kind == "deleted":
                        del live[source]
                    elif change.kind == "renamed":
                        del live[source]
                        if new_is_class:
                            live[change.path] = cid
                        self._final_path[cid] = change.path
                    sizes[cid] += len(change.added_lines) - len(change.deleted_lines)
                    touched.add(cid)
                self._revisions[cid].append(Revision(commit, change))
        while boundary < len(releases):
            snapshot()
            boundary += 1

    # -- queries ------------------------------------------------------------

    def class_universe(self, ordinal: int) -> frozenset[str]:
        """Final-path keys of classes existing at the release tag."""
        return frozenset(self._final_path[cid] for cid in self._universe[ordinal])

    def size_at(self, class_path: str, ordinal: int) -> int:
        cid = self._require(class_path)
        try:
            return self._sizes[ordinal][cid]
        except KeyError:
            raise InputError(
                f"class {class_path} absent at release ordinal {ordinal}"
            ) from None

    def exists_at(self, class_path: str, ordinal: int) -> bool:
        cid = self._by_path.get(class_path)
        return cid is not None and cid in self._universe[ordinal]

    def created_at(self, class_path: str):
        return self._created[self._require(class_path)].timestamp

    def revisions(self, class_path: str) -> tuple[Revision, ...]:
        return tuple(self._revisions[self._require(class_path)])

    def classes_touched(self, commit_id: str) -> frozenset[str]:
        """Classes a commit modified, deleted, or renamed (created-only excluded).

        A file created by a fix did not exist earlier, so it cannot have been
        defective before the fix.
        """
        return frozenset(
            self._final_path[cid] for cid in self._touched.get(commit_id, ())
        )

    def _require(self, class_path: str) -> int:
        cid = self._by_path.get(class_path)
        if cid is None:
            raise InputError(f"unknown class path: {class_path}")
        return cid
