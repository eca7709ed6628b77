"""Shared fixtures: in-memory histories and on-disk git repositories."""

from __future__ import annotations

import subprocess
from datetime import datetime, timezone
from pathlib import Path

import pytest

from snoring.history import CommitRecord, FileChange, ProjectHistory, Release
from snoring.issues import Ticket


def utc(year, month, day, hour=12, minute=0) -> datetime:
    return datetime(year, month, day, hour, minute, tzinfo=timezone.utc)


def modify(path, added=(), deleted=()):
    return FileChange(
        path=path,
        kind="modified",
        added_lines=frozenset(added),
        deleted_lines=frozenset(deleted),
    )


def create(path, lines):
    return FileChange(
        path=path,
        kind="added",
        added_lines=frozenset(enumerate(lines, start=1)),
    )


def commit(cid, ts, message, changes, parent=None, author="dev"):
    return CommitRecord(
        id=cid,
        timestamp=ts,
        author=author,
        message=message,
        parents=(parent,) if parent else (),
        changes=tuple(changes),
    )


def chain(*commits_in_order):
    """Wire parents along a straight line."""
    wired = []
    prev = None
    for c in commits_in_order:
        wired.append(
            CommitRecord(
                id=c.id,
                timestamp=c.timestamp,
                author=c.author,
                message=c.message,
                parents=(prev,) if prev else (),
                changes=c.changes,
            )
        )
        prev = c.id
    return tuple(wired)


BOILER = ("public class X {", "  int x0 = 0;", "}")


@pytest.fixture
def scenario():
    """Three classes, two tagged releases, fixes landing inside and after.

    Defect events: C1 gets a defect introduced and fixed inside release 1
    and another introduced in release 2, fixed after the last tag; C2's
    defect spans both releases; C3 carries two defects from release 1, one
    fixed in release 2 and one after the last tag.
    """
    c1, c2, c3 = "src/C1.java", "src/C2.java", "src/C3.java"
    commits = chain(
        commit("c0", utc(2021, 1, 1), "initial import", [
            create(c1, BOILER), create(c2, BOILER), create(c3, BOILER),
        ]),
        commit("c1", utc(2021, 1, 10), "grow c1", [
            modify(c1, added={(3, "  int bug1 = 1;")}),
        ]),
        commit("c2", utc(2021, 1, 12), "grow c2", [
            modify(c2, added={(3, "  int bug3 = 3;")}),
        ]),
        commit("c3", utc(2021, 1, 14), "grow c3", [
            modify(c3, added={(3, "  int bugA = 4;"), (4, "  int bugB = 5;")}),
        ]),
        commit("c4", utc(2021, 1, 20), "DEMO-1: fix c1 early defect", [
            modify(c1, deleted={(3, "  int bug1 = 1;")}),
        ]),
        commit("c5", utc(2021, 2, 5), "grow c1 again", [
            modify(c1, added={(3, "  int bug2 = 2;")}),
        ]),
        commit("c6", utc(2021, 2, 10), "DEMO-4: fix first c3 defect", [
            modify(c3, deleted={(3, "  int bugA = 4;")}),
        ]),
        commit("c7", utc(2021, 3, 10), "DEMO-2: fix c1 late defect", [
            modify(c1, deleted={(3, "  int bug2 = 2;")}),
        ]),
        commit("c8", utc(2021, 3, 11), "DEMO-3: fix c2 defect", [
            modify(c2, deleted={(3, "  int bug3 = 3;")}),
        ]),
        commit("c9", utc(2021, 3, 12), "DEMO-5: fix second c3 defect", [
            modify(c3, deleted={(4, "  int bugB = 5;")}),
        ]),
    )
    releases = (
        Release("v1", 0, utc(2021, 2, 1)),
        Release("v2", 1, utc(2021, 3, 1)),
    )
    history = ProjectHistory(commits=commits, releases=releases)

    def ticket(key, av, opened, resolved):
        return Ticket(
            key=key,
            kind="defect",
            opened=opened,
            resolved=resolved,
            affected_versions=(av,),
            fixed_versions=(),
            status="Resolved",
        )

    tickets = [
        ticket("DEMO-1", "1", utc(2021, 1, 15), utc(2021, 1, 21)),
        ticket("DEMO-2", "2", utc(2021, 3, 5), utc(2021, 3, 10, 13)),
        ticket("DEMO-3", "1", utc(2021, 3, 5), utc(2021, 3, 11, 13)),
        ticket("DEMO-4", "1", utc(2021, 2, 6), utc(2021, 2, 11)),
        ticket("DEMO-5", "1", utc(2021, 3, 5), utc(2021, 3, 12, 13)),
    ]
    return history, tickets


def run_git(repo: Path, *args, date: str | None = None) -> None:
    env = {
        "GIT_AUTHOR_NAME": "Fixture Dev",
        "GIT_AUTHOR_EMAIL": "dev@example.org",
        "GIT_COMMITTER_NAME": "Fixture Dev",
        "GIT_COMMITTER_EMAIL": "dev@example.org",
        "HOME": str(repo),
        "PATH": "/usr/bin:/bin:/usr/local/bin",
    }
    if date:
        env["GIT_AUTHOR_DATE"] = date
        env["GIT_COMMITTER_DATE"] = date
    subprocess.run(
        ["git", "-C", str(repo), *args],
        check=True,
        capture_output=True,
        env=env,
    )


def git_repo(root: Path, steps) -> Path:
    """Build a repo from (files, message, date, tag) steps.

    `files` maps path -> content (None deletes); `tag` is optional.
    """
    repo = root / "repo"
    repo.mkdir()
    run_git(repo, "init", "-q", "-b", "main")
    for files, message, date, tag in steps:
        for rel_path, content in files.items():
            target = repo / rel_path
            if content is None:
                target.unlink()
            else:
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(content, encoding="utf-8")
        run_git(repo, "add", "-A", date=date)
        run_git(repo, "commit", "-q", "-m", message, "--allow-empty", date=date)
        if tag:
            run_git(repo, "tag", tag, date=date)
    return repo


@pytest.fixture
def szz_repo(tmp_path):
    """A repo where a reformat-only commit sits between introduction and fix."""
    foo_v1 = "public class Foo {\n  int total = 0;\n}\n"
    foo_buggy = "public class Foo {\n  int total = 0;\n  total += compute();\n}\n"
    foo_reindented = (
        "public class Foo {\n  int total = 0;\n    total += compute();\n}\n"
    )
    foo_commented = (
        "public class Foo {\n  int total = 0;\n    total += compute();\n"
        "  // audit note\n}\n"
    )
    foo_fixed = (
        "public class Foo {\n  int total = 0;\n    total += safeCompute();\n"
        "  // audit note\n}\n"
    )
    steps = [
        ({"Foo.java": foo_v1}, "initial import", "2021-01-01T12:00:00+00:00", None),
        ({"Foo.java": foo_buggy}, "add accumulation", "2021-01-05T12:00:00+00:00", "v1"),
        ({"Foo.java": foo_reindented}, "reformat", "2021-02-01T12:00:00+00:00", "v2"),
        ({"Foo.java": foo_commented}, "annotate", "2021-02-10T12:00:00+00:00", None),
        ({"Foo.java": foo_fixed}, "PROJ-1: fix overflow", "2021-03-01T12:00:00+00:00", "v3"),
    ]
    return git_repo(tmp_path, steps)
