"""Git ingestion, release mapping, ticket linking, and the JSONL cache."""

from __future__ import annotations

import pytest

from snoring.errors import InputError
from snoring.history import (
    ProjectHistory,
    Release,
    ingest_history,
    link_tickets,
    load_history,
    release_of,
    save_history,
)
from snoring.issues import Ticket

from conftest import chain, commit, git_repo, utc


def simple_steps():
    return [
        ({"A.java": "a1\n"}, "one", "2021-01-01T10:00:00+00:00", None),
        ({"A.java": "a1\na2\n"}, "two", "2021-01-03T10:00:00+00:00", None),
        ({"B.java": "b1\n"}, "three", "2021-01-05T10:00:00+00:00", "v1"),
        ({"A.java": "a1\na2\na3\n"}, "four", "2021-02-01T10:00:00+00:00", None),
        ({"B.java": None}, "five", "2021-02-10T10:00:00+00:00", None),
        ({"C.java": "c1\n"}, "six", "2021-02-20T10:00:00+00:00", "v2"),
    ]


class TestIngest:
    def test_six_commits_two_releases(self, tmp_path):
        repo = git_repo(tmp_path, simple_steps())
        history = ingest_history(repo, r"v\d+")
        assert len(history.commits) == 6
        assert [r.name for r in history.releases] == ["v1", "v2"]
        assert [r.ordinal for r in history.releases] == [0, 1]

    def test_single_tag_errors(self, tmp_path):
        steps = simple_steps()
        steps[-1] = (steps[-1][0], steps[-1][1], steps[-1][2], None)
        repo = git_repo(tmp_path, steps)
        with pytest.raises(InputError, match="fewer than 2 releases"):
            ingest_history(repo, r"v\d+")

    def test_ingestion_idempotent(self, tmp_path):
        repo = git_repo(tmp_path, simple_steps())
        assert ingest_history(repo, r"v\d+") == ingest_history(repo, r"v\d+")

    def test_diff_lines_recorded(self, tmp_path):
        repo = git_repo(tmp_path, simple_steps())
        history = ingest_history(repo, r"v\d+")
        second = history.commits[1]
        assert second.changes[0].added_lines == frozenset({(2, "a2")})
        assert second.changes[0].deleted_lines == frozenset()
        fifth = history.commits[4]
        assert fifth.changes[0].kind == "deleted"
        assert fifth.changes[0].path == "B.java"

    def test_rename_detected(self, tmp_path):
        steps = [
            ({"Old.java": "line one\nline two\nline three\nline four\n"},
             "base", "2021-01-01T10:00:00+00:00", "v1"),
            ({"Old.java": None, "New.java": "line one\nline two\nline three\nline four\n"},
             "rename", "2021-02-01T10:00:00+00:00", "v2"),
        ]
        repo = git_repo(tmp_path, steps)
        history = ingest_history(repo, r"v\d+")
        change = history.commits[1].changes[0]
        assert change.kind == "renamed"
        assert change.old_path == "Old.java"
        assert change.path == "New.java"

    def test_unreadable_repo(self, tmp_path):
        with pytest.raises(InputError, match="not a readable git repository"):
            ingest_history(tmp_path / "nowhere")

    def test_non_monotone_tag_dates_resorted(self, tmp_path):
        steps = [
            ({"A.java": "a\n"}, "one", "2021-03-01T10:00:00+00:00", None),
            ({"A.java": "a\nb\n"}, "two", "2021-03-05T10:00:00+00:00", "v1"),
        ]
        repo = git_repo(tmp_path, steps)
        # v2 tags an *older* commit, so name order disagrees with date order
        from conftest import run_git

        run_git(repo, "tag", "v2", "HEAD~1")
        history = ingest_history(repo, r"v\d+")
        assert [r.name for r in history.releases] == ["v2", "v1"]
        assert any("re-sorted" in w for w in history.warnings)


class TestReleaseOf:
    releases = (
        Release("v1", 0, utc(2021, 2, 1)),
        Release("v2", 1, utc(2021, 3, 1)),
    )

    def _commit_at(self, ts):
        return commit("cx", ts, "msg", [])

    def test_between_tags_maps_to_next(self):
        assert release_of(self._commit_at(utc(2021, 2, 10)), self.releases).name == "v2"

    def test_exactly_at_tag_maps_to_it(self):
        assert release_of(self._commit_at(utc(2021, 2, 1)), self.releases).name == "v1"

    def test_after_last_tag_is_post_marker(self):
        assert release_of(self._commit_at(utc(2021, 3, 2)), self.releases) is None


class TestLinkTickets:
    def _history(self, *messages):
        commits = chain(
            *[
                commit(f"c{i}", utc(2021, 1, 1 + i), msg, [])
                for i, msg in enumerate(messages)
            ]
        )
        releases = (
            Release("v1", 0, utc(2021, 6, 1)),
            Release("v2", 1, utc(2021, 7, 1)),
        )
        return ProjectHistory(commits=commits, releases=releases)

    def _ticket(self, key):
        return Ticket(
            key=key,
            kind="defect",
            opened=utc(2021, 1, 1),
            resolved=utc(2021, 1, 2),
            affected_versions=(),
            fixed_versions=(),
            status="Resolved",
        )

    def test_standalone_token_matches(self):
        history = self._history("Fix BOOKKEEPER-1018: protocol bug")
        links = link_tickets(history, [self._ticket("BOOKKEEPER-1018")])
        assert links["BOOKKEEPER-1018"] == frozenset({"c0"})

    def test_no_token_no_match(self):
        history = self._history("bookkeeper1018 cleanup")
        links = link_tickets(history, [self._ticket("BOOKKEEPER-1018")])
        assert links["BOOKKEEPER-1018"] == frozenset()

    def test_case_insensitive_prefix(self):
        history = self._history("fix avro-7 again")
        links = link_tickets(history, [self._ticket("AVRO-7")])
        assert links["AVRO-7"] == frozenset({"c0"})

    def test_two_commits_both_linked(self):
        history = self._history("AVRO-7 first pass", "cleanup for AVRO-7")
        links = link_tickets(history, [self._ticket("AVRO-7")])
        assert links["AVRO-7"] == frozenset({"c0", "c1"})

    def test_longer_key_not_confused(self):
        history = self._history("Fix AVRO-71")
        links = link_tickets(history, [self._ticket("AVRO-7")])
        assert links["AVRO-7"] == frozenset()


class TestCache:
    def test_round_trip(self, tmp_path, scenario):
        history, _tickets = scenario
        path = tmp_path / "history.jsonl"
        save_history(history, path)
        assert load_history(path) == history

    def test_git_ingest_round_trip(self, tmp_path):
        repo = git_repo(tmp_path, simple_steps())
        history = ingest_history(repo, r"v\d+")
        path = tmp_path / "history.jsonl"
        save_history(history, path)
        assert load_history(path) == history

    def test_malformed_cache(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text('{"schema_version": 99}\n', encoding="utf-8")
        with pytest.raises(InputError, match="schema_version"):
            load_history(path)

    def test_missing_cache(self, tmp_path):
        with pytest.raises(InputError):
            load_history(tmp_path / "absent.jsonl")


class TestInvariants:
    def test_release_ordinals_contiguous(self):
        with pytest.raises(ValueError, match="contiguous"):
            ProjectHistory(
                commits=chain(commit("c0", utc(2021, 1, 1), "m", [])),
                releases=(Release("v1", 1, utc(2021, 2, 1)),),
            )

    def test_release_dates_increasing(self):
        with pytest.raises(ValueError, match="increase"):
            ProjectHistory(
                commits=chain(commit("c0", utc(2021, 1, 1), "m", [])),
                releases=(
                    Release("v1", 0, utc(2021, 2, 1)),
                    Release("v2", 1, utc(2021, 2, 1)),
                ),
            )

    def test_parents_must_exist(self):
        with pytest.raises(ValueError, match="parent"):
            ProjectHistory(
                commits=(commit("c1", utc(2021, 1, 2), "m", [], parent="ghost"),),
                releases=(
                    Release("v1", 0, utc(2021, 2, 1)),
                    Release("v2", 1, utc(2021, 3, 1)),
                ),
            )

    def test_file_change_validation(self):
        from snoring.history import FileChange

        with pytest.raises(ValueError, match="old_path"):
            FileChange(path="A.java", kind="renamed")
        with pytest.raises(ValueError, match="deleted lines"):
            FileChange(
                path="A.java",
                kind="added",
                deleted_lines=frozenset({(1, "x")}),
            )
