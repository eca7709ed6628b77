"""Process-metric extraction for (class, release) cells."""

from __future__ import annotations

import pytest

from snoring.classes import ClassIndex
from snoring.errors import InputError
from snoring.features import FEATURE_NAMES, build_fix_index, compute_features
from snoring.history import ProjectHistory, Release, link_tickets
from snoring.issues import Ticket

from conftest import chain, commit, create, modify, utc

A = "src/A.java"


def two_revision_history():
    """The hand-computed example: (+10/-2) in a 3-file commit, (+4/-4) in a
    1-file commit, both inside release 2's window."""
    base_lines = tuple(f"base{i}();" for i in range(1, 21))
    commits = chain(
        commit("c0", utc(2021, 1, 1), "import", [
            create(A, base_lines),
            create("src/B.java", ("b();",)),
            create("src/C.java", ("c();",)),
        ]),
        commit("c1", utc(2021, 2, 10), "rev one", [
            modify(
                A,
                added={(i, f"new{i}();") for i in range(1, 11)},
                deleted={(1, "base1();"), (2, "base2();")},
            ),
            modify("src/B.java", added={(2, "b2();")}),
            modify("src/C.java", added={(2, "c2();")}),
        ], author="ana"),
        commit("c2", utc(2021, 2, 20), "rev two", [
            modify(
                A,
                added={(i, f"swap{i}();") for i in range(1, 5)},
                deleted={(i, f"new{i}();") for i in range(1, 5)},
            ),
        ], author="bram"),
    )
    releases = (
        Release("v1", 0, utc(2021, 2, 1)),
        Release("v2", 1, utc(2021, 3, 1)),
    )
    return ProjectHistory(commits=commits, releases=releases)


class TestHandComputedExample:
    def test_revision_aggregates(self):
        history = two_revision_history()
        vector = compute_features(A, history.releases[1], history)
        assert vector.loc_touched == 20
        assert vector.nr == 2
        assert vector.loc_added == 14
        assert vector.max_loc_added == 10
        assert vector.avg_loc_added == 7
        assert vector.churn == 8
        assert vector.max_churn == 8
        assert vector.avg_churn == 4
        assert vector.change_set_size == 4
        assert vector.max_change_set == 3
        assert vector.avg_change_set == 2
        assert vector.nauth == 2

    def test_size_tracks_the_snapshot(self):
        history = two_revision_history()
        assert compute_features(A, history.releases[0], history).size == 20
        assert compute_features(A, history.releases[1], history).size == 28

    def test_age_in_weeks(self):
        history = two_revision_history()
        vector = compute_features(A, history.releases[0], history)
        assert vector.age == pytest.approx(31 / 7)

    def test_weighted_age(self):
        history = two_revision_history()
        vector = compute_features(A, history.releases[1], history)
        # revisions at 40 and 50 days, weighted 12 and 8 lines
        expected = ((40 / 7) * 12 + (50 / 7) * 8) / 20
        assert vector.weighted_age == pytest.approx(expected, rel=1e-8)


class TestQuietWindow:
    def test_untouched_class_zero_aggregates(self):
        history = two_revision_history()
        vector = compute_features("src/B.java", history.releases[0], history)
        assert vector.nr == 0
        assert vector.loc_touched == 0
        assert vector.churn == 0
        assert vector.change_set_size == 0
        assert vector.weighted_age == 0.0
        assert vector.size == 1
        assert vector.age > 0

    def test_single_revision_max_equals_avg(self):
        history = two_revision_history()
        vector = compute_features("src/B.java", history.releases[1], history)
        assert vector.nr == 1
        assert vector.max_loc_added == vector.avg_loc_added == 1
        assert vector.max_change_set == vector.avg_change_set == 3

    def test_absent_class_rejected(self):
        history = two_revision_history()
        with pytest.raises(InputError, match="absent at release"):
            compute_features("src/Ghost.java", history.releases[0], history)


class TestNfix:
    def test_counts_completed_fix_commits(self):
        history = two_revision_history()
        ticket = Ticket(
            key="PROJ-9",
            kind="defect",
            opened=utc(2021, 2, 1),
            resolved=utc(2021, 2, 21),
            affected_versions=(),
            fixed_versions=(),
            status="Resolved",
        )
        # link the second revision as the fix commit
        history2 = ProjectHistory(
            commits=tuple(
                c if c.id != "c2" else type(c)(
                    id=c.id,
                    timestamp=c.timestamp,
                    author=c.author,
                    message="PROJ-9: repair swap logic",
                    parents=c.parents,
                    changes=c.changes,
                )
                for c in history.commits
            ),
            releases=history.releases,
        )
        links = link_tickets(history2, [ticket])
        fix_index = build_fix_index([ticket], links, history2)
        vector = compute_features(
            A, history2.releases[1], history2, fix_index=fix_index
        )
        assert vector.nfix == 1
        without = compute_features(A, history2.releases[1], history2)
        assert without.nfix == 0


class TestInvariants:
    def test_churn_identity(self):
        history = two_revision_history()
        index = ClassIndex(history)
        for release in history.releases:
            for path in index.class_universe(release.ordinal):
                v = compute_features(path, release, history, index=index)
                assert v.churn == v.loc_added - (v.loc_touched - v.loc_added)
                assert v.loc_touched >= abs(v.churn)

    def test_averages_scale_with_nr(self):
        history = two_revision_history()
        v = compute_features(A, history.releases[1], history)
        assert v.avg_loc_added * v.nr == pytest.approx(v.loc_added, rel=1e-9)
        assert v.avg_churn * v.nr == pytest.approx(v.churn, rel=1e-9)
        assert v.avg_change_set * v.nr == pytest.approx(v.change_set_size, rel=1e-9)

    def test_feature_name_order(self):
        assert len(FEATURE_NAMES) == 16
        assert FEATURE_NAMES[0] == "size"
        assert FEATURE_NAMES[-1] == "weighted_age"
