"""Dataset assembly, the time-aware transformations, and serialization."""

from __future__ import annotations

import csv
from datetime import timedelta

import pytest

from snoring.dataset import (
    Dataset,
    DatasetRow,
    Provenance,
    assemble,
    drop_nondefective_tail,
    export_csv,
    import_csv,
    ordered_holdout,
    training_views,
    truncate_recent,
)
from snoring.errors import DegenerateDataError, InputError
from snoring.features import FeatureVector
from snoring.history import Release
from snoring.labeling import DEFECTIVE, NON_DEFECTIVE, end_of_project
from snoring.synth import SynthConfig, generate

from conftest import utc


def blank_features(**overrides):
    values = dict(
        size=10, loc_touched=0, nr=0, nfix=0, nauth=0, loc_added=0,
        max_loc_added=0, avg_loc_added=0.0, churn=0, max_churn=0,
        avg_churn=0.0, change_set_size=0, max_change_set=0,
        avg_change_set=0.0, age=1.0, weighted_age=0.0,
    )
    values.update(overrides)
    return FeatureVector(**values)


def toy_dataset(n_releases=6, classes=("a.java", "b.java"), defective=()):
    releases = tuple(
        Release(f"v{i}", i, utc(2021, 1, 1) + timedelta(days=30 * i))
        for i in range(n_releases)
    )
    rows = tuple(
        DatasetRow(
            class_path=path,
            release_ordinal=i,
            features=blank_features(size=10 + i),
            label=DEFECTIVE if (path, i) in defective else NON_DEFECTIVE,
        )
        for i in range(n_releases)
        for path in sorted(classes)
    )
    return Dataset(rows=rows, releases=releases, provenance=Provenance("test"))


class TestAssemble:
    def test_scenario_rows(self, scenario):
        history, tickets = scenario
        data = assemble(history, tickets, end_of_project(history))
        assert len(data.rows) == 6  # 3 classes x 2 releases
        labels = {(r.class_path, r.release_ordinal): r.label for r in data.rows}
        assert labels[("src/C1.java", 0)] == NON_DEFECTIVE
        assert labels[("src/C1.java", 1)] == DEFECTIVE
        assert labels[("src/C2.java", 0)] == DEFECTIVE

    def test_rows_sorted(self, scenario):
        history, tickets = scenario
        data = assemble(history, tickets, end_of_project(history))
        keys = [(r.release_ordinal, r.class_path) for r in data.rows]
        assert keys == sorted(keys)

    def test_features_do_not_depend_on_observation(self, scenario):
        history, tickets = scenario
        from snoring.labeling import ObservationPoint

        early = assemble(history, tickets, ObservationPoint(history.releases[1].date))
        late = assemble(history, tickets, end_of_project(history))
        assert [r.features for r in early.rows] == [r.features for r in late.rows]
        assert [r.class_path for r in early.rows] == [r.class_path for r in late.rows]


class TestTruncate:
    def test_half_of_22_keeps_11(self):
        data = toy_dataset(n_releases=22)
        kept = truncate_recent(data)
        assert len(kept.releases) == 11
        assert {r.release_ordinal for r in kept.rows} == set(range(11))

    def test_four_keeps_two(self):
        assert len(truncate_recent(toy_dataset(n_releases=4)).releases) == 2

    def test_fraction_zero_is_identity(self):
        data = toy_dataset(n_releases=6)
        assert truncate_recent(data, 0) is data

    def test_too_few_releases(self):
        with pytest.raises(DegenerateDataError, match="at least 4"):
            truncate_recent(toy_dataset(n_releases=3))


class TestHoldout:
    def test_eleven_splits_eight_three(self):
        data = toy_dataset(n_releases=11)
        train, test = ordered_holdout(data)
        assert len(train) == 8
        assert len(test) == 3
        assert [r.ordinal for r in train] == list(range(8))

    def test_three_splits_two_one(self):
        train, test = ordered_holdout(toy_dataset(n_releases=3))
        assert (len(train), len(test)) == (2, 1)

    def test_partition_is_exact(self):
        data = toy_dataset(n_releases=9)
        train, test = ordered_holdout(data)
        train_rows = data.restrict(train, "tr").rows
        test_rows = data.restrict(test, "te").rows
        assert len(train_rows) + len(test_rows) == len(data.rows)
        assert not {r.release_ordinal for r in train_rows} & {
            r.release_ordinal for r in test_rows
        }

    def test_too_few_releases(self):
        with pytest.raises(DegenerateDataError):
            ordered_holdout(toy_dataset(n_releases=2))


class TestTrainingViews:
    def test_dormant_defect_flips_only_in_snoring_view(self):
        history, tickets, _truth = generate(SynthConfig(releases=8, classes=10, seed=3))
        data = assemble(history, tickets, end_of_project(history))
        train, _test = ordered_holdout(data)
        clean, snoring = training_views(history, tickets, train, base=data)
        clean_labels = {
            (r.class_path, r.release_ordinal): r.label for r in clean.rows
        }
        snoring_labels = {
            (r.class_path, r.release_ordinal): r.label for r in snoring.rows
        }
        flips = [
            key
            for key in clean_labels
            if clean_labels[key] != snoring_labels[key]
        ]
        assert flips, "expected at least one dormant defect across the boundary"
        for key in flips:
            assert clean_labels[key] == DEFECTIVE
            assert snoring_labels[key] == NON_DEFECTIVE

    def test_feature_columns_shared_object_for_object(self, scenario):
        history, tickets = scenario
        data = assemble(history, tickets, end_of_project(history))
        clean, snoring = training_views(
            history, tickets, history.releases, base=data
        )
        for a, b in zip(clean.rows, snoring.rows):
            assert a.features is b.features

    def test_flip_count_matches_assessment(self, scenario):
        history, tickets = scenario
        from snoring.labeling import ObservationPoint, assess_cells, label_at

        data = assemble(history, tickets, end_of_project(history))
        clean, snoring = training_views(
            history, tickets, history.releases, base=data
        )
        flips = sum(
            1 for a, b in zip(clean.rows, snoring.rows) if a.label != b.label
        )
        observed = label_at(
            history, tickets, ObservationPoint(history.releases[-1].date)
        )
        ground = label_at(history, tickets, end_of_project(history))
        fn_count = sum(
            1 for a in assess_cells(observed, ground) if a.outcome == "FN"
        )
        assert flips == fn_count


class TestDropTail:
    def test_zero_is_identity(self):
        data = toy_dataset()
        assert drop_nondefective_tail(data, 0) is data

    def test_only_tail_non_defective_removed(self):
        defective = {("a.java", 5), ("b.java", 2)}
        data = toy_dataset(defective=defective)
        dropped = drop_nondefective_tail(data, 1)
        tail_rows = [r for r in dropped.rows if r.release_ordinal == 5]
        assert [r.label for r in tail_rows] == [DEFECTIVE]
        assert len(dropped.rows) == len(data.rows) - 1

    def test_k_equal_to_release_count_keeps_only_defective(self):
        defective = {("a.java", 0), ("b.java", 3)}
        data = toy_dataset(defective=defective)
        dropped = drop_nondefective_tail(data, len(data.releases))
        assert all(r.label == DEFECTIVE for r in dropped.rows)
        assert len(dropped.rows) == 2

    def test_subset_and_defective_preserved(self):
        defective = {("a.java", 4), ("a.java", 5)}
        data = toy_dataset(defective=defective)
        dropped = drop_nondefective_tail(data, 3)
        assert set(dropped.rows) <= set(data.rows)
        kept_defective = {
            (r.class_path, r.release_ordinal)
            for r in dropped.rows
            if r.label == DEFECTIVE
        }
        assert kept_defective == defective

    def test_k_too_large(self):
        with pytest.raises(InputError, match="k must lie"):
            drop_nondefective_tail(toy_dataset(), 7)


class TestCsvRoundTrip:
    def test_round_trip_structural_equality(self, tmp_path, scenario):
        history, tickets = scenario
        data = assemble(history, tickets, end_of_project(history))
        path = tmp_path / "dataset.csv"
        export_csv(data, path)
        assert import_csv(path) == data

    def test_synthetic_round_trip(self, tmp_path):
        history, tickets, _truth = generate(SynthConfig(releases=8, classes=8, seed=1))
        data = assemble(history, tickets, end_of_project(history))
        path = tmp_path / "dataset.csv"
        export_csv(data, path)
        assert import_csv(path) == data

    def test_empty_dataset_round_trip(self, tmp_path):
        data = Dataset(rows=(), releases=(), provenance=Provenance("empty"))
        path = tmp_path / "dataset.csv"
        export_csv(data, path)
        again = import_csv(path)
        assert again.rows == ()
        assert again == data

    def test_reordered_columns_rejected(self, tmp_path):
        data = toy_dataset(n_releases=4)
        path = tmp_path / "dataset.csv"
        export_csv(data, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        header = lines[0].split(",")
        header[2], header[3] = header[3], header[2]
        path.write_text("\n".join([",".join(header)] + lines[1:]), encoding="utf-8")
        with pytest.raises(InputError, match="column 2"):
            import_csv(path)

    def test_header_has_fixed_schema(self, tmp_path):
        data = toy_dataset(n_releases=4)
        path = tmp_path / "dataset.csv"
        export_csv(data, path)
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh))
        assert header[:2] == ["class_path", "release_ordinal"]
        assert header[-1] == "label"
        assert len(header) == 19

    def test_meta_sidecar_written(self, tmp_path):
        data = toy_dataset(n_releases=4)
        export_csv(data, tmp_path / "dataset.csv")
        assert (tmp_path / "dataset.meta.json").exists()
