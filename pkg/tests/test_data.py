"""Ingestion, split, standardization, and metric tests, including the
hand-enumerated ranking cases."""

import numpy as np
import pytest

from sian.data import (
    CsvSchema,
    Dataset,
    DroppedFeatureWarning,
    SplitPlan,
    Standardizer,
    auprc,
    auroc,
    fold_summary,
    load_csv,
    metrics,
    standardize,
)
from sian.errors import (
    ConfigError,
    DataError,
    ShapeMismatchError,
    UndefinedMetricError,
)
from sian.tensor import Rng


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestDataset:
    def test_shape_checks(self):
        with pytest.raises(ShapeMismatchError):
            Dataset(("a",), np.zeros((3, 1)), np.zeros(2), "regression")
        with pytest.raises(ShapeMismatchError):
            Dataset(("a", "b"), np.zeros((3, 1)), np.zeros(3), "regression")

    def test_rejects_non_finite(self):
        x = np.array([[1.0], [np.nan]])
        with pytest.raises(DataError):
            Dataset(("a",), x, np.zeros(2), "regression")

    def test_classification_labels_validated(self):
        x = np.zeros((2, 1))
        with pytest.raises(DataError):
            Dataset(("a",), x, np.array([0.0, 2.0]), "classification")

    def test_unknown_task(self):
        with pytest.raises(ConfigError):
            Dataset(("a",), np.zeros((1, 1)), np.zeros(1), "ranking")


class TestLoadCsv:
    def test_small_numeric_file(self, tmp_path):
        path = write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n")
        ds = load_csv(path, CsvSchema(label="y"))
        assert (ds.n, ds.d) == (2, 2)
        assert ds.feature_names == ("a", "b")
        assert np.array_equal(ds.x, [[1.0, 2.0], [4.0, 5.0]])
        assert np.array_equal(ds.y, [3.0, 6.0])

    def test_one_hot_expansion(self, tmp_path):
        path = write(
            tmp_path,
            "color,a,y\nred,1,0\nblue,2,1\ngreen,3,0\nred,4,1\n",
        )
        ds = load_csv(path, CsvSchema(label="y", categorical=("color",)))
        # numeric columns first, then indicator levels in sorted order
        assert ds.feature_names == ("a", "color=blue", "color=green", "color=red")
        assert ds.d == 4
        assert np.array_equal(ds.x[:, 1:], [[0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, 1]])

    def test_missing_label_column(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(ConfigError):
            load_csv(path, CsvSchema(label="y"))

    def test_missing_categorical_column(self, tmp_path):
        path = write(tmp_path, "a,y\n1,2\n")
        with pytest.raises(ConfigError):
            load_csv(path, CsvSchema(label="y", categorical=("level",)))

    def test_unparseable_cell_names_line(self, tmp_path):
        path = write(tmp_path, "a,y\n1,2\noops,3\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(path, CsvSchema(label="y"))

    def test_rows_with_missing_cells_dropped(self, tmp_path):
        path = write(tmp_path, "a,b,y\n1,2,3\n4,,6\n7,8,9\n")
        ds = load_csv(path, CsvSchema(label="y"))
        assert ds.n == 2
        assert np.array_equal(ds.y, [3.0, 9.0])

    def test_all_rows_missing(self, tmp_path):
        path = write(tmp_path, "a,y\n,1\n,2\n")
        with pytest.raises(DataError):
            load_csv(path, CsvSchema(label="y"))

    def test_ragged_row_rejected(self, tmp_path):
        path = write(tmp_path, "a,b,y\n1,2,3\n4,5\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(path, CsvSchema(label="y"))

    def test_classification_labels_checked(self, tmp_path):
        path = write(tmp_path, "a,y\n1,0\n2,3\n")
        with pytest.raises(DataError):
            load_csv(path, CsvSchema(label="y", task="classification"))

    def test_trailing_blank_line_ignored(self, tmp_path):
        path = write(tmp_path, "a,y\n1,2\n\n")
        ds = load_csv(path, CsvSchema(label="y"))
        assert ds.n == 1


class TestSplitPlan:
    def test_partition(self):
        plan = SplitPlan(seed=3)
        split = plan.assign(100)
        assert len(split.test) == 20
        all_idx = np.concatenate([split.test, *split.folds])
        assert sorted(all_idx) == list(range(100))
        assert sum(len(f) for f in split.folds) == 80

    def test_fold_views_are_disjoint(self):
        split = SplitPlan(seed=1).assign(53)
        for i in range(5):
            train, val = split.fold(i)
            assert set(train) & set(val) == set()
            assert sorted(np.concatenate([train, val])) == sorted(
                np.concatenate(split.folds)
            )

    def test_same_seed_same_folds(self):
        a = SplitPlan(seed=9).assign(40)
        b = SplitPlan(seed=9).assign(40)
        assert np.array_equal(a.test, b.test)
        for fa, fb in zip(a.folds, b.folds):
            assert np.array_equal(fa, fb)

    def test_different_seed_differs(self):
        a = SplitPlan(seed=0).assign(40)
        b = SplitPlan(seed=1).assign(40)
        assert not np.array_equal(a.test, b.test)

    def test_validation(self):
        with pytest.raises(ConfigError):
            SplitPlan(test_fraction=1.0)
        with pytest.raises(ConfigError):
            SplitPlan(n_folds=0)
        with pytest.raises(ConfigError):
            SplitPlan(n_folds=10).assign(11)  # 8 pool rows, 10 folds
        with pytest.raises(DataError):
            SplitPlan().assign(0)


class TestStandardize:
    def make(self, rng, n=200, d=4):
        x = rng.uniform(-3, 5, (n, d)) * np.array([1.0, 10.0, 0.1, 100.0])
        y = rng.uniform(0, 50, (n,))
        names = tuple(f"f{i}" for i in range(d))
        return Dataset(names, x, y, "regression")

    def test_train_moments(self):
        rng = Rng(0)
        ds = self.make(rng)
        train = np.arange(120)
        out, _ = standardize(ds, train)
        assert np.max(np.abs(out.x[train].mean(axis=0))) < 1e-10
        assert np.max(np.abs(out.x[train].var(axis=0) - 1.0)) < 1e-10
        assert abs(out.y[train].mean()) < 1e-10
        assert abs(out.y[train].var() - 1.0) < 1e-10

    def test_val_rows_use_train_stats(self):
        rng = Rng(1)
        ds = self.make(rng)
        train = np.arange(100)
        out, stdzr = standardize(ds, train)
        manual = (ds.x[150] - ds.x[train].mean(axis=0)) / ds.x[train].std(axis=0)
        assert np.allclose(out.x[150], manual, atol=1e-14)

    def test_idempotent_within_tolerance(self):
        rng = Rng(2)
        ds = self.make(rng)
        train = np.arange(150)
        once, _ = standardize(ds, train)
        twice, _ = standardize(once, train)
        assert np.max(np.abs(twice.x - once.x)) < 1e-10

    def test_constant_feature_dropped(self):
        x = np.column_stack([np.arange(10.0), np.full(10, 3.0)])
        ds = Dataset(("live", "dead"), x, np.arange(10.0), "regression")
        with pytest.warns(DroppedFeatureWarning, match="dead"):
            out, stdzr = standardize(ds, np.arange(10))
        assert out.d == 1
        assert out.feature_names == ("live",)
        assert stdzr.kept == (0,)

    def test_round_trip_targets(self):
        rng = Rng(3)
        ds = self.make(rng)
        out, stdzr = standardize(ds, np.arange(100))
        assert np.max(np.abs(stdzr.inverse_y(out.y) - ds.y)) < 1e-12

    def test_classification_targets_untouched(self):
        rng = Rng(4)
        x = rng.uniform(0, 1, (20, 2))
        y = (rng.floats(20) > 0.5).astype(float)
        ds = Dataset(("a", "b"), x, y, "classification")
        out, stdzr = standardize(ds, np.arange(20))
        assert np.array_equal(out.y, y)
        assert stdzr.target_mean is None

    def test_constant_target_rejected(self):
        x = np.arange(10.0).reshape(-1, 1)
        ds = Dataset(("a",), x, np.full(10, 2.0), "regression")
        with pytest.raises(DataError):
            standardize(ds, np.arange(10))

    def test_json_round_trip(self):
        rng = Rng(5)
        ds = self.make(rng)
        _, stdzr = standardize(ds, np.arange(60))
        back = Standardizer.from_json(stdzr.to_json())
        probe = rng.uniform(-2, 2, (7, ds.d))
        assert np.array_equal(back.transform_x(probe), stdzr.transform_x(probe))
        assert back.target_mean == stdzr.target_mean


class TestRankMetrics:
    def test_hand_enumerated_auroc(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [0, 0, 1, 1]
        assert auroc(scores, labels) == 0.75

    def test_perfect_and_reversed(self):
        labels = [0, 0, 1, 1]
        assert auroc([0.1, 0.2, 0.8, 0.9], labels) == 1.0
        assert auroc([0.9, 0.8, 0.2, 0.1], labels) == 0.0
        assert auprc([0.1, 0.2, 0.8, 0.9], labels) == 1.0

    def test_all_tied_scores(self):
        assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_monotone_invariance(self):
        rng = Rng(6)
        scores = rng.uniform(-1, 1, (40,))
        labels = (rng.floats(40) > 0.6).astype(float)
        base = auroc(scores, labels)
        assert auroc(3.0 * scores + 2.0, labels) == base
        assert auroc(np.exp(scores), labels) == base

    def test_complement_identity(self):
        rng = Rng(7)
        scores = rng.uniform(0, 1, (31,))  # distinct with probability 1
        labels = (rng.floats(31) > 0.5).astype(float)
        assert auroc(scores, labels) + auroc(-scores, labels) == pytest.approx(1.0)

    def test_hand_enumerated_auprc(self):
        scores = [0.1, 0.4, 0.35, 0.8]
        labels = [0, 0, 1, 1]
        assert auprc(scores, labels) == pytest.approx(5.0 / 6.0)

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auroc([0.1, 0.2], [1, 1])
        with pytest.raises(UndefinedMetricError):
            auprc([0.1, 0.2], [0, 0])


class TestMetricsDispatch:
    def test_regression(self):
        out = metrics([1.0, 2.0], [0.0, 0.0], "regression")
        assert out == {"mse": 2.5}

    def test_classification(self):
        out = metrics([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], "classification")
        assert set(out) == {"auroc", "auprc"}
        assert out["auroc"] == 0.75

    def test_shape_guard(self):
        with pytest.raises(ShapeMismatchError):
            metrics([1.0], [1.0, 2.0], "regression")
        with pytest.raises(ShapeMismatchError):
            metrics([], [], "regression")

    def test_fold_summary(self):
        folds = [{"mse": 1.0}, {"mse": 3.0}]
        out = fold_summary(folds)
        assert out["mse"]["mean"] == 2.0
        assert out["mse"]["std"] == 1.0
        assert out["mse"]["folds"] == [1.0, 3.0]
        assert fold_summary([]) == {}
