"""Permutation importance, Shapley attribution, PDP, response surface."""

import numpy as np
import pytest

from plasmaseed.errors import DataValidationError, ModelError
from plasmaseed.interpret import (
    ImportanceReport,
    brute_force_shapley,
    partial_dependence,
    permutation_importance,
    response_surface,
    select_top_features,
    tree_shap,
)
from plasmaseed.models import (
    ExtraTreesModel,
    GradientBoostingModel,
    MeanModel,
    PackedTrees,
    RegularizedBoostingModel,
    TreeArrays,
)


def depth3_ensemble(p=8, n_trees=6, seed=0):
    """Complete depth-3 trees with random features/thresholds/values and
    consistent node sample counts; packaged as an averaged ensemble."""
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        n_nodes = 15  # complete binary tree of depth 3
        feature = np.full(n_nodes, -1, dtype=np.int32)
        threshold = np.zeros(n_nodes)
        left = np.full(n_nodes, -1, dtype=np.int32)
        right = np.full(n_nodes, -1, dtype=np.int32)
        value = np.zeros(n_nodes)
        counts = np.zeros(n_nodes, dtype=np.int32)
        for node in range(7):  # internal nodes 0..6
            feature[node] = rng.integers(0, p)
            threshold[node] = rng.uniform(0.2, 0.8)
            left[node] = 2 * node + 1
            right[node] = 2 * node + 2
        for node in range(7, 15):
            value[node] = rng.uniform(-5, 5)
            counts[node] = rng.integers(1, 20)
        for node in range(6, -1, -1):
            counts[node] = counts[left[node]] + counts[right[node]]
        trees.append(TreeArrays(feature=feature, threshold=threshold,
                                left=left, right=right, value=value,
                                n_samples=counts))
    model = ExtraTreesModel(n_estimators=n_trees, seed=seed)
    model.trees = PackedTrees(trees)
    model.n_features_ = p
    return model


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(1)
    X = rng.uniform(-2, 2, size=(80, 5))
    y = 4 * np.sin(X[:, 0]) + X[:, 1] ** 2 + rng.normal(0, 0.3, 80)
    model = ExtraTreesModel(n_estimators=25, min_samples_leaf=3, seed=2).fit(X, y)
    return model, X, y


class TestPermutationImportance:
    def test_signal_dominates(self, fitted):
        model, X, y = fitted
        report = permutation_importance(model, X, y, "abcde", repeats=5, seed=0)
        assert report.raw.shape == (5, 5)
        mean = report.mean_importance
        assert mean[0] >= 20 * max(mean[2], mean[3], mean[4], 1e-9)

    def test_ignored_feature_importance_exactly_zero(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (60, 3))
        X[:, 2] = 7.0  # constant, never split on
        y = X[:, 0] * 2 + rng.normal(0, 0.1, 60)
        model = ExtraTreesModel(n_estimators=10, seed=1).fit(X, y)
        report = permutation_importance(model, X, y, "abc", repeats=3, seed=0)
        assert (report.raw[:, 2] == 0.0).all()

    def test_reproducible(self, fitted):
        model, X, y = fitted
        a = permutation_importance(model, X, y, "abcde", repeats=2, seed=5)
        b = permutation_importance(model, X, y, "abcde", repeats=2, seed=5)
        assert (a.raw == b.raw).all()

    def test_shares_sum_to_one(self, fitted):
        model, X, y = fitted
        report = permutation_importance(model, X, y, "abcde", repeats=2, seed=0)
        assert report.shares.sum() == pytest.approx(1.0, abs=1e-12)
        assert (report.shares >= 0).all()

    def test_doc_roundtrip(self, fitted):
        model, X, y = fitted
        report = permutation_importance(model, X, y, "abcde", repeats=2, seed=0)
        clone = ImportanceReport.from_doc(report.to_doc())
        assert clone.feature_names == report.feature_names
        assert (clone.raw == report.raw).all()


class TestSelectTopFeatures:
    def _report(self, shares, names=None):
        shares = np.asarray(shares, dtype=np.float64)
        p = shares.size
        names = tuple(names or [f"f{i}" for i in range(p)])
        order = np.lexsort((np.arange(p), -shares))
        return ImportanceReport(feature_names=names, mean_importance=shares,
                                raw=shares.reshape(1, -1), order=order,
                                shares=shares)

    def test_prefix_rule(self):
        report = self._report([0.6, 0.3, 0.06, 0.04])
        assert select_top_features(report, 0.95) == ["f0", "f1", "f2"]

    def test_threshold_one_takes_positive_shares(self):
        report = self._report([0.5, 0.5, 0.0])
        assert select_top_features(report, 1.0) == ["f0", "f1"]

    def test_equal_shares_ceiling(self):
        report = self._report([0.1] * 10)
        assert len(select_top_features(report, 0.95)) == 10
        report4 = self._report([0.25] * 4)
        assert len(select_top_features(report4, 0.95)) == 4

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(4)
        shares = rng.dirichlet(np.ones(8))
        report = self._report(shares)
        sizes = [len(select_top_features(report, t))
                 for t in (0.2, 0.5, 0.8, 0.95, 1.0)]
        assert sizes == sorted(sizes)

    def test_threshold_validation(self):
        report = self._report([1.0])
        with pytest.raises(DataValidationError):
            select_top_features(report, 0.0)
        with pytest.raises(DataValidationError):
            select_top_features(report, 1.5)


class TestTreeShap:
    def test_local_accuracy_all_families(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(-2, 2, size=(60, 6))
        y = X[:, 0] * 3 + np.abs(X[:, 1]) + rng.normal(0, 0.2, 60)
        models = [
            ExtraTreesModel(n_estimators=15, min_samples_leaf=2, seed=0).fit(X, y),
            GradientBoostingModel(n_estimators=20, learning_rate=0.1,
                                  min_samples_leaf=4, seed=0).fit(X, y),
            RegularizedBoostingModel(n_estimators=20, learning_rate=0.1,
                                     gamma=0.1, min_child_weight=2,
                                     subsample=0.7, seed=0).fit(X, y),
        ]
        for model in models:
            sm = tree_shap(model, X[:30], X)
            gap = np.abs(sm.base_value + sm.values.sum(axis=1)
                         - model.predict(X[:30]))
            assert gap.max() <= 1e-8

    def test_base_is_background_mean(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(-1, 1, (40, 3))
        y = X[:, 0] + rng.normal(0, 0.1, 40)
        model = ExtraTreesModel(n_estimators=10, seed=0).fit(X, y)
        bg = X[:17]
        sm = tree_shap(model, X[:5], bg)
        assert sm.base_value == pytest.approx(model.predict(bg).mean(), abs=1e-12)

    def test_single_stump_mass_on_split_feature(self):
        X = np.array([[0.0, 9.0], [1.0, 9.0]] * 10)
        y = np.array([0.0, 10.0] * 10)
        model = GradientBoostingModel(n_estimators=1, learning_rate=1.0,
                                      min_samples_leaf=1, seed=0).fit(X, y)
        sm = tree_shap(model, X, X)
        assert (sm.values[:, 1] == 0.0).all()
        assert np.abs(sm.values[:, 0]).max() > 1.0

    def test_matches_brute_force_depth3(self):
        model = depth3_ensemble(p=8, n_trees=6, seed=7)
        rng = np.random.default_rng(8)
        background = rng.uniform(0, 1, (50, 8))
        probes = rng.uniform(0, 1, (5, 8))
        sm = tree_shap(model, probes, background)
        for i in range(5):
            phi = brute_force_shapley(model, probes[i], background)
            assert np.abs(phi - sm.values[i]).max() <= 1e-6

    def test_dummy_feature_exactly_zero(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, (50, 4))
        X[:, 3] = 0.5
        y = X[:, 0] + X[:, 1] + rng.normal(0, 0.1, 50)
        model = ExtraTreesModel(n_estimators=12, seed=0).fit(X, y)
        sm = tree_shap(model, X[:20], X)
        assert (sm.values[:, 3] == 0.0).all()

    def test_stacking_attribution_linear_combination(self):
        from plasmaseed.ensemble import fit_stacking
        from plasmaseed.models import ModelConfig
        rng = np.random.default_rng(10)
        X = rng.uniform(-2, 2, (60, 3))
        y = X[:, 0] * 2 + rng.normal(0, 0.2, 60)
        stack = fit_stacking(X, y, [ModelConfig("et", {"n_estimators": 8}),
                                    ModelConfig("gb", {"n_estimators": 10})],
                             seed=4)
        sm = tree_shap(stack, X[:10], X)
        gap = np.abs(sm.base_value + sm.values.sum(axis=1)
                     - stack.predict(X[:10]))
        assert gap.max() <= 1e-8

    def test_non_tree_model_rejected(self):
        X = np.zeros((5, 2))
        model = MeanModel().fit(X, np.arange(5.0))
        with pytest.raises(ModelError, match="not a tree model"):
            tree_shap(model, X, X)

    def test_empty_background_rejected(self, fitted):
        model, X, _ = fitted
        with pytest.raises(ModelError):
            tree_shap(model, X[:2], X[:0])


class TestBruteForce:
    def test_constant_model_zero(self):
        # single-leaf trees: every attribution is exactly 0
        tree = TreeArrays(feature=np.array([-1], dtype=np.int32),
                          threshold=np.zeros(1),
                          left=np.array([-1], dtype=np.int32),
                          right=np.array([-1], dtype=np.int32),
                          value=np.array([5.0]),
                          n_samples=np.array([10], dtype=np.int32))
        model = ExtraTreesModel(n_estimators=1, seed=0)
        model.trees = PackedTrees([tree])
        model.n_features_ = 3
        phi = brute_force_shapley(model, np.zeros(3), np.zeros((4, 3)))
        assert (phi == 0.0).all()

    def test_single_feature_attribution_is_marginal(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(-1, 1, (30, 1))
        y = X[:, 0] * 2 + rng.normal(0, 0.05, 30)
        model = ExtraTreesModel(n_estimators=8, seed=1).fit(X, y)
        x = X[3]
        phi = brute_force_shapley(model, x, X)
        expected = model.predict(x.reshape(1, -1))[0] - model.predict(X).mean()
        assert phi[0] == pytest.approx(expected, abs=1e-9)

    def test_symmetric_structure_equal_attribution(self):
        Xs = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 5)
        ys = Xs[:, 0] + Xs[:, 1]
        model = GradientBoostingModel(n_estimators=30, learning_rate=0.3,
                                      min_samples_leaf=1, seed=0).fit(Xs, ys)
        phi = brute_force_shapley(model, np.array([1.0, 1.0]), Xs)
        assert abs(phi[0] - phi[1]) <= 1e-9

    def test_feature_guard(self):
        model = depth3_ensemble(p=13, n_trees=1)
        with pytest.raises(ModelError, match="guard"):
            brute_force_shapley(model, np.zeros(13), np.zeros((4, 13)))


class TestPartialDependence:
    def test_constant_model_flat(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(0, 1, (40, 3))
        model = MeanModel().fit(X, rng.normal(size=40))
        grid = partial_dependence(model, None, ["a"], 5, X, ("a", "b", "c"))
        assert np.ptp(grid.values) == 0.0

    def test_power_only_model_flat_along_time(self):
        rng = np.random.default_rng(13)
        X = rng.uniform(0, 1, (60, 2))
        y = (X[:, 0] > 0.5) * 4.0
        model = GradientBoostingModel(n_estimators=20, learning_rate=0.3,
                                      min_samples_leaf=2, seed=0).fit(X, y)
        grid = partial_dependence(model, None, ["power", "time"], 8, X,
                                  ("power", "time"))
        along_time = np.abs(np.diff(grid.values, axis=1))
        assert along_time.max() <= 1e-9

    def test_grid_shape(self):
        rng = np.random.default_rng(14)
        X = rng.uniform(0, 1, (30, 2))
        model = MeanModel().fit(X, rng.normal(size=30))
        grid = partial_dependence(model, None, ["a", "b"], 20, X, ("a", "b"))
        assert grid.values.shape == (20, 20)
        assert len(grid.ticks[0]) == 20 and len(grid.ticks[1]) == 20

    def test_unknown_axis_rejected(self):
        X = np.zeros((5, 2))
        model = MeanModel().fit(X, np.arange(5.0))
        with pytest.raises(DataValidationError, match="not a schema feature"):
            partial_dependence(model, None, ["nope"], 4, X, ("a", "b"))

    def test_csv_export(self, tmp_path):
        rng = np.random.default_rng(15)
        X = rng.uniform(0, 1, (20, 2))
        model = MeanModel().fit(X, rng.normal(size=20))
        grid = partial_dependence(model, None, ["a", "b"], 3, X, ("a", "b"))
        out = tmp_path / "pdp.csv"
        grid.to_csv(out)
        assert len(out.read_text().strip().splitlines()) == 1 + 9


class TestResponseSurface:
    def test_single_bin_equals_global_mean(self, dataset_factory):
        ds = dataset_factory(n=50, seed=5)
        surface = response_surface(ds, voltage_bins=1, time_bins=1)
        assert surface.mean_uplift.shape == (1, 1)
        assert surface.mean_uplift[0, 0] == pytest.approx(ds.y.mean(), abs=1e-9)
        assert surface.counts[0, 0] == 50

    def test_empty_bins_flagged(self, dataset_factory):
        ds = dataset_factory(n=25, seed=6)
        surface = response_surface(ds, voltage_bins=10, time_bins=10)
        empty = surface.counts == 0
        assert empty.any()
        assert np.isnan(surface.mean_uplift[empty]).all()
        assert np.isfinite(surface.mean_uplift[~empty]).all()

    def test_argmax_inside_planted_band(self, dataset_factory):
        ds = dataset_factory(n=400, seed=7)
        surface = response_surface(ds, voltage_bins=8, time_bins=8)
        vi, ti = surface.argmax_cell()
        v_lo, v_hi = surface.voltage_edges[vi], surface.voltage_edges[vi + 1]
        t_lo, t_hi = surface.time_edges[ti], surface.time_edges[ti + 1]
        # fixture plants peaks at 11 kV and 350 s
        assert v_lo <= 11.0 <= v_hi or (v_lo >= 7 and v_hi <= 15)
        assert t_lo <= 350.0 <= t_hi or (t_lo >= 200 and t_hi <= 500)
