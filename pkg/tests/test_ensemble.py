"""Ridge meta-learner and out-of-fold stacking."""

import numpy as np
import pytest

from plasmaseed.ensemble import (
    DEFAULT_ALPHA_GRID,
    HYBRID_STACKS,
    RidgeModel,
    StackingModel,
    audit_oof,
    fit_ridge,
    fit_stacking,
    predict_stacking,
    select_alpha,
)
from plasmaseed.errors import ModelError
from plasmaseed.models import MODEL_FAMILIES, MeanModel, ModelConfig


class TestRidge:
    def test_hand_oracle_single_feature(self):
        # centered: Zc=[-0.5, 0.5], yc likewise; w = 0.5/(0.5+1) = 1/3,
        # intercept = 0.5 - 0.5/3 = 1/3, prediction at z=1 is 2/3
        model = fit_ridge(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), alpha=1.0)
        assert model.weights[0] == pytest.approx(1.0 / 3.0, abs=1e-10)
        assert model.intercept == pytest.approx(1.0 / 3.0, abs=1e-10)
        assert model.predict([[1.0]])[0] == pytest.approx(2.0 / 3.0, abs=1e-10)

    def test_alpha_zero_matches_ols(self):
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(60, 3))
        y = Z @ np.array([2.0, -1.0, 0.5]) + 0.3 + rng.normal(0, 0.1, 60)
        model = fit_ridge(Z, y, alpha=0.0)
        resid = y - model.predict(Z)
        # OLS residuals are orthogonal to every column and to a constant
        assert abs(resid.mean()) < 1e-10
        assert np.abs(Z.T @ resid).max() < 1e-8

    def test_huge_alpha_shrinks_to_mean(self):
        rng = np.random.default_rng(1)
        Z = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        model = fit_ridge(Z, y, alpha=1e12)
        assert np.abs(model.weights).max() < 1e-6
        assert np.allclose(model.predict(Z), y.mean(), atol=1e-6)

    def test_normal_equations_residual(self):
        rng = np.random.default_rng(2)
        Z = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        for alpha in (0.0, 0.1, 10.0):
            model = fit_ridge(Z, y, alpha)
            Zc = Z - Z.mean(axis=0)
            yc = y - y.mean()
            A = Zc.T @ Zc + alpha * np.eye(4)
            b = Zc.T @ yc
            gap = np.linalg.norm(A @ model.weights - b)
            assert gap <= 1e-8 * max(1.0, np.linalg.norm(b))

    def test_singular_alpha_zero_advises_regularization(self):
        Z = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # duplicated direction
        with pytest.raises(ModelError, match="alpha > 0"):
            fit_ridge(Z, np.array([1.0, 2.0, 3.0]), alpha=0.0)
        fit_ridge(Z, np.array([1.0, 2.0, 3.0]), alpha=0.1)  # regularized works

    def test_input_validation(self):
        with pytest.raises(ModelError):
            fit_ridge(np.zeros((1, 2)), np.zeros(1), 1.0)
        with pytest.raises(ModelError):
            fit_ridge(np.zeros((4, 2)), np.zeros(4), -1.0)


class TestSelectAlpha:
    def test_single_value_grid(self):
        rng = np.random.default_rng(3)
        Z = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        assert select_alpha(Z, y, grid=(10.0,), seed=0) == 10.0

    def test_noiseless_linear_prefers_smallest(self):
        rng = np.random.default_rng(4)
        Z = rng.normal(size=(80, 2))
        y = Z @ np.array([1.5, -2.0]) + 4.0
        assert select_alpha(Z, y, DEFAULT_ALPHA_GRID, seed=0) == 0.1

    def test_pure_noise_prefers_larger(self):
        wins = 0
        for trial in range(50):
            rng = np.random.default_rng(100 + trial)
            Z = rng.normal(size=(40, 5))
            y = rng.normal(size=40)
            if select_alpha(Z, y, DEFAULT_ALPHA_GRID, seed=trial) > 0.1:
                wins += 1
        assert wins >= 40

    def test_tie_breaks_to_smaller(self):
        rng = np.random.default_rng(5)
        Z = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        # duplicated grid value forces an exact tie
        assert select_alpha(Z, y, grid=(7.0, 7.0), seed=0) == 7.0
        a = select_alpha(Z, y, grid=(2.0, 2.0 + 0.0), seed=0)
        assert a == 2.0


@pytest.fixture(scope="module")
def stack_data():
    rng = np.random.default_rng(11)
    X = rng.uniform(-2, 2, size=(90, 4))
    y = np.sin(X[:, 0]) * 3 + X[:, 1] ** 2 + rng.normal(0, 0.2, 90)
    return X, y


class TestStacking:
    def test_constant_base_gives_mean(self, stack_data):
        X, y = stack_data
        model = fit_stacking(X, y, [ModelConfig("mean")], seed=7)
        assert np.allclose(model.predict(X), y.mean(), atol=0.5)
        # the oof column holds fold-wise means, all close to the global mean
        assert np.allclose(model.oof_matrix[:, 0], y.mean(), atol=0.5)

    def test_oracle_base_outweighs_noise_base(self, stack_data):
        X, y = stack_data

        class OracleModel(MeanModel):
            def fit(self, X, y):
                super().fit(X, y)
                return self

            def predict(self, X):
                X = np.asarray(X, dtype=np.float64)
                return np.sin(X[:, 0]) * 3 + X[:, 1] ** 2

        class NoiseModel(MeanModel):
            def predict(self, X):
                X = np.asarray(X, dtype=np.float64)
                # deterministic pseudo-noise uncorrelated with the target
                return np.cos(X[:, 2] * 977.13) * 5.0

        MODEL_FAMILIES["_oracle"] = OracleModel
        MODEL_FAMILIES["_noise"] = NoiseModel
        try:
            model = fit_stacking(
                X, y, [ModelConfig("_oracle"), ModelConfig("_noise")], seed=1)
        finally:
            del MODEL_FAMILIES["_oracle"]
            del MODEL_FAMILIES["_noise"]
        w_oracle, w_noise = np.abs(model.meta.weights)
        assert w_oracle >= 10 * w_noise

    def test_folds_partition_and_audit(self, stack_data):
        X, y = stack_data
        configs = [ModelConfig("et", {"n_estimators": 8}),
                   ModelConfig("xgb", {"n_estimators": 10, "subsample": 0.5})]
        model = fit_stacking(X, y, configs, seed=3)
        sizes = sorted(v.size for v in model.fold_val_rows)
        assert sum(sizes) == y.size and max(sizes) - min(sizes) <= 1
        report = audit_oof(model, X, y)
        assert report == {"partition_ok": True, "disjoint_ok": True,
                          "replay_ok": True, "ok": True}

    def test_oof_entries_finite_and_alpha_from_grid(self, stack_data):
        X, y = stack_data
        model = fit_stacking(X, y, [ModelConfig("gb", {"n_estimators": 15})], seed=5)
        assert np.isfinite(model.oof_matrix).all()
        assert model.chosen_alpha in DEFAULT_ALPHA_GRID

    def test_stack_beats_or_matches_constant(self, stack_data):
        X, y = stack_data
        configs = [ModelConfig("et", {"n_estimators": 30})]
        model = fit_stacking(X, y, configs, seed=9)
        sse_stack = ((model.predict(X) - y) ** 2).sum()
        sse_mean = ((y.mean() - y) ** 2).sum()
        assert sse_stack < sse_mean

    def test_manual_meta_combination(self):
        meta = RidgeModel(weights=np.array([0.5, 0.5]), intercept=0.0, alpha=1.0)
        assert meta.predict([[4.0, 6.0]])[0] == pytest.approx(5.0, abs=1e-12)

    def test_single_base_identity_meta(self, stack_data):
        X, y = stack_data
        base = MeanModel().fit(X, y)
        model = StackingModel(
            base_configs=[ModelConfig("mean")],
            refit_base_models=[base],
            meta=RidgeModel(weights=np.array([1.0]), intercept=0.0, alpha=0.1),
            oof_matrix=np.zeros((y.size, 1)),
            fold_assignment=np.zeros(y.size, dtype=np.int64),
            alpha_grid=DEFAULT_ALPHA_GRID,
            chosen_alpha=0.1,
            seed=0,
        )
        assert (predict_stacking(model, X) == base.predict(X)).all()
        assert np.isfinite(model.predict(X)).all()

    def test_too_few_rows_rejected(self):
        with pytest.raises(ModelError):
            fit_stacking(np.zeros((5, 2)), np.zeros(5), [ModelConfig("mean")], seed=0)

    def test_doc_roundtrip(self, stack_data):
        X, y = stack_data
        configs = [ModelConfig("et", {"n_estimators": 10}),
                   ModelConfig("gb", {"n_estimators": 10})]
        model = fit_stacking(X, y, configs, seed=2)
        clone = StackingModel.from_doc(model.to_doc())
        assert (clone.predict(X) == model.predict(X)).all()
        assert clone.chosen_alpha == model.chosen_alpha

    def test_hybrid_registry(self):
        assert set(HYBRID_STACKS) == {"et+gb", "et+xgb", "gb+xgb", "et+gb+xgb"}
        assert HYBRID_STACKS["et+gb+xgb"] == ("et", "gb", "xgb")
