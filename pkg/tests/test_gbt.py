"""Boosted trees against a brute-force split enumerator, plus the linear SGD
regressor and the 24-hour multi-output wrapper.

Oracle fixtures use dyadic-rational values (multiples of 1/4) so float64
sums are exact and the required exact-match comparison is well-posed.
"""

import numpy as np
import pytest

from efbench.gbt import (GBTConfig, LinearModel, RegressionTree, gbt_fit,
                         gbt_predict, multi_output_fit, presort_columns,
                         sgd_linear_fit)


def oracle_tree(x, g, lam, depth):
    """Recursive brute-force exact greedy: every (feature, boundary value)
    split, gains by direct summation, ties to lowest feature then lowest
    threshold, split only on strictly positive gain."""
    n = len(g)
    total = g.sum()
    leaf = ("leaf", -total / (n + lam))
    if depth == 0 or n < 2:
        return leaf
    best = None
    for f in range(x.shape[1]):
        for thr in np.unique(x[:, f])[:-1]:
            left = x[:, f] <= thr
            gl, hl = g[left].sum(), left.sum()
            gr, hr = total - gl, n - hl
            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - total * total / (n + lam)
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, f, thr, left)
    if best is None:
        return leaf
    _, f, thr, left = best
    return ("split", f, float(thr),
            oracle_tree(x[left], g[left], lam, depth - 1),
            oracle_tree(x[~left], g[~left], lam, depth - 1))


def tree_structure(tree, i=0):
    if tree.feature[i] < 0:
        return ("leaf", float(tree.value[i]))
    return ("split", int(tree.feature[i]), float(tree.threshold[i]),
            tree_structure(tree, tree.left[i]),
            tree_structure(tree, tree.right[i]))


def dyadic_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    n_feat = int(rng.integers(1, 4))
    x = rng.choice(np.arange(0, 8) / 4, size=(n, n_feat))
    y = rng.choice(np.arange(-8, 9) / 4, size=n)
    return x, y


class TestOracleEquivalence:
    @pytest.mark.parametrize("lam", [0.0, 1.2])
    def test_single_split_and_leaves_match_bruteforce(self, lam):
        checked = 0
        for seed in range(220):
            x, y = dyadic_case(seed)
            cfg = GBTConfig(n_rounds=1, max_depth=1, learning_rate=1.0, subsample=1.0,
                            colsample_bytree=1.0, reg_lambda=lam, base_score=0.0)
            model = gbt_fit(x, y, cfg)
            assert tree_structure(model.trees[0]) == oracle_tree(x, -y, lam, 1), seed
            checked += 1
        assert checked >= 200

    @pytest.mark.parametrize("lam", [0.0, 1.2])
    def test_deep_trees_match_recursive_bruteforce(self, lam):
        for seed in range(60):
            x, y = dyadic_case(seed + 1000)
            cfg = GBTConfig(n_rounds=1, max_depth=3, learning_rate=1.0, subsample=1.0,
                            colsample_bytree=1.0, reg_lambda=lam, base_score=0.0)
            model = gbt_fit(x, y, cfg)
            assert tree_structure(model.trees[0]) == oracle_tree(x, -y, lam, 3), seed


class TestFixtures:
    def test_depth_zero_leaf_is_learning_rate_times_mean(self):
        x = np.arange(4.0)[:, None]
        y = np.array([0.0, 0.0, 10.0, 10.0])
        cfg = GBTConfig(n_rounds=1, max_depth=0, learning_rate=0.3, subsample=1.0,
                        colsample_bytree=1.0, reg_lambda=0.0, base_score=0.0)
        model = gbt_fit(x, y, cfg)
        np.testing.assert_allclose(model.predict(x), 0.3 * y.mean())

    def test_perfect_split_with_lambda(self):
        # base = mean = 5; residual sums +-10; leaves -G/(2 + 1.2) = +-3.125
        x = np.arange(4.0)[:, None]
        y = np.array([0.0, 0.0, 10.0, 10.0])
        cfg = GBTConfig(n_rounds=1, max_depth=3, learning_rate=1.0, subsample=1.0,
                        colsample_bytree=1.0, reg_lambda=1.2)
        model = gbt_fit(x, y, cfg)
        tree = model.trees[0]
        leaves = sorted(tree.value[tree.feature < 0].tolist())
        assert leaves == [-3.125, 3.125]

    def test_lambda_to_infinity_shrinks_leaves_to_zero(self):
        x = np.arange(6.0)[:, None]
        y = np.array([0.0, 1.0, 0.0, 5.0, 6.0, 5.0])
        for lam, bound in ((1e6, 5e-5), (1e12, 5e-11)):
            cfg = GBTConfig(n_rounds=1, max_depth=3, learning_rate=1.0, subsample=1.0,
                            colsample_bytree=1.0, reg_lambda=lam, base_score=0.0)
            model = gbt_fit(x, y, cfg)
            assert np.abs(model.trees[0].value).max() < bound


class TestPredict:
    def test_zero_trees_gives_base_score(self):
        x = np.zeros((5, 3))
        cfg = GBTConfig(n_rounds=0, base_score=2.5)
        model = gbt_fit(np.ones((4, 3)), np.ones(4), cfg)
        np.testing.assert_array_equal(model.predict(x), 2.5)

    def test_width_mismatch_rejected(self):
        cfg = GBTConfig(n_rounds=1, subsample=1.0, colsample_bytree=1.0)
        model = gbt_fit(np.random.default_rng(0).normal(size=(10, 3)),
                        np.arange(10.0), cfg)
        with pytest.raises(ValueError, match="expected"):
            gbt_predict(model, np.zeros((2, 4)))

    def test_training_beats_base_score(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(300, 6))
        y = x @ rng.normal(size=6) + 0.05 * rng.normal(size=300)
        cfg = GBTConfig(n_rounds=150, max_depth=6, subsample=1.0, colsample_bytree=1.0)
        model = gbt_fit(x, y, cfg)
        mse_model = np.mean((model.predict(x) - y) ** 2)
        mse_base = np.mean((model.base_score - y) ** 2)
        assert mse_model < mse_base

    def test_monotone_training_loss_full_sampling(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(200, 5))
        y = np.sin(x[:, 0]) + x[:, 1] ** 2
        cfg = GBTConfig(n_rounds=30, max_depth=4, subsample=1.0, colsample_bytree=1.0,
                        learning_rate=0.3)
        model = gbt_fit(x, y, cfg)
        pred = np.full(200, model.base_score)
        losses = []
        for tree in model.trees:
            pred += cfg.learning_rate * tree.predict(x)
            losses.append(np.mean((pred - y) ** 2))
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))

    def test_full_sampling_is_seed_independent(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(80, 4))
        y = rng.normal(size=80)
        preds = []
        for seed in (0, 99):
            cfg = GBTConfig(n_rounds=10, max_depth=3, subsample=1.0,
                            colsample_bytree=1.0, seed=seed)
            preds.append(gbt_fit(x, y, cfg).predict(x))
        assert preds[0].tobytes() == preds[1].tobytes()

    def test_early_stopping_truncates_to_best_round(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(120, 4))
        y = x[:, 0] + 0.1 * rng.normal(size=120)
        xv = rng.normal(size=(40, 4))
        yv = rng.normal(size=40)  # unrelated validation: overfits immediately
        cfg = GBTConfig(n_rounds=200, max_depth=3, subsample=1.0, colsample_bytree=1.0,
                        early_stopping_rounds=5)
        model = gbt_fit(x, y, cfg, val_features=xv, val_targets=yv)
        assert len(model.trees) < 200

    def test_nan_rejected(self):
        x = np.ones((4, 2))
        x[0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            gbt_fit(x, np.ones(4), GBTConfig(n_rounds=1))


class TestPreorder:
    def test_roundtrip_preserves_predictions(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 3))
        y = rng.normal(size=50)
        cfg = GBTConfig(n_rounds=3, max_depth=4, subsample=1.0, colsample_bytree=1.0)
        model = gbt_fit(x, y, cfg)
        for tree in model.trees:
            again = RegressionTree.from_preorder(tree.preorder())
            assert again.predict(x).tobytes() == tree.predict(x).tobytes()

    def test_malformed_encoding_rejected(self):
        with pytest.raises(ValueError, match="malformed"):
            RegressionTree.from_preorder(np.array([[0.0, 1.0], [-1.0, 2.0]]))


class TestSgdLinear:
    def test_exact_fit_converges_to_slope_two(self):
        rng = np.random.default_rng(8)
        x = rng.uniform(-1, 1, size=(200, 1))
        y = 2.0 * x[:, 0]
        model = sgd_linear_fit(x, y, lr=0.1, epochs=300, weight_decay=0.0, seed=3)
        assert abs(model.weights[0] - 2.0) < 1e-3
        assert abs(model.bias) < 1e-3

    def test_zero_epochs_keeps_initial_weights(self):
        model = sgd_linear_fit(np.ones((5, 3)), np.ones(5), epochs=0)
        np.testing.assert_array_equal(model.weights, 0.0)
        assert model.bias == 0.0

    def test_huge_weight_decay_shrinks_weights(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(size=(100, 4))
        y = x.sum(axis=1)
        small = sgd_linear_fit(x, y, lr=0.005, epochs=200, weight_decay=50.0, seed=0)
        assert np.abs(small.weights).max() < 1e-2

    @pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
    def test_divergence_aborts_with_diagnostic(self):
        rng = np.random.default_rng(10)
        x = rng.uniform(size=(50, 3)) * 100
        y = rng.uniform(size=50)
        with pytest.raises(ValueError, match="diverged"):
            sgd_linear_fit(x, y, lr=1e6, epochs=50)


class TestMultiOutput:
    def test_24_models_and_columnwise_equivalence(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(size=(60, 5))
        y = rng.uniform(size=(60, 24))
        wrapper = multi_output_fit(x, y, kind="sgd", seed=4,
                                   sgd_kwargs=dict(lr=0.05, epochs=5))
        assert len(wrapper.models) == 24
        stacked = wrapper.predict(x)
        assert stacked.shape == (60, 24)
        for h in (0, 7, 23):
            np.testing.assert_array_equal(stacked[:, h], wrapper.models[h].predict(x))

    def test_per_hour_seeds_stable(self):
        rng = np.random.default_rng(12)
        x = rng.uniform(size=(40, 4))
        y = rng.uniform(size=(40, 24))
        cfg = GBTConfig(n_rounds=3, max_depth=2)
        a = multi_output_fit(x, y, kind="gbt", cfg=cfg, seed=77).predict(x)
        b = multi_output_fit(x, y, kind="gbt", cfg=cfg, seed=77).predict(x)
        assert a.tobytes() == b.tobytes()

    def test_wrong_target_width_rejected(self):
        with pytest.raises(ValueError, match="24"):
            multi_output_fit(np.ones((10, 3)), np.ones((10, 23)))
