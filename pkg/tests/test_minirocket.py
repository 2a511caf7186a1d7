"""MiniRocket transform: feature count, PPV bounds, determinism, and a
brute-force convolution oracle."""

import numpy as np
import pytest

from efbench.minirocket import (KERNEL_TRIPLES, MiniRocketParams, N_KERNELS,
                                fit_dilations, kernel_weights, minirocket_fit,
                                minirocket_transform)


@pytest.fixture(scope="module")
def fitted():
    rng = np.random.default_rng(42)
    x = rng.normal(size=(200, 6, 24))
    params = minirocket_fit(x, 512, seed=9)
    return x, params


class TestKernels:
    def test_84_kernels_from_combinatorics(self):
        assert N_KERNELS == 84
        assert len(KERNEL_TRIPLES) == 84
        assert len({tuple(t) for t in KERNEL_TRIPLES}) == 84

    def test_weights_are_minus_one_and_three_twos(self):
        for k in range(84):
            w = kernel_weights(k)
            assert sorted(w.tolist()).count(2.0) == 3
            assert sorted(w.tolist()).count(-1.0) == 6
            assert w.sum() == 0.0

    def test_dilations_for_length_24(self):
        dil, counts = fit_dilations(24, 6)
        assert dil.tolist() == [1, 2]
        assert counts.tolist() == [4, 2]


class TestFit:
    def test_feature_count_is_512(self, fitted):
        _, params = fitted
        assert params.num_features == 512
        assert params.slot_kernel.shape == (512,)
        # 84 kernels x 6 slots, plus one extra for each of the first 8 kernels
        assert np.bincount(params.slot_kernel, minlength=84).tolist() == \
            [7] * 8 + [6] * 76

    def test_deterministic_for_fixed_seed(self, fitted):
        x, params = fitted
        again = minirocket_fit(x, 512, seed=9)
        assert params.slot_bias.tobytes() == again.slot_bias.tobytes()
        assert params.combo_channels.tobytes() == again.combo_channels.tobytes()
        other = minirocket_fit(x, 512, seed=10)
        assert params.combo_channels.tobytes() != other.combo_channels.tobytes()

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            minirocket_fit(np.zeros((0, 6, 24)), 512, seed=0)


class TestTransform:
    def test_features_in_unit_interval(self, fitted):
        x, params = fitted
        feats = minirocket_transform(params, x)
        assert feats.shape == (200, 512)
        assert feats.min() >= 0.0 and feats.max() <= 1.0

    def test_transform_bit_identical_across_runs(self, fitted):
        x, params = fitted
        a = minirocket_transform(params, x)
        b = minirocket_transform(params, x)
        assert a.tobytes() == b.tobytes()

    def test_zero_input_positive_bias_gives_zero(self):
        params = _tiny_params(bias=0.5)
        feats = minirocket_transform(params, np.zeros((3, 1, 24)))
        assert np.all(feats == 0.0)

    def test_ppv_matches_bruteforce_convolution(self):
        # single kernel, dilation 1, bias 0, one channel: count positives by hand
        params = _tiny_params(bias=0.0)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 1, 24))
        feats = minirocket_transform(params, x)
        weights = kernel_weights(0)
        for s in range(5):
            padded = np.concatenate([np.zeros(4), x[s, 0], np.zeros(4)])
            positives = 0
            for pos in range(24):
                acc = sum(weights[j] * padded[pos + j] for j in range(9))
                positives += acc > 0.0
            assert feats[s, 0] == pytest.approx(positives / 24.0, abs=0)

    def test_ppv_monotone_in_bias(self, fitted):
        x, params = fitted
        feats = minirocket_transform(params, x)
        import dataclasses
        raised = dataclasses.replace(params, slot_bias=params.slot_bias + 0.25)
        feats_hi = minirocket_transform(raised, x)
        assert np.all(feats_hi <= feats)

    def test_batch_order_invariance(self, fitted):
        x, params = fitted
        perm = np.random.default_rng(0).permutation(x.shape[0])
        feats = minirocket_transform(params, x)
        feats_perm = minirocket_transform(params, x[perm])
        np.testing.assert_array_equal(feats_perm, feats[perm])

    def test_channel_mismatch_rejected(self, fitted):
        _, params = fitted
        with pytest.raises(ValueError, match="expects"):
            minirocket_transform(params, np.zeros((2, 5, 24)))


def _tiny_params(bias: float) -> MiniRocketParams:
    """One feature: kernel 0, dilation 1, channel 0."""
    n_dil = 1
    return MiniRocketParams(
        input_length=24, n_channels=1, num_features=1,
        dilations=np.array([1]),
        combo_channel_counts=np.ones(N_KERNELS * n_dil, dtype=np.int64),
        combo_channels=np.zeros(N_KERNELS * n_dil, dtype=np.int64),
        slot_kernel=np.array([0]), slot_dilation_idx=np.array([0]),
        slot_bias=np.array([bias]),
    )
