"""Deterministic convolutional feature transform over (n, 6, 24) windows.

84 fixed length-9 kernels (weights -1 with exactly three 2s, one kernel per
3-subset of the 9 taps) are convolved at data-derived dilations with
"same" zero padding. Each feature is the proportion of positive values
(PPV) of one (kernel, dilation) convolution against one bias threshold;
biases are quantiles of the convolution outputs on a training subsample.

512 features: 84 kernels x 6 (dilation, bias) slots = 504, plus one extra
slot at the smallest dilation for each of the first 8 kernels.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from efbench.rng import RngStream

KERNEL_LENGTH = 9
WEIGHT_HIGH_COUNT = 3
N_KERNELS = 84  # C(9, 3)
BIAS_SAMPLE_CAP = 1024

KERNEL_TRIPLES = np.array(list(combinations(range(KERNEL_LENGTH), WEIGHT_HIGH_COUNT)),
                          dtype=np.int64)
assert KERNEL_TRIPLES.shape[0] == N_KERNELS


def kernel_weights(kernel_index: int) -> np.ndarray:
    """Length-9 weight vector: -1 everywhere, 2 at the kernel's three taps."""
    w = np.full(KERNEL_LENGTH, -1.0)
    w[KERNEL_TRIPLES[kernel_index]] = 2.0
    return w


def fit_dilations(input_length: int, features_per_kernel: int) -> tuple[np.ndarray, np.ndarray]:
    """Exponentially spaced dilations so the dilated kernel still fits."""
    max_exponent = np.log2((input_length - 1) / (KERNEL_LENGTH - 1))
    raw = np.logspace(0, max_exponent, features_per_kernel, base=2).astype(np.int64)
    dilations, counts = np.unique(raw, return_counts=True)
    return dilations, counts


@dataclass
class MiniRocketParams:
    """Everything needed to reproduce the transform bit-exactly."""

    input_length: int
    n_channels: int
    num_features: int
    dilations: np.ndarray          # distinct dilation values
    combo_channel_counts: np.ndarray   # per (kernel, dilation) combo
    combo_channels: np.ndarray     # flat channel indices, combo-major
    slot_kernel: np.ndarray        # (num_features,)
    slot_dilation_idx: np.ndarray  # (num_features,) index into dilations
    slot_bias: np.ndarray          # (num_features,)

    def combo_index(self, kernel: int, dilation_idx: int) -> int:
        return kernel * len(self.dilations) + dilation_idx

    def channels_for(self, combo: int) -> np.ndarray:
        offsets = np.concatenate([[0], np.cumsum(self.combo_channel_counts)])
        return self.combo_channels[offsets[combo]:offsets[combo + 1]]


def _convolve_combo(x: np.ndarray, channels: np.ndarray, kernel: int,
                    dilation: int) -> np.ndarray:
    """Same-padded dilated convolution of the channel-summed signal.

    x: (n, channels, length) -> (n, length)
    """
    signal = x[:, channels, :].sum(axis=1)
    length = signal.shape[1]
    pad = (KERNEL_LENGTH - 1) * dilation // 2
    padded = np.pad(signal, ((0, 0), (pad, pad)))
    weights = kernel_weights(kernel)
    out = np.zeros_like(signal)
    for tap in range(KERNEL_LENGTH):
        out += weights[tap] * padded[:, tap * dilation:tap * dilation + length]
    return out


def _quantile_positions(n: int) -> np.ndarray:
    """Golden-ratio low-discrepancy sequence in (0, 1)."""
    phi = (np.sqrt(5.0) + 1.0) / 2.0
    return (np.arange(1, n + 1) * phi) % 1.0


def _build_slots(dilations: np.ndarray, counts: np.ndarray, num_features: int):
    slot_kernel, slot_dil = [], []
    for k in range(N_KERNELS):
        for d_idx in range(len(dilations)):
            slot_kernel.extend([k] * int(counts[d_idx]))
            slot_dil.extend([d_idx] * int(counts[d_idx]))
    base = len(slot_kernel)
    extra = num_features - base
    if extra < 0:
        raise ValueError(f"feature budget {num_features} below kernel allocation {base}")
    for k in range(extra):  # one extra slot per leading kernel, smallest dilation
        slot_kernel.append(k % N_KERNELS)
        slot_dil.append(0)
    return np.asarray(slot_kernel), np.asarray(slot_dil)


def minirocket_fit(train_inputs: np.ndarray, num_features: int = 512,
                   seed: int = 0) -> MiniRocketParams:
    """Derive dilations, channel subsets, and bias quantiles from training data.

    ``train_inputs`` is channel-major (n, channels, length). Fully
    deterministic in (data, seed).
    """
    x = np.asarray(train_inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] < 1:
        raise ValueError(f"minirocket_fit needs (n, channels, length) input, got {x.shape}")
    n, n_channels, length = x.shape

    features_per_kernel = num_features // N_KERNELS
    if features_per_kernel < 1:
        raise ValueError(f"num_features {num_features} below kernel count {N_KERNELS}")
    dilations, counts = fit_dilations(length, features_per_kernel)
    slot_kernel, slot_dil = _build_slots(dilations, counts, num_features)
    quantiles = _quantile_positions(num_features)

    rng = RngStream(seed, "minirocket")
    chan_rng = rng.derive("channels")
    n_combos = N_KERNELS * len(dilations)
    max_pick = np.log2(min(n_channels, KERNEL_LENGTH) + 1)
    combo_counts = (2 ** chan_rng.uniform(0, max_pick, n_combos)).astype(np.int64)
    combo_channels = np.concatenate([
        np.sort(chan_rng.choice(n_channels, size=int(c), replace=False))
        for c in combo_counts
    ])

    sub_rng = rng.derive("bias-subsample")
    if n > BIAS_SAMPLE_CAP:
        pick = np.sort(sub_rng.choice(n, size=BIAS_SAMPLE_CAP, replace=False))
        sample = x[pick]
    else:
        sample = x

    params = MiniRocketParams(
        input_length=length, n_channels=n_channels, num_features=num_features,
        dilations=dilations, combo_channel_counts=combo_counts,
        combo_channels=combo_channels, slot_kernel=slot_kernel,
        slot_dilation_idx=slot_dil, slot_bias=np.zeros(num_features),
    )

    for combo in range(n_combos):
        kernel, d_idx = divmod(combo, len(dilations))
        slots = np.flatnonzero((slot_kernel == kernel) & (slot_dil == d_idx))
        if slots.size == 0:
            continue
        conv = _convolve_combo(sample, params.channels_for(combo), kernel,
                               int(dilations[d_idx]))
        params.slot_bias[slots] = np.quantile(conv.reshape(-1), quantiles[slots])
    return params


def minirocket_transform(params: MiniRocketParams, inputs: np.ndarray) -> np.ndarray:
    """PPV features (n, num_features): fraction of convolution output above bias."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] != params.n_channels:
        raise ValueError(f"transform expects (n, {params.n_channels}, "
                         f"{params.input_length}) input, got {x.shape}")
    n = x.shape[0]
    features = np.empty((n, params.num_features))
    n_dil = len(params.dilations)
    for combo in range(N_KERNELS * n_dil):
        kernel, d_idx = divmod(combo, n_dil)
        slots = np.flatnonzero((params.slot_kernel == kernel)
                               & (params.slot_dilation_idx == d_idx))
        if slots.size == 0:
            continue
        conv = _convolve_combo(x, params.channels_for(combo), kernel,
                               int(params.dilations[d_idx]))
        biases = params.slot_bias[slots]
        features[:, slots] = (conv[:, None, :] > biases[None, :, None]).mean(axis=2)
    return features
