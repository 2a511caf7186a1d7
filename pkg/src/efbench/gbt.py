"""Regularized second-order gradient-boosted regression trees, a linear SGD
regressor, and the 24-hour multi-output wrapper.

Squared-error objective with the half-squared convention: per round the
gradient is g = prediction - target and the hessian is 1 per row, so leaf
weights are -G/(H + lambda) with H equal to the leaf's row count. Split
search is exact greedy over every distinct-value boundary: the predicate is
``x <= threshold`` with the threshold taken from the training values, gains
compared by G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l), ties resolved to the
lowest feature index and then the lowest threshold.
"""

from dataclasses import dataclass, field

import numpy as np

from efbench.rng import RngStream, derive_seed

SCAN_F64_MAX_ROWS = 4096  # exact float64 split scan below, float32 above


@dataclass
class GBTConfig:
    learning_rate: float = 0.05
    colsample_bytree: float = 0.5
    reg_lambda: float = 1.2
    subsample: float = 0.8
    max_depth: int = 6
    n_rounds: int = 300
    min_child_weight: float = 1.0
    early_stopping_rounds: int = 50
    base_score: float | None = None   # None: training-target mean
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.colsample_bytree <= 1 and 0 < self.subsample <= 1):
            raise ValueError("colsample_bytree and subsample must lie in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be non-negative")
        if self.max_depth < 0 or self.n_rounds < 0:
            raise ValueError("max_depth and n_rounds must be non-negative")


@dataclass
class RegressionTree:
    """Array-backed binary tree; feature < 0 marks a leaf."""

    feature: np.ndarray    # int32, full-matrix feature index, -1 for leaves
    threshold: np.ndarray  # float64, split boundary (x <= t goes left)
    left: np.ndarray       # int32 child indices
    right: np.ndarray
    value: np.ndarray      # float64, leaf weight -G/(H+lambda); 0 at internals

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            col = np.maximum(feat, 0)
            go_left = x[np.arange(x.shape[0]), col] <= self.threshold[node]
            node = np.where(active, np.where(go_left, self.left[node], self.right[node]),
                            node)
        return self.value[node]

    def preorder(self) -> np.ndarray:
        """Flat (n_nodes, 2) pre-order listing: (feature, threshold) per
        internal node, (-1, leaf value) per leaf. Every internal node has two
        children, so this alone recovers the structure."""
        rows = []

        def visit(i):
            if self.feature[i] < 0:
                rows.append((-1.0, self.value[i]))
            else:
                rows.append((float(self.feature[i]), self.threshold[i]))
                visit(self.left[i])
                visit(self.right[i])

        visit(0)
        return np.asarray(rows, dtype=np.float64)

    @classmethod
    def from_preorder(cls, flat: np.ndarray) -> "RegressionTree":
        flat = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
        n = flat.shape[0]
        feature = np.full(n, -1, dtype=np.int32)
        threshold = np.zeros(n)
        left = np.zeros(n, dtype=np.int32)
        right = np.zeros(n, dtype=np.int32)
        value = np.zeros(n)
        cursor = 0

        def build():
            nonlocal cursor
            if cursor >= n:
                raise ValueError("malformed pre-order tree encoding")
            i = cursor
            cursor += 1
            if flat[i, 0] < 0:
                value[i] = flat[i, 1]
            else:
                feature[i] = int(flat[i, 0])
                threshold[i] = flat[i, 1]
                left[i] = cursor
                build()
                right[i] = cursor
                build()
            return i

        build()
        if cursor != n:
            raise ValueError("malformed pre-order tree encoding")
        return cls(feature, threshold, left, right, value)


class _TreeBuilder:
    """Level-wise exact greedy construction over partitioned sorted columns.

    Working arrays are (columns, rows): each row holds sample indices sorted
    by that column's values, physically partitioned so every tree node owns
    one contiguous segment. The scan runs in float32 / int32 full-width
    vectorized passes (as gradient-boosting libraries conventionally do);
    leaf weights are then recomputed exactly in float64 from the raw
    gradients of each leaf's rows.
    """

    def __init__(self, lam: float, max_depth: int, min_child: float):
        self.lam = lam
        self.max_depth = max_depth
        self.min_child = min_child

    def build(self, x_sub: np.ndarray, g_sub: np.ndarray, order: np.ndarray,
              col_ids: np.ndarray) -> RegressionTree:
        """x_sub: (m, n_cols) float64 features, g_sub: (m,) float64 gradients,
        order: (n_cols, m) int32 per-column sorted sample indices (consumed)."""
        n_cols, m = order.shape
        dtype = np.float64 if m <= SCAN_F64_MAX_ROWS else np.float32
        lam = dtype(self.lam)
        col_ar = np.arange(n_cols)[:, None]
        positions = np.arange(m, dtype=np.int32)

        feature, threshold, left, right, value = [], [], [], [], []
        leaf_rows: list = []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(0)
            right.append(0)
            value.append(0.0)
            leaf_rows.append(None)
            return len(feature) - 1

        x_cm = np.ascontiguousarray(x_sub.T, dtype=dtype)
        g_cast = g_sub.astype(dtype)
        xs = np.take_along_axis(x_cm, order, axis=1)
        gs = g_cast[order]

        # segments always tile [0, m); inactive ones are finished leaves
        node_ids = [new_node()]
        starts = np.array([0], dtype=np.int64)
        lens = np.array([m], dtype=np.int64)
        active = np.array([True])

        def finish_leaf(node, s, ln):
            leaf_rows[node] = order[0, s:s + ln].copy()

        for depth in range(self.max_depth + 1):
            if not active.any():
                break
            n_seg = len(node_ids)
            csum = np.cumsum(gs, axis=1, dtype=dtype)
            ends = starts + lens
            seg_g = csum[0, ends - 1] - np.where(starts > 0, csum[0, starts - 1], 0.0)

            if depth == self.max_depth:
                for i, node in enumerate(node_ids):
                    if active[i]:
                        finish_leaf(node, int(starts[i]), int(lens[i]))
                break

            start_exp = np.repeat(starts, lens)
            hl = (positions - start_exp + 1).astype(dtype)        # 1..len in segment
            hr = np.repeat(lens, lens).astype(dtype) - hl
            splittable = (hr > 0) & (hl >= self.min_child) & (hr >= self.min_child)
            splittable &= np.repeat(active, lens)
            g_exp = np.repeat(seg_g, lens)

            base = np.where(starts > 0, 1, 0)[None, :].astype(dtype) \
                * csum[:, np.maximum(starts - 1, 0)]
            gl = csum
            gl -= np.repeat(base, lens, axis=1)
            gr = g_exp[None, :] - gl
            # same algebraic form as the defining gain formula, term for term
            gain = gl * gl
            gain /= (hl + lam)[None, :]
            gr *= gr
            gr /= (np.where(splittable, hr, dtype(1.0)) + lam)[None, :]
            gain += gr

            candidate = np.empty((n_cols, m), dtype=bool)
            candidate[:, :-1] = xs[:, 1:] != xs[:, :-1]
            candidate[:, -1] = False
            candidate &= splittable[None, :]
            np.copyto(gain, -np.inf, where=~candidate)

            col_best = np.maximum.reduceat(gain, starts, axis=1)   # (n_cols, n_seg)
            seg_col = col_best.argmax(axis=0)                      # lowest col on ties
            seg_best = col_best[seg_col, np.arange(n_seg)]
            parent_score = seg_g * seg_g / (lens.astype(dtype) + lam)

            next_nodes, next_starts, next_lens, next_active = [], [], [], []
            split_nls = []
            any_split = False
            for i, node in enumerate(node_ids):
                s, ln = int(starts[i]), int(lens[i])
                if not active[i]:
                    next_nodes.append(node)
                    next_starts.append(s)
                    next_lens.append(ln)
                    next_active.append(False)
                    split_nls.append(ln)
                    continue
                if not np.isfinite(seg_best[i]) or not seg_best[i] - parent_score[i] > 0.0:
                    finish_leaf(node, s, ln)
                    next_nodes.append(node)
                    next_starts.append(s)
                    next_lens.append(ln)
                    next_active.append(False)
                    split_nls.append(ln)
                    continue
                col = int(seg_col[i])
                pos = s + int(np.argmax(gain[col, s:s + ln]))  # first max: lowest threshold
                n_left = pos - s + 1
                feature[node] = int(col_ids[col])
                threshold[node] = float(xs[col, pos])
                lchild, rchild = new_node(), new_node()
                left[node], right[node] = lchild, rchild
                next_nodes.extend((lchild, rchild))
                next_starts.extend((s, s + n_left))
                next_lens.extend((n_left, ln - n_left))
                next_active.extend((True, True))
                split_nls.append(n_left)
                any_split = True

            if not any_split:
                break

            # stable partition of every column's order into child segments;
            # non-splitting segments keep all rows "left" and stay in place
            go_left = np.zeros(m, dtype=bool)
            for i in range(n_seg):
                s = int(starts[i])
                nl = int(split_nls[i])
                if nl == lens[i]:
                    go_left[order[0, s:s + nl]] = True
                else:
                    go_left[order[int(seg_col[i]), s:s + nl]] = True
            mask = go_left[order]
            csl = np.cumsum(mask, axis=1, dtype=np.int32)
            base_l = np.where(starts > 0, 1, 0)[None, :].astype(np.int32) \
                * csl[:, np.maximum(starts - 1, 0)]
            in_left = csl - np.repeat(base_l, lens, axis=1)
            pos_in_seg = (positions - start_exp + 1).astype(np.int32)
            nl_exp = np.repeat(np.asarray(split_nls), lens).astype(np.int32)
            dest = np.where(mask, in_left - 1, nl_exp + (pos_in_seg - in_left) - 1)
            dest += start_exp.astype(np.int32)
            perm = np.empty((n_cols, m), dtype=np.int32)
            perm[col_ar, dest] = positions[None, :]
            order = np.take_along_axis(order, perm, axis=1)
            xs = np.take_along_axis(xs, perm, axis=1)
            gs = np.take_along_axis(gs, perm, axis=1)

            node_ids = next_nodes
            starts = np.asarray(next_starts, dtype=np.int64)
            lens = np.asarray(next_lens, dtype=np.int64)
            active = np.asarray(next_active)

        # exact float64 leaf weights from the raw gradients
        for node, rows in enumerate(leaf_rows):
            if rows is not None:
                value[node] = -g_sub[rows].sum() / (rows.size + self.lam)

        return RegressionTree(
            np.asarray(feature, dtype=np.int32), np.asarray(threshold),
            np.asarray(left, dtype=np.int32), np.asarray(right, dtype=np.int32),
            np.asarray(value))


@dataclass
class GBTModel:
    config: GBTConfig
    base_score: float
    n_features: int
    trees: list = field(default_factory=list)

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(f"gbt_predict: expected (n, {self.n_features}) features, "
                             f"got {features.shape}")
        out = np.full(features.shape[0], self.base_score)
        for tree in self.trees:
            out += self.config.learning_rate * tree.predict(features)
        return out


def presort_columns(features: np.ndarray) -> np.ndarray:
    """Per-column stable argsort, shared across the 24 hourly fits."""
    return np.argsort(features, axis=0, kind="stable").astype(np.int32)


def gbt_fit(features: np.ndarray, targets: np.ndarray, cfg: GBTConfig,
            val_features: np.ndarray | None = None,
            val_targets: np.ndarray | None = None,
            presort: np.ndarray | None = None) -> GBTModel:
    """Boost regression trees on the squared-error objective.

    With both sample rates at 1 the fit draws nothing from the RNG. When
    validation data is given, boosting stops after
    ``early_stopping_rounds`` rounds without validation-MSE improvement and
    the model is truncated to the best round.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or y.ndim != 1:
        raise ValueError(f"gbt_fit: bad shapes {x.shape} / {y.shape}")
    if x.shape[0] < 2:
        raise ValueError("gbt_fit needs at least 2 samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("gbt_fit: non-finite features or targets")

    m, n_features = x.shape
    base = float(y.mean()) if cfg.base_score is None else float(cfg.base_score)
    model = GBTModel(config=cfg, base_score=base, n_features=n_features)
    if presort is None:
        presort = presort_columns(x)
    builder = _TreeBuilder(cfg.reg_lambda, cfg.max_depth, cfg.min_child_weight)
    rng = RngStream(cfg.seed, "gbt")

    pred = np.full(m, base)
    use_rows = cfg.subsample < 1.0
    use_cols = cfg.colsample_bytree < 1.0
    n_rows = max(1, int(round(cfg.subsample * m)))
    n_cols = max(1, int(round(cfg.colsample_bytree * n_features)))

    best_val = np.inf
    best_round = 0
    val_pred = None
    if val_features is not None:
        val_features = np.asarray(val_features, dtype=np.float64)
        val_pred = np.full(val_features.shape[0], base)

    for round_idx in range(cfg.n_rounds):
        g = pred - y
        if use_rows:
            rows = np.sort(rng.derive(f"rows{round_idx}").choice(m, n_rows))
        else:
            rows = None
        if use_cols:
            cols = np.sort(rng.derive(f"cols{round_idx}").choice(n_features, n_cols))
        else:
            cols = np.arange(n_features)

        if rows is None:
            x_sub = x[:, cols] if use_cols else x
            g_sub = g
            order = presort.T[cols].copy() if use_cols else presort.T.copy()
        else:
            keep = np.zeros(m, dtype=bool)
            keep[rows] = True
            rowmap = np.empty(m, dtype=np.int32)
            rowmap[rows] = np.arange(rows.size, dtype=np.int32)
            x_sub = x[np.ix_(rows, cols)]
            g_sub = g[rows]
            order = np.empty((cols.size, rows.size), dtype=np.int32)
            for jj, col in enumerate(cols):
                full_order = presort[:, col]
                order[jj] = rowmap[full_order[keep[full_order]]]

        tree = builder.build(x_sub, g_sub, order, cols)
        model.trees.append(tree)
        pred += cfg.learning_rate * tree.predict(x)

        if val_pred is not None:
            val_pred += cfg.learning_rate * tree.predict(val_features)
            val_mse = float(np.mean((val_pred - np.asarray(val_targets)) ** 2))
            if val_mse < best_val - 1e-12:
                best_val = val_mse
                best_round = round_idx + 1
            elif round_idx + 1 - best_round >= cfg.early_stopping_rounds:
                model.trees = model.trees[:best_round]
                break
    return model


def gbt_predict(model: GBTModel, features: np.ndarray) -> np.ndarray:
    return model.predict(features)


# ---------------------------------------------------------------------------
# linear SGD regressor
# ---------------------------------------------------------------------------

@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def predict(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[1] != self.weights.size:
            raise ValueError(f"linear predict: expected {self.weights.size} features, "
                             f"got {features.shape[1]}")
        return features @ self.weights + self.bias


def sgd_linear_fit(features: np.ndarray, target: np.ndarray, lr: float = 0.01,
                   epochs: int = 50, weight_decay: float = 0.0,
                   batch_size: int = 64, seed: int = 0) -> LinearModel:
    """Least squares by mini-batch gradient descent with an L2 penalty.

    Loss per batch: mean((Xw + b - y)^2) + weight_decay * ||w||^2.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValueError("sgd_linear_fit needs at least one sample")
    w = np.zeros(x.shape[1])
    b = 0.0
    shuffle = RngStream(seed, "sgd-linear")
    n = x.shape[0]
    for epoch in range(epochs):
        order = shuffle.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            xb, yb = x[idx], y[idx]
            err = xb @ w + b - yb
            grad_w = 2.0 * (xb.T @ err) / idx.size + 2.0 * weight_decay * w
            grad_b = 2.0 * err.mean()
            w -= lr * grad_w
            b -= lr * grad_b
            if not (np.all(np.isfinite(w)) and np.isfinite(b)):
                raise ValueError(
                    f"sgd_linear_fit diverged at epoch {epoch + 1}: try a lower lr")
    return LinearModel(w, b)


# ---------------------------------------------------------------------------
# multi-output wrapper: one independent regressor per horizon hour
# ---------------------------------------------------------------------------

@dataclass
class MultiOutputModel:
    kind: str                 # "gbt" | "sgd"
    models: list

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.column_stack([m.predict(features) for m in self.models])


def multi_output_fit(features: np.ndarray, targets: np.ndarray, kind: str = "gbt",
                     cfg: GBTConfig | None = None, seed: int = 0,
                     val_features: np.ndarray | None = None,
                     val_targets: np.ndarray | None = None,
                     sgd_kwargs: dict | None = None) -> MultiOutputModel:
    """Fit 24 per-hour regressors; per-hour seeds derive from the master seed."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim != 2 or targets.shape[1] != 24:
        raise ValueError(f"multi_output_fit expects (n, 24) targets, got {targets.shape}")
    models = []
    if kind == "gbt":
        cfg = cfg or GBTConfig()
        presort = presort_columns(np.asarray(features, dtype=np.float64))
        for hour in range(24):
            hour_cfg = GBTConfig(**{**vars(cfg), "seed": derive_seed(seed, f"hour{hour}")})
            models.append(gbt_fit(features, targets[:, hour], hour_cfg,
                                  val_features=val_features,
                                  val_targets=None if val_targets is None
                                  else val_targets[:, hour],
                                  presort=presort))
    elif kind == "sgd":
        kwargs = sgd_kwargs or {}
        for hour in range(24):
            models.append(sgd_linear_fit(features, targets[:, hour],
                                         seed=derive_seed(seed, f"hour{hour}"), **kwargs))
    else:
        raise ValueError(f"unknown multi-output regressor kind {kind!r}")
    return MultiOutputModel(kind, models)
