"""Feature-extraction ensembles: MiniRocket features into a linear SGD
regressor or boosted trees, optionally joined by convolutional-autoencoder
latents. Inputs are the scaled (n, 24, 6) windows, reshaped channel-major
to (n, 6, 24) for the extractors; predictions come back in scaled space.
"""

import numpy as np

from efbench.autoencoder import AutoencoderModel, autoencoder_train
from efbench.data import WindowedDataset
from efbench.gbt import (GBTConfig, LinearModel, MultiOutputModel, gbt_fit,
                         multi_output_fit, RegressionTree)
from efbench.minirocket import MiniRocketParams, minirocket_fit, minirocket_transform
from efbench.rng import RngStream, derive_seed


def channel_major(inputs: np.ndarray) -> np.ndarray:
    """(n, 24, 6) -> (n, 6, 24)."""
    return np.ascontiguousarray(inputs.transpose(0, 2, 1))


class _MiniRocketEnsemble:
    """Shared plumbing: fit MiniRocket on the train split, build features."""

    architecture = "?"
    DEFAULTS: dict = {}

    def __init__(self, config: dict | None = None):
        self.config = dict(self.DEFAULTS)
        self.config.update(config or {})
        unknown = set(self.config) - set(self.DEFAULTS)
        if unknown:
            raise ValueError(f"{self.architecture}: unknown config keys {sorted(unknown)}")
        self.rocket: MiniRocketParams | None = None
        self.regressor: MultiOutputModel | None = None
        self.autoencoder: AutoencoderModel | None = None

    # -- feature construction ------------------------------------------------
    def _rocket_features(self, inputs: np.ndarray) -> np.ndarray:
        if self.rocket is None:
            raise RuntimeError(f"{self.architecture}: MiniRocket not fitted")
        return minirocket_transform(self.rocket, channel_major(inputs))

    def features(self, inputs: np.ndarray) -> np.ndarray:
        feats = self._rocket_features(inputs)
        if self.autoencoder is not None:
            latent = self.autoencoder.encode(channel_major(inputs))
            feats = np.concatenate([latent, feats], axis=1)
        return feats

    @property
    def feature_width(self) -> int:
        width = self.config["num_features"]
        if self.autoencoder is not None:
            width += 32
        return width

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        if self.regressor is None:
            raise RuntimeError(f"{self.architecture}: regressor not fitted")
        return self.regressor.predict(self.features(inputs))

    def parameters(self):  # uniform interface with the neural models
        return []

    # -- persistence ----------------------------------------------------------
    def _rocket_arrays(self):
        p = self.rocket
        return [p.dilations.astype(np.float64), p.combo_channel_counts.astype(np.float64),
                p.combo_channels.astype(np.float64), p.slot_kernel.astype(np.float64),
                p.slot_dilation_idx.astype(np.float64), p.slot_bias]

    def _restore_rocket(self, header, arrays):
        self.rocket = MiniRocketParams(
            input_length=int(header["rocket_input_length"]),
            n_channels=int(header["rocket_n_channels"]),
            num_features=int(self.config["num_features"]),
            dilations=arrays[0].astype(np.int64),
            combo_channel_counts=arrays[1].astype(np.int64),
            combo_channels=arrays[2].astype(np.int64),
            slot_kernel=arrays[3].astype(np.int64),
            slot_dilation_idx=arrays[4].astype(np.int64),
            slot_bias=arrays[5],
        )

    def _rocket_header(self):
        return {"rocket_input_length": self.rocket.input_length,
                "rocket_n_channels": self.rocket.n_channels}


class MiniWSgdModel(_MiniRocketEnsemble):
    """MiniRocket features into 24 independent linear SGD regressors."""

    architecture = "miniwsgd"
    # PPV features sit in [0, 1] and there are 512 of them, so the stable
    # step size is small
    DEFAULTS = {"num_features": 512, "sgd_lr": 0.002, "sgd_epochs": 40,
                "sgd_weight_decay": 1e-4, "sgd_batch_size": 64}

    def fit(self, dataset: WindowedDataset, seed: int = 0):
        x_train, y_train = dataset.subset("train")
        self.rocket = minirocket_fit(channel_major(x_train),
                                     self.config["num_features"],
                                     seed=derive_seed(seed, "rocket"))
        feats = self._rocket_features(x_train)
        self.regressor = multi_output_fit(
            feats, y_train, kind="sgd", seed=derive_seed(seed, "sgd"),
            sgd_kwargs=dict(lr=self.config["sgd_lr"], epochs=self.config["sgd_epochs"],
                            weight_decay=self.config["sgd_weight_decay"],
                            batch_size=self.config["sgd_batch_size"]))
        return self

    def state_header(self):
        head = self._rocket_header()
        head["n_hours"] = 24
        return head

    def state_arrays(self):
        arrs = self._rocket_arrays()
        arrs.append(np.stack([m.weights for m in self.regressor.models]))
        arrs.append(np.array([m.bias for m in self.regressor.models]))
        return arrs

    @classmethod
    def from_state(cls, config, header, arrays):
        model = cls(config)
        model._restore_rocket(header, arrays[:6])
        weights, biases = arrays[6], arrays[7]
        weights = weights.reshape(int(header["n_hours"]), -1)
        model.regressor = MultiOutputModel(
            "sgd", [LinearModel(w, float(b)) for w, b in zip(weights, biases)])
        return model


class _GbtEnsemble(_MiniRocketEnsemble):
    """Common GBT tail: per-hour boosted fits on the extracted features."""

    GBT_KEYS = ("learning_rate", "colsample_bytree", "reg_lambda", "subsample",
                "max_depth", "n_rounds", "min_child_weight", "early_stopping_rounds")

    def _gbt_config(self) -> GBTConfig:
        return GBTConfig(**{k: self.config[k] for k in self.GBT_KEYS})

    def _fit_regressor(self, dataset: WindowedDataset, seed: int):
        x_train, y_train = dataset.subset("train")
        x_val, y_val = dataset.subset("val")
        feats_train = self.features(x_train)
        feats_val = self.features(x_val) if x_val.shape[0] else None
        self.regressor = multi_output_fit(
            feats_train, y_train, kind="gbt", cfg=self._gbt_config(),
            seed=derive_seed(seed, "gbt"),
            val_features=feats_val,
            val_targets=y_val if feats_val is not None else None)

    def _gbt_arrays(self):
        arrs = [np.array([m.base_score for m in self.regressor.models])]
        for m in self.regressor.models:
            for tree in m.trees:
                arrs.append(tree.preorder().reshape(-1))
        return arrs

    def _gbt_header(self):
        return {"n_hours": 24,
                "trees_per_hour": [len(m.trees) for m in self.regressor.models]}

    def _restore_gbt(self, header, arrays):
        from efbench.gbt import GBTModel

        cfg = self._gbt_config()
        base_scores = arrays[0]
        cursor = 1
        models = []
        for hour, n_trees in enumerate(header["trees_per_hour"]):
            trees = [RegressionTree.from_preorder(arrays[cursor + k])
                     for k in range(n_trees)]
            cursor += n_trees
            models.append(GBTModel(config=cfg, base_score=float(base_scores[hour]),
                                   n_features=self.feature_width, trees=trees))
        self.regressor = MultiOutputModel("gbt", models)


class MiniWXgboostModel(_GbtEnsemble):
    """MiniRocket features into 24 boosted-tree fits."""

    architecture = "miniwxgboost"
    DEFAULTS = {"num_features": 512, "learning_rate": 0.05, "colsample_bytree": 0.5,
                "reg_lambda": 1.2, "subsample": 0.8, "max_depth": 6, "n_rounds": 300,
                "min_child_weight": 1.0, "early_stopping_rounds": 50}

    def fit(self, dataset: WindowedDataset, seed: int = 0):
        x_train, _ = dataset.subset("train")
        self.rocket = minirocket_fit(channel_major(x_train),
                                     self.config["num_features"],
                                     seed=derive_seed(seed, "rocket"))
        self._fit_regressor(dataset, seed)
        return self

    def state_header(self):
        head = self._rocket_header()
        head.update(self._gbt_header())
        return head

    def state_arrays(self):
        return self._rocket_arrays() + self._gbt_arrays()

    @classmethod
    def from_state(cls, config, header, arrays):
        model = cls(config)
        model._restore_rocket(header, arrays[:6])
        model._restore_gbt(header, arrays[6:])
        return model


class MiniAutoEncXgboostModel(_GbtEnsemble):
    """Autoencoder latents (32) concatenated with MiniRocket features (512),
    regressed by 24 boosted-tree fits: feature width 544."""

    architecture = "miniautoencxgboost"
    DEFAULTS = {"num_features": 512, "learning_rate": 0.05, "colsample_bytree": 0.5,
                "reg_lambda": 1.2, "subsample": 0.8, "max_depth": 6, "n_rounds": 300,
                "min_child_weight": 1.0, "early_stopping_rounds": 50,
                "ae_lr": 1e-4, "ae_epochs": 100, "ae_patience": 5, "ae_batch_size": 64}

    def fit(self, dataset: WindowedDataset, seed: int = 0):
        x_train, _ = dataset.subset("train")
        x_val, _ = dataset.subset("val")
        self.autoencoder = AutoencoderModel(RngStream(derive_seed(seed, "ae"), "ae"))
        autoencoder_train(self.autoencoder, channel_major(x_train),
                          val_inputs=channel_major(x_val) if x_val.shape[0] else None,
                          lr=self.config["ae_lr"], epochs=self.config["ae_epochs"],
                          batch_size=self.config["ae_batch_size"],
                          patience=self.config["ae_patience"],
                          seed=derive_seed(seed, "ae-train"))
        self.rocket = minirocket_fit(channel_major(x_train),
                                     self.config["num_features"],
                                     seed=derive_seed(seed, "rocket"))
        self._fit_regressor(dataset, seed)
        return self

    def state_header(self):
        head = self._rocket_header()
        head.update(self._gbt_header())
        return head

    def state_arrays(self):
        ae_arrays = [p.data.reshape(-1) for p in self.autoencoder.parameters()]
        return ae_arrays + self._rocket_arrays() + self._gbt_arrays()

    @classmethod
    def from_state(cls, config, header, arrays):
        model = cls(config)
        model.autoencoder = AutoencoderModel(RngStream(0, "ae-load"))
        params = model.autoencoder.parameters()
        for p, flat in zip(params, arrays[:len(params)]):
            if flat.size != p.data.size:
                raise ValueError(f"autoencoder tensor size mismatch for {p.name}")
            p.data[...] = flat.reshape(p.data.shape)
        rest = arrays[len(params):]
        model._restore_rocket(header, rest[:6])
        model._restore_gbt(header, rest[6:])
        return model


ENSEMBLE_MODELS = {
    cls.architecture: cls
    for cls in (MiniWSgdModel, MiniWXgboostModel, MiniAutoEncXgboostModel)
}


def build_ensemble(architecture: str, config: dict | None = None):
    try:
        cls = ENSEMBLE_MODELS[architecture]
    except KeyError:
        raise ValueError(f"unknown ensemble architecture {architecture!r}; "
                         f"expected one of {sorted(ENSEMBLE_MODELS)}") from None
    return cls(config)
