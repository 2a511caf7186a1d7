"""Shared building blocks for the neural forecasters.

Every architecture consumes a scaled (batch, 24, 6) window tensor and emits
(batch, 24) scaled energy. Parameters are exposed in declaration order so
the on-disk format can rebuild a model from its config alone.
"""

import numpy as np

from efbench.autodiff import Parameter, Tensor, add, matmul, mul
from efbench.optim import xavier_init
from efbench.rng import RngStream

INPUT_HOURS = 24
INPUT_FEATURES = 6
OUTPUT_HOURS = 24
FLAT_INPUT = INPUT_HOURS * INPUT_FEATURES  # 144


class ConfigError(ValueError):
    pass


def check_config(architecture: str, cfg: dict, counts=(), rates=()):
    for key in counts:
        if int(cfg[key]) < 1:
            raise ConfigError(f"{architecture}: {key} must be >= 1, got {cfg[key]}")
        cfg[key] = int(cfg[key])
    for key in rates:
        if not (0.0 <= float(cfg[key]) < 1.0):
            raise ConfigError(f"{architecture}: {key} must lie in [0, 1), got {cfg[key]}")
        cfg[key] = float(cfg[key])


def xavier_tensor(rng: RngStream, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, shape)


class Linear:
    def __init__(self, n_in: int, n_out: int, rng: RngStream, name: str):
        self.w = Parameter(xavier_init(n_in, n_out, rng), f"{name}.w")
        self.b = Parameter(np.zeros(n_out), f"{name}.b")

    def __call__(self, x: Tensor) -> Tensor:
        return add(matmul(x, self.w), self.b)

    def params(self):
        return [self.w, self.b]


def dropout(x: Tensor, rate: float, rng: RngStream, training: bool) -> Tensor:
    """Inverted dropout: scales by 1/(1-rate) at train time, identity in eval."""
    if not training or rate <= 0.0:
        return x
    mask = (rng.generator.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(mask, validate=False))


class NeuralModel:
    """Base class: subclasses fill ``_params`` in declaration order."""

    architecture = "?"
    DEFAULTS: dict = {}

    def __init__(self, config: dict | None, rng: RngStream):
        self.config = dict(self.DEFAULTS)
        self.config.update(config or {})
        unknown = set(self.config) - set(self.DEFAULTS)
        if unknown:
            raise ConfigError(f"{self.architecture}: unknown config keys {sorted(unknown)}")
        self.rng = rng
        self._dropout_rng = rng.derive("dropout")
        self._params: list[Parameter] = []
        self.build(rng.derive("init"))

    def build(self, rng: RngStream):  # pragma: no cover - abstract
        raise NotImplementedError

    def forward(self, x: Tensor, training: bool = False) -> Tensor:  # pragma: no cover
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return self._params

    def register(self, *layers_or_params):
        for item in layers_or_params:
            if isinstance(item, Parameter):
                self._params.append(item)
            else:
                self._params.extend(item.params())
        return layers_or_params[0] if len(layers_or_params) == 1 else layers_or_params

    def predict(self, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Eval-mode forward over a (n, 24, 6) array, returning (n, 24)."""
        chunks = []
        for lo in range(0, inputs.shape[0], batch_size):
            x = Tensor(inputs[lo:lo + batch_size], validate=False)
            chunks.append(self.forward(x, training=False).data)
        return np.concatenate(chunks, axis=0)


def count_parameters(model) -> int:
    """Exact trainable scalar count."""
    return int(sum(p.data.size for p in model.parameters()))


def flatten_window(x: Tensor) -> Tensor:
    """(B, 24, 6) -> (B, 144)."""
    return x.reshape((x.shape[0], FLAT_INPUT))
