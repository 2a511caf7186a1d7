"""Parameter initialization, optimizers, and training losses.

SGD applies weight decay coupled to the gradient; AdamW decays weights
decoupled from the moment estimates. Adam moments use the standard
bias-corrected recursions.
"""

from dataclasses import dataclass, field

import numpy as np

from efbench.autodiff import Parameter, ShapeMismatch, Tensor, absolute, mean, mul, sub
from efbench.rng import RngStream


def xavier_init(fan_in: int, fan_out: int, rng: RngStream) -> np.ndarray:
    """Uniform samples in +-sqrt(6 / (fan_in + fan_out)), shape (fan_in, fan_out)."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"xavier_init needs positive fans, got ({fan_in}, {fan_out})")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_in, fan_out))


@dataclass
class OptimizerConfig:
    kind: str = "sgd"                 # sgd | adam | adamw
    learning_rate: float = 0.001
    weight_decay: float = 1e-4        # applied across all models unless overridden
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in ("sgd", "adam", "adamw"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")


class Optimizer:
    """Updates a fixed list of parameters in place from a GradientMap."""

    def __init__(self, params: list[Parameter], cfg: OptimizerConfig):
        self.params = list(params)
        self.cfg = cfg
        self._step = 0
        if cfg.kind in ("adam", "adamw"):
            self._m = [np.zeros_like(p.data) for p in self.params]
            self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads) -> None:
        self._step += 1
        cfg = self.cfg
        lr = cfg.learning_rate
        for i, p in enumerate(self.params):
            g = grads[p]
            if g.shape != p.data.shape:
                raise ShapeMismatch("optimizer_step", p.data.shape, g.shape)
            if cfg.kind == "sgd":
                p.data -= lr * (g + cfg.weight_decay * p.data)
                continue
            if cfg.kind == "adam" and cfg.weight_decay:
                g = g + cfg.weight_decay * p.data
            m = self._m[i]
            v = self._v[i]
            m *= cfg.adam_beta1
            m += (1 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1 - cfg.adam_beta2) * g * g
            m_hat = m / (1 - cfg.adam_beta1 ** self._step)
            v_hat = v / (1 - cfg.adam_beta2 ** self._step)
            if cfg.kind == "adamw" and cfg.weight_decay:
                p.data -= lr * cfg.weight_decay * p.data
            p.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of squared residuals over every element."""
    if pred.shape != target.shape:
        raise ShapeMismatch("mse_loss", pred.shape, target.shape)
    r = sub(pred, target)
    return mean(mul(r, r))


def mae_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean of absolute residuals over every element."""
    if pred.shape != target.shape:
        raise ShapeMismatch("mae_loss", pred.shape, target.shape)
    return mean(absolute(sub(pred, target)))


LOSSES = {"mse": mse_loss, "mae": mae_loss}


def get_loss(kind: str):
    try:
        return LOSSES[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {sorted(LOSSES)}") from None
