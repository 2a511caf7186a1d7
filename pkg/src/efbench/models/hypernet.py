"""Hypernetwork-conditioned LSTM.

A three-layer fully connected hypernetwork maps the flattened input window
to the complete parameter set of the primary LSTM (input-hidden and
hidden-hidden weights plus biases), so every sample runs the recurrence
with its own dynamically generated weights. The forecast head is an
ordinary trained layer.
"""

import numpy as np

from efbench.autodiff import Tensor, add, matmul, mul, relu, sigmoid, tanh
from efbench.models.base import (INPUT_FEATURES, INPUT_HOURS, OUTPUT_HOURS, Linear,
                                 NeuralModel, check_config, dropout, flatten_window)


def lstm_param_count(n_in: int, units: int) -> int:
    """4 gates x (input weights + hidden weights + bias)."""
    return 4 * (n_in * units + units * units + units)


class HyperNetLstmModel(NeuralModel):
    architecture = "hypernet_lstm"
    DEFAULTS = {"units": 64, "hyper_units1": 128, "hyper_units2": 64, "dropout": 0.1}

    def build(self, rng):
        check_config(self.architecture, self.config,
                     counts=("units", "hyper_units1", "hyper_units2"),
                     rates=("dropout",))
        units = self.config["units"]
        self.param_count = lstm_param_count(INPUT_FEATURES, units)
        self.hyper1 = self.register(Linear(
            INPUT_HOURS * INPUT_FEATURES, self.config["hyper_units1"],
            rng.derive("h1"), "hyper1"))
        self.hyper2 = self.register(Linear(
            self.config["hyper_units1"], self.config["hyper_units2"],
            rng.derive("h2"), "hyper2"))
        self.hyper3 = self.register(Linear(
            self.config["hyper_units2"], self.param_count, rng.derive("h3"), "hyper3"))
        self.head = self.register(Linear(units, OUTPUT_HOURS, rng.derive("head"), "head"))

    def generate_weights(self, x: Tensor) -> Tensor:
        """theta: (B, P) LSTM parameters generated per sample."""
        h = relu(self.hyper1(flatten_window(x)))
        h = relu(self.hyper2(h))
        return self.hyper3(h)

    def forward(self, x, training=False):
        units = self.config["units"]
        batch = x.shape[0]
        theta = self.generate_weights(x)

        n_wx = INPUT_FEATURES * 4 * units
        n_wh = units * 4 * units
        w_x = theta[:, :n_wx].reshape((batch, INPUT_FEATURES, 4 * units))
        w_h = theta[:, n_wx:n_wx + n_wh].reshape((batch, units, 4 * units))
        bias = theta[:, n_wx + n_wh:].reshape((batch, 1, 4 * units))

        h = Tensor(np.zeros((batch, 1, units)), validate=False)
        c = Tensor(np.zeros((batch, 1, units)), validate=False)
        for t in range(INPUT_HOURS):
            x_t = x[:, t:t + 1, :]                       # (B, 1, 6)
            gates = add(add(matmul(x_t, w_x), matmul(h, w_h)), bias)
            i = sigmoid(gates[:, :, 0 * units:1 * units])
            f = sigmoid(gates[:, :, 1 * units:2 * units])
            g = tanh(gates[:, :, 2 * units:3 * units])
            o = sigmoid(gates[:, :, 3 * units:4 * units])
            c = add(mul(f, c), mul(i, g))
            h = mul(o, tanh(c))

        last = h.reshape((batch, units))
        last = dropout(last, self.config["dropout"], self._dropout_rng, training)
        return self.head(last)
