"""Temporal convolution forecaster."""

from efbench.autodiff import Parameter, Tensor, conv1d, relu
from efbench.models.base import (INPUT_FEATURES, INPUT_HOURS, OUTPUT_HOURS, Linear,
                                 NeuralModel, check_config, dropout, xavier_tensor)

import numpy as np


class ConvLayer:
    def __init__(self, c_in, c_out, k, rng, name):
        self.w = Parameter(xavier_tensor(rng, (c_out, c_in, k), c_in * k, c_out * k),
                           f"{name}.w")
        self.b = Parameter(np.zeros(c_out), f"{name}.b")
        self.padding = (k - 1) // 2  # zero "same" padding for odd k

    def __call__(self, x):
        return conv1d(x, self.w, self.b, padding=self.padding)

    def params(self):
        return [self.w, self.b]


class TcnModel(NeuralModel):
    """Three same-padded 1-D convolutions with dropout after the first two."""

    architecture = "tcn"
    DEFAULTS = {"units": 128, "dropout": 0.5, "kernel_size": 3}

    def build(self, rng):
        check_config(self.architecture, self.config,
                     counts=("units", "kernel_size"), rates=("dropout",))
        units = self.config["units"]
        k = self.config["kernel_size"]
        self.conv1 = self.register(ConvLayer(INPUT_FEATURES, units, k, rng.derive("c1"), "c1"))
        self.conv2 = self.register(ConvLayer(units, units, k, rng.derive("c2"), "c2"))
        self.conv3 = self.register(ConvLayer(units, units, k, rng.derive("c3"), "c3"))
        self.head = self.register(
            Linear(units * INPUT_HOURS, OUTPUT_HOURS, rng.derive("head"), "head"))

    def forward(self, x, training=False):
        rate = self.config["dropout"]
        h = x.transpose(0, 2, 1)                       # (B, 6, 24) channel-major
        h = dropout(relu(self.conv1(h)), rate, self._dropout_rng, training)
        h = dropout(relu(self.conv2(h)), rate, self._dropout_rng, training)
        h = relu(self.conv3(h))
        flat = h.reshape((h.shape[0], h.shape[1] * h.shape[2]))
        return self.head(flat)
