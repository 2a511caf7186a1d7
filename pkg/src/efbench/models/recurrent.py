"""Recurrent forecasters: vanilla RNN, LSTM, GRU, and attention-pooled LSTM.

Cells use a single bias vector per gate block (counted once, not duplicated
per input/hidden path). Gate layout: LSTM [input, forget, cell, output],
GRU [reset, update, candidate].
"""

import numpy as np

from efbench.autodiff import (Parameter, Tensor, add, concat, matmul, mean, mul,
                              sigmoid, softmax, tanh)
from efbench.models.base import (INPUT_FEATURES, INPUT_HOURS, OUTPUT_HOURS, Linear,
                                 NeuralModel, check_config, dropout)
from efbench.optim import xavier_init


class RecurrentCellParams:
    """Input-hidden, hidden-hidden, and bias tensors for an n-gate cell."""

    def __init__(self, n_in, units, n_gates, rng, name):
        self.w_x = Parameter(xavier_init(n_in, n_gates * units, rng.derive("wx")), f"{name}.w_x")
        self.w_h = Parameter(xavier_init(units, n_gates * units, rng.derive("wh")), f"{name}.w_h")
        self.b = Parameter(np.zeros(n_gates * units), f"{name}.b")

    def params(self):
        return [self.w_x, self.w_h, self.b]


def _gate(t: Tensor, units: int, idx: int) -> Tensor:
    return t[:, idx * units:(idx + 1) * units]


def lstm_step(cell: RecurrentCellParams, x_t: Tensor, h: Tensor, c: Tensor, units: int):
    gates = add(add(matmul(x_t, cell.w_x), matmul(h, cell.w_h)), cell.b)
    i = sigmoid(_gate(gates, units, 0))
    f = sigmoid(_gate(gates, units, 1))
    g = tanh(_gate(gates, units, 2))
    o = sigmoid(_gate(gates, units, 3))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def gru_step(cell: RecurrentCellParams, x_t: Tensor, h: Tensor, units: int):
    gx = matmul(x_t, cell.w_x)
    gh = matmul(h, cell.w_h)
    r = sigmoid(add(add(_gate(gx, units, 0), _gate(gh, units, 0)), cell.b[:units]))
    z = sigmoid(add(add(_gate(gx, units, 1), _gate(gh, units, 1)), cell.b[units:2 * units]))
    n = tanh(add(add(_gate(gx, units, 2), mul(r, _gate(gh, units, 2))),
                 cell.b[2 * units:]))
    one_minus_z = add(mul(z, Tensor(-1.0)), Tensor(1.0))
    return add(mul(one_minus_z, n), mul(z, h))


def rnn_step(cell: RecurrentCellParams, x_t: Tensor, h: Tensor):
    return tanh(add(add(matmul(x_t, cell.w_x), matmul(h, cell.w_h)), cell.b))


class RecurrentModel(NeuralModel):
    """Single recurrent module, dropout on the last hidden state, FC output."""

    architecture = "rnn"
    KIND = "rnn"
    N_GATES = 1
    DEFAULTS = {"units": 64, "dropout": 0.5}

    def build(self, rng):
        check_config(self.architecture, self.config, counts=("units",), rates=("dropout",))
        units = self.config["units"]
        self.cell = self.register(
            RecurrentCellParams(INPUT_FEATURES, units, self.N_GATES, rng.derive("cell"), "cell"))
        self.head = self.register(Linear(units, OUTPUT_HOURS, rng.derive("head"), "head"))

    def run_sequence(self, x: Tensor, collect: bool = False):
        units = self.config["units"]
        batch = x.shape[0]
        h = Tensor(np.zeros((batch, units)), validate=False)
        c = Tensor(np.zeros((batch, units)), validate=False)
        steps = []
        for t in range(INPUT_HOURS):
            x_t = x[:, t, :]
            if self.KIND == "lstm":
                h, c = lstm_step(self.cell, x_t, h, c, units)
            elif self.KIND == "gru":
                h = gru_step(self.cell, x_t, h, units)
            else:
                h = rnn_step(self.cell, x_t, h)
            if collect:
                steps.append(h.reshape((batch, 1, units)))
        if collect:
            return h, concat(steps, axis=1)
        return h, None

    def forward(self, x, training=False):
        h, _ = self.run_sequence(x)
        h = dropout(h, self.config["dropout"], self._dropout_rng, training)
        return self.head(h)


class RnnModel(RecurrentModel):
    architecture = "rnn"
    KIND = "rnn"
    N_GATES = 1
    DEFAULTS = {"units": 64, "dropout": 0.5}


class LstmModel(RecurrentModel):
    architecture = "lstm"
    KIND = "lstm"
    N_GATES = 4
    DEFAULTS = {"units": 64, "dropout": 0.5}


class GruModel(RecurrentModel):
    architecture = "gru"
    KIND = "gru"
    N_GATES = 3
    DEFAULTS = {"units": 64, "dropout": 0.1}


class AttentionLstmModel(LstmModel):
    """LSTM hidden sequence pooled by single-head scaled dot-product
    self-attention (Q = K = V = H), then mean over time."""

    architecture = "attention_lstm"
    KIND = "lstm"
    N_GATES = 4
    DEFAULTS = {"units": 64, "dropout": 0.5}

    def attention(self, h_seq: Tensor) -> Tensor:
        units = self.config["units"]
        scores = mul(matmul(h_seq, h_seq.transpose(0, 2, 1)), Tensor(1.0 / np.sqrt(units)))
        weights = softmax(scores, axis=-1)           # rows sum to 1
        return matmul(weights, h_seq)                # (B, 24, U)

    def forward(self, x, training=False):
        _, h_seq = self.run_sequence(x, collect=True)
        ctx = self.attention(h_seq)
        pooled = mean(ctx, axis=1)
        pooled = dropout(pooled, self.config["dropout"], self._dropout_rng, training)
        return self.head(pooled)

    def attention_weights(self, x: Tensor) -> np.ndarray:
        """Eval-mode attention matrix, for inspection and invariants."""
        _, h_seq = self.run_sequence(x, collect=True)
        units = self.config["units"]
        scores = mul(matmul(h_seq, h_seq.transpose(0, 2, 1)), Tensor(1.0 / np.sqrt(units)))
        return softmax(scores, axis=-1).data
