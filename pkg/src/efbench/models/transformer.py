"""Encoder-only Transformer forecaster.

Fully connected layers sit before (6 -> d_model) and after (d_model -> 24,
on the time-pooled encoding) the encoder stack. Sinusoidal positional
encodings; post-norm residual layers.
"""

import numpy as np

from efbench.autodiff import (Parameter, Tensor, add, div, matmul, mean, mul, relu,
                              softmax, sqrt)
from efbench.models.base import (INPUT_FEATURES, INPUT_HOURS, OUTPUT_HOURS, ConfigError,
                                 Linear, NeuralModel, check_config, dropout)


def sinusoidal_encoding(length: int, d_model: int) -> np.ndarray:
    """pe[pos, 2i] = sin(pos / 10000^(2i/d)), pe[pos, 2i+1] = cos(same)."""
    pos = np.arange(length)[:, None].astype(np.float64)
    i = np.arange(0, d_model, 2).astype(np.float64)
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((length, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : pe[:, 1::2].shape[1]])
    return pe


class LayerNorm:
    def __init__(self, dim, name):
        self.gamma = Parameter(np.ones(dim), f"{name}.gamma")
        self.beta = Parameter(np.zeros(dim), f"{name}.beta")
        self.eps = 1e-6

    def __call__(self, x: Tensor) -> Tensor:
        mu = mean(x, axis=-1, keepdims=True)
        centered = x - mu
        var = mean(mul(centered, centered), axis=-1, keepdims=True)
        norm = div(centered, sqrt(add(var, Tensor(self.eps))))
        return add(mul(norm, self.gamma), self.beta)

    def params(self):
        return [self.gamma, self.beta]


class EncoderLayer:
    def __init__(self, d_model, heads, ff_dim, rng, name):
        self.d_model = d_model
        self.heads = heads
        self.head_dim = d_model // heads
        self.wq = Linear(d_model, d_model, rng.derive("wq"), f"{name}.wq")
        self.wk = Linear(d_model, d_model, rng.derive("wk"), f"{name}.wk")
        self.wv = Linear(d_model, d_model, rng.derive("wv"), f"{name}.wv")
        self.wo = Linear(d_model, d_model, rng.derive("wo"), f"{name}.wo")
        self.ff1 = Linear(d_model, ff_dim, rng.derive("ff1"), f"{name}.ff1")
        self.ff2 = Linear(ff_dim, d_model, rng.derive("ff2"), f"{name}.ff2")
        self.ln1 = LayerNorm(d_model, f"{name}.ln1")
        self.ln2 = LayerNorm(d_model, f"{name}.ln2")

    def params(self):
        out = []
        for piece in (self.wq, self.wk, self.wv, self.wo,
                      self.ff1, self.ff2, self.ln1, self.ln2):
            out.extend(piece.params())
        return out

    def _split_heads(self, t: Tensor, batch: int) -> Tensor:
        t = t.reshape((batch, INPUT_HOURS, self.heads, self.head_dim))
        return t.transpose(0, 2, 1, 3)  # (B, h, 24, dh)

    def attention(self, x: Tensor, return_weights: bool = False):
        batch = x.shape[0]
        q = self._split_heads(self.wq(x), batch)
        k = self._split_heads(self.wk(x), batch)
        v = self._split_heads(self.wv(x), batch)
        scores = mul(matmul(q, k.transpose(0, 1, 3, 2)), Tensor(1.0 / np.sqrt(self.head_dim)))
        weights = softmax(scores, axis=-1)
        ctx = matmul(weights, v)
        ctx = ctx.transpose(0, 2, 1, 3).reshape((batch, INPUT_HOURS, self.d_model))
        out = self.wo(ctx)
        if return_weights:
            return out, weights
        return out, None

    def __call__(self, x, rate, rng, training):
        attn, _ = self.attention(x)
        x = self.ln1(add(x, dropout(attn, rate, rng, training)))
        ff = self.ff2(relu(self.ff1(x)))
        x = self.ln2(add(x, dropout(ff, rate, rng, training)))
        return x


class TransformerModel(NeuralModel):
    architecture = "transformer"
    DEFAULTS = {"d_model": 64, "heads": 2, "encoder_layers": 2,
                "ff_dim": 128, "dropout": 0.1}

    def build(self, rng):
        check_config(self.architecture, self.config,
                     counts=("d_model", "heads", "encoder_layers", "ff_dim"),
                     rates=("dropout",))
        d_model, heads = self.config["d_model"], self.config["heads"]
        if d_model % heads != 0:
            raise ConfigError(
                f"transformer: d_model {d_model} not divisible by heads {heads}")
        self.embed = self.register(
            Linear(INPUT_FEATURES, d_model, rng.derive("embed"), "embed"))
        self.pe = sinusoidal_encoding(INPUT_HOURS, d_model)
        self.layers = []
        for i in range(self.config["encoder_layers"]):
            layer = EncoderLayer(d_model, heads, self.config["ff_dim"],
                                 rng.derive(f"enc{i}"), f"enc{i}")
            self.register(layer)
            self.layers.append(layer)
        self.head = self.register(Linear(d_model, OUTPUT_HOURS, rng.derive("head"), "head"))

    def encode(self, x: Tensor, training: bool) -> Tensor:
        rate = self.config["dropout"]
        h = add(self.embed(x), Tensor(self.pe, validate=False))
        h = dropout(h, rate, self._dropout_rng, training)
        for layer in self.layers:
            h = layer(h, rate, self._dropout_rng, training)
        return h

    def forward(self, x, training=False):
        h = self.encode(x, training)
        return self.head(mean(h, axis=1))

    def attention_weights(self, x: Tensor) -> list[np.ndarray]:
        """Per-layer eval-mode attention tensors (B, heads, 24, 24)."""
        h = add(self.embed(x), Tensor(self.pe, validate=False))
        out = []
        for layer in self.layers:
            attn, w = layer.attention(h, return_weights=True)
            out.append(w.data)
            h = layer.ln1(add(h, attn))
            ff = layer.ff2(relu(layer.ff1(h)))
            h = layer.ln2(add(h, ff))
        return out
