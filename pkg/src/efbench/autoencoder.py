"""Convolutional autoencoder over (6, 24) windows.

Encoder shape chain: 24 -conv(k=2)-> 23 -pool(2)-> 11 -conv(k=3)-> 9
-pool(2)-> 4, with 8 channels at the end, so the flattened latent is 32.
The decoder mirrors it back to (6, 24) with upsampling and transposed
convolutions; the final layer is linear.
"""

from dataclasses import dataclass, field

import numpy as np

from efbench.autodiff import (Parameter, Tape, Tensor, conv1d, conv1d_transpose,
                              maxpool1d, relu, upsample1d)
from efbench.models.base import xavier_tensor
from efbench.optim import Optimizer, OptimizerConfig, mse_loss
from efbench.rng import RngStream
from efbench.training import EarlyStopper, TrainingDiverged

IN_CHANNELS = 6
IN_LENGTH = 24
LATENT_DIM = 32

ENC1_CHANNELS, ENC1_KERNEL = 16, 2
ENC2_CHANNELS, ENC2_KERNEL = 8, 3
POOL = 2
DEC1_KERNEL, DEC2_KERNEL = 3, 5


class AutoencoderModel:
    """Two-conv encoder and mirrored decoder; latent dimension 32."""

    architecture = "autoencoder"

    def __init__(self, rng: RngStream):
        def conv_param(c_out, c_in, k, name):
            return Parameter(xavier_tensor(rng.derive(name), (c_out, c_in, k),
                                           c_in * k, c_out * k), name + ".w")

        self.enc1_w = conv_param(ENC1_CHANNELS, IN_CHANNELS, ENC1_KERNEL, "enc1")
        self.enc1_b = Parameter(np.zeros(ENC1_CHANNELS), "enc1.b")
        self.enc2_w = conv_param(ENC2_CHANNELS, ENC1_CHANNELS, ENC2_KERNEL, "enc2")
        self.enc2_b = Parameter(np.zeros(ENC2_CHANNELS), "enc2.b")
        # transposed convs take (c_in, c_out, k)
        self.dec1_w = Parameter(xavier_tensor(rng.derive("dec1"),
                                              (ENC2_CHANNELS, ENC1_CHANNELS, DEC1_KERNEL),
                                              ENC2_CHANNELS * DEC1_KERNEL,
                                              ENC1_CHANNELS * DEC1_KERNEL), "dec1.w")
        self.dec1_b = Parameter(np.zeros(ENC1_CHANNELS), "dec1.b")
        self.dec2_w = Parameter(xavier_tensor(rng.derive("dec2"),
                                              (ENC1_CHANNELS, IN_CHANNELS, DEC2_KERNEL),
                                              ENC1_CHANNELS * DEC2_KERNEL,
                                              IN_CHANNELS * DEC2_KERNEL), "dec2.w")
        self.dec2_b = Parameter(np.zeros(IN_CHANNELS), "dec2.b")

    def parameters(self):
        return [self.enc1_w, self.enc1_b, self.enc2_w, self.enc2_b,
                self.dec1_w, self.dec1_b, self.dec2_w, self.dec2_b]

    def encode_tensor(self, x: Tensor) -> Tensor:
        if x.shape[1:] != (IN_CHANNELS, IN_LENGTH):
            raise ValueError(f"autoencoder expects (n, 6, 24) input, got {x.shape}")
        h = relu(conv1d(x, self.enc1_w, self.enc1_b))          # (n, 16, 23)
        h = maxpool1d(h, POOL, POOL)                           # (n, 16, 11)
        h = relu(conv1d(h, self.enc2_w, self.enc2_b))          # (n, 8, 9)
        h = maxpool1d(h, POOL, POOL)                           # (n, 8, 4)
        return h.reshape((x.shape[0], LATENT_DIM))

    def decode_tensor(self, latent: Tensor) -> Tensor:
        h = latent.reshape((latent.shape[0], ENC2_CHANNELS, 4))
        h = upsample1d(h, 2)                                   # (n, 8, 8)
        h = relu(conv1d_transpose(h, self.dec1_w, self.dec1_b))  # (n, 16, 10)
        h = upsample1d(h, 2)                                   # (n, 16, 20)
        return conv1d_transpose(h, self.dec2_w, self.dec2_b)   # (n, 6, 24), linear

    def reconstruct(self, x: Tensor) -> Tensor:
        return self.decode_tensor(self.encode_tensor(x))

    def encode(self, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Eval-mode latent features y1 for (n, 6, 24) arrays -> (n, 32)."""
        out = []
        for lo in range(0, inputs.shape[0], batch_size):
            x = Tensor(inputs[lo:lo + batch_size], validate=False)
            out.append(self.encode_tensor(x).data)
        return np.concatenate(out, axis=0)


@dataclass
class AutoencoderTrainResult:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


def reconstruction_loss(model: AutoencoderModel, inputs: np.ndarray,
                        batch_size: int = 512) -> float:
    total = 0.0
    for lo in range(0, inputs.shape[0], batch_size):
        x = inputs[lo:lo + batch_size]
        recon = model.reconstruct(Tensor(x, validate=False)).data
        total += ((recon - x) ** 2).sum()
    return total / inputs.size


def autoencoder_train(model: AutoencoderModel, train_inputs: np.ndarray,
                      val_inputs: np.ndarray | None = None, lr: float = 1e-4,
                      epochs: int = 100, batch_size: int = 64, patience: int = 5,
                      seed: int = 0) -> AutoencoderTrainResult:
    """Minimize reconstruction MSE with AdamW; early-stops on validation
    (or training, when no validation inputs are given) loss."""
    if train_inputs.shape[0] < 1:
        raise ValueError("autoencoder_train needs at least one training sample")
    opt = Optimizer(model.parameters(), OptimizerConfig(kind="adamw", learning_rate=lr))
    shuffle = RngStream(seed, "autoencoder/shuffle")
    stopper = EarlyStopper(patience)
    monitor = val_inputs if val_inputs is not None and len(val_inputs) else train_inputs
    result = AutoencoderTrainResult()
    best = [p.data.copy() for p in model.parameters()]

    n = train_inputs.shape[0]
    for epoch in range(1, epochs + 1):
        order = shuffle.permutation(n)
        epoch_total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            xb = Tensor(train_inputs[idx], validate=False)
            with Tape() as tape:
                loss = mse_loss(model.reconstruct(xb), xb)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(f"autoencoder: non-finite loss at epoch {epoch}")
            epoch_total += value * idx.size
            opt.step(tape.backward(loss))
        result.train_losses.append(epoch_total / n)
        monitored = reconstruction_loss(model, monitor, batch_size)
        result.val_losses.append(monitored)
        stop = stopper.update(epoch, monitored)
        if stopper.best_epoch == epoch:
            best = [p.data.copy() for p in model.parameters()]
        result.stopped_epoch = epoch
        if stop:
            break

    for p, saved in zip(model.parameters(), best):
        p.data[...] = saved
    result.best_epoch = stopper.best_epoch
    return result
