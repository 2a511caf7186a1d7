"""Feed-forward forecasters: MLP, AR-style net, and the residual block stack."""

from efbench.autodiff import Tensor, concat, relu, sub
from efbench.models.base import (FLAT_INPUT, OUTPUT_HOURS, Linear, NeuralModel,
                                 check_config, dropout, flatten_window)


class MlpModel(NeuralModel):
    """Two fully connected layers with dropout before the output layer."""

    architecture = "mlp"
    DEFAULTS = {"units": 32, "dropout": 0.1}

    def build(self, rng):
        check_config(self.architecture, self.config, counts=("units",), rates=("dropout",))
        units = self.config["units"]
        self.fc1 = self.register(Linear(FLAT_INPUT, units, rng.derive("fc1"), "fc1"))
        self.fc2 = self.register(Linear(units, OUTPUT_HOURS, rng.derive("fc2"), "fc2"))

    def forward(self, x, training=False):
        h = relu(self.fc1(flatten_window(x)))
        h = dropout(h, self.config["dropout"], self._dropout_rng, training)
        return self.fc2(h)


class ArNetModel(NeuralModel):
    """Linear first layer (auto-regressive coefficients) feeding two hidden
    ReLU layers and the forecast head."""

    architecture = "arnet"
    DEFAULTS = {"units": 64}

    def build(self, rng):
        check_config(self.architecture, self.config, counts=("units",))
        units = self.config["units"]
        self.ar = self.register(Linear(FLAT_INPUT, units, rng.derive("ar"), "ar"))
        self.fc1 = self.register(Linear(units, units, rng.derive("fc1"), "fc1"))
        self.fc2 = self.register(Linear(units, units, rng.derive("fc2"), "fc2"))
        self.head = self.register(Linear(units, OUTPUT_HOURS, rng.derive("head"), "head"))

    def forward(self, x, training=False):
        h = self.ar(flatten_window(x))          # no activation: AR coefficients
        h = relu(self.fc1(h))
        h = relu(self.fc2(h))
        return self.head(h)


class NBeatsModel(NeuralModel):
    """Stack of generic blocks with backcast residuals and summed forecasts."""

    architecture = "nbeats"
    DEFAULTS = {"blocks": 6, "hidden_layers": 4, "units": 512}

    def build(self, rng):
        check_config(self.architecture, self.config,
                     counts=("blocks", "hidden_layers", "units"))
        units = self.config["units"]
        self.blocks = []
        for b in range(self.config["blocks"]):
            brng = rng.derive(f"block{b}")
            layers = []
            n_in = FLAT_INPUT
            for l in range(self.config["hidden_layers"]):
                layers.append(self.register(
                    Linear(n_in, units, brng.derive(f"fc{l}"), f"b{b}.fc{l}")))
                n_in = units
            backcast = self.register(Linear(units, FLAT_INPUT, brng.derive("back"), f"b{b}.back"))
            forecast = self.register(Linear(units, OUTPUT_HOURS, brng.derive("fore"), f"b{b}.fore"))
            self.blocks.append((layers, backcast, forecast))

    def forward(self, x, training=False, return_block_forecasts=False):
        residual = flatten_window(x)
        total = None
        per_block = []
        for layers, backcast, forecast in self.blocks:
            h = residual
            for layer in layers:
                h = relu(layer(h))
            residual = sub(residual, backcast(h))
            f = forecast(h)
            per_block.append(f)
            total = f if total is None else total + f
        if return_block_forecasts:
            return total, per_block
        return total
