"""Architecture registry for the neural forecasters."""

from efbench.models.base import ConfigError, NeuralModel, count_parameters
from efbench.models.convnet import TcnModel
from efbench.models.feedforward import ArNetModel, MlpModel, NBeatsModel
from efbench.models.hypernet import HyperNetLstmModel
from efbench.models.recurrent import AttentionLstmModel, GruModel, LstmModel, RnnModel
from efbench.models.transformer import TransformerModel
from efbench.rng import RngStream

NEURAL_MODELS = {
    cls.architecture: cls
    for cls in (MlpModel, TcnModel, RnnModel, LstmModel, GruModel,
                AttentionLstmModel, TransformerModel, NBeatsModel,
                ArNetModel, HyperNetLstmModel)
}


def build_model(architecture: str, config: dict | None, rng: RngStream) -> NeuralModel:
    try:
        cls = NEURAL_MODELS[architecture]
    except KeyError:
        raise ConfigError(f"unknown neural architecture {architecture!r}; "
                          f"expected one of {sorted(NEURAL_MODELS)}") from None
    return cls(config, rng)


__all__ = ["NEURAL_MODELS", "build_model", "count_parameters", "ConfigError",
           "NeuralModel", "MlpModel", "TcnModel", "RnnModel", "LstmModel", "GruModel",
           "AttentionLstmModel", "TransformerModel", "NBeatsModel", "ArNetModel",
           "HyperNetLstmModel"]
