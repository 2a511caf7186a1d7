"""EFBENCH1 container: bit-exact round trips for every architecture, format
validation, and corruption handling."""

import numpy as np
import pytest

from efbench.autodiff import Tensor
from efbench.models import NEURAL_MODELS, build_model
from efbench.models.ensembles import ENSEMBLE_MODELS, build_ensemble
from efbench.persist import MAGIC, PersistError, TrainedModel, load_model, save_model
from efbench.rng import RngStream

SMALL_CONFIGS = {
    "mlp": {"units": 8},
    "tcn": {"units": 4},
    "rnn": {"units": 5},
    "lstm": {"units": 5},
    "gru": {"units": 5},
    "attention_lstm": {"units": 5},
    "transformer": {"d_model": 8, "heads": 2, "encoder_layers": 1, "ff_dim": 12},
    "nbeats": {"blocks": 2, "hidden_layers": 2, "units": 6},
    "arnet": {"units": 6},
    "hypernet_lstm": {"units": 3, "hyper_units1": 8, "hyper_units2": 6},
}

ENSEMBLE_CONFIGS = {
    "miniwsgd": {"sgd_epochs": 2},
    "miniwxgboost": {"n_rounds": 3, "max_depth": 2},
    "miniautoencxgboost": {"n_rounds": 3, "max_depth": 2, "ae_epochs": 2},
}


@pytest.mark.parametrize("arch", sorted(NEURAL_MODELS))
def test_neural_roundtrip_bit_exact(arch, tmp_path, small_dataset, batch_xy):
    x, _ = batch_xy
    model = build_model(arch, SMALL_CONFIGS[arch], RngStream(17, arch))
    trained = TrainedModel(arch, dict(model.config), model, small_dataset.scaler,
                           metadata={"seed": 17})
    path = tmp_path / f"{arch}.efb"
    save_model(trained, path)
    loaded = load_model(path)

    original = model.predict(x)
    restored = loaded.model.predict(x)
    assert original.tobytes() == restored.tobytes()
    for p, q in zip(model.parameters(), loaded.model.parameters()):
        assert p.data.tobytes() == q.data.tobytes()
    assert loaded.config == trained.config
    np.testing.assert_array_equal(loaded.scaler.x_min, small_dataset.scaler.x_min)


@pytest.mark.parametrize("arch", sorted(ENSEMBLE_MODELS))
def test_ensemble_roundtrip_bit_exact(arch, tmp_path, small_dataset):
    model = build_ensemble(arch, ENSEMBLE_CONFIGS[arch]).fit(small_dataset, seed=23)
    trained = TrainedModel(arch, dict(model.config), model, small_dataset.scaler)
    path = tmp_path / f"{arch}.efb"
    save_model(trained, path)
    loaded = load_model(path)

    idx = small_dataset.indices("test")[:40]
    original = model.predict(small_dataset.inputs[idx])
    restored = loaded.model.predict(small_dataset.inputs[idx])
    assert original.tobytes() == restored.tobytes()


class TestFormat:
    def make_file(self, tmp_path, small_dataset):
        model = build_model("mlp", {"units": 4}, RngStream(3, "mlp"))
        trained = TrainedModel("mlp", dict(model.config), model, small_dataset.scaler)
        path = tmp_path / "m.efb"
        save_model(trained, path)
        return path

    def test_magic_bytes_lead_the_file(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        assert path.read_bytes()[:8] == MAGIC == b"EFBENCH1"

    def test_magic_mismatch_rejected(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        raw = bytearray(path.read_bytes())
        raw[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(raw))
        with pytest.raises(PersistError, match="magic"):
            load_model(path)

    def test_version_mismatch_rejected(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        raw = bytearray(path.read_bytes())
        raw[8] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(PersistError, match="version"):
            load_model(path)

    def test_truncated_file_rejected(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) - 16])
        with pytest.raises(PersistError, match="truncated"):
            load_model(path)

    def test_trailing_bytes_rejected(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(PersistError, match="trailing"):
            load_model(path)

    def test_config_tensor_shape_inconsistency_rejected(self, tmp_path, small_dataset):
        path = self.make_file(tmp_path, small_dataset)
        raw = path.read_bytes()
        # tamper with the config inside the header so declared shapes shrink
        import json, struct
        blob_len = struct.unpack("<I", raw[9:13])[0]
        header = json.loads(raw[13:13 + blob_len])
        header["config"]["units"] = 2
        blob = json.dumps(header, sort_keys=True).encode()
        path.write_bytes(raw[:9] + struct.pack("<I", len(blob)) + blob
                         + raw[13 + blob_len:])
        with pytest.raises(PersistError, match="size mismatch"):
            load_model(path)

    def test_predict_kwh_requires_scaler(self, tmp_path):
        model = build_model("mlp", {"units": 4}, RngStream(3, "mlp"))
        trained = TrainedModel("mlp", dict(model.config), model, scaler=None)
        with pytest.raises(PersistError, match="scaler"):
            trained.predict_kwh(np.zeros((1, 24, 6)))
