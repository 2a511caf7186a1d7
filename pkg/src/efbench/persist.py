"""EFBENCH1 model container.

Layout: 8-byte magic ``EFBENCH1``, one version byte, a uint32
little-endian length followed by a UTF-8 JSON header, then each parameter
tensor as a uint32 element count followed by raw little-endian float64
bytes, in declaration order. Neural parameter shapes are derivable from
the config, so only counts are stored; ensemble structure (tree counts
and sizes) rides in the header.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from efbench.data import ScalerParams, inverse_scale_energy
from efbench.models import NEURAL_MODELS, build_model
from efbench.models.ensembles import ENSEMBLE_MODELS, build_ensemble
from efbench.rng import RngStream

MAGIC = b"EFBENCH1"
VERSION = 1


class PersistError(ValueError):
    pass


@dataclass
class TrainedModel:
    """A fitted forecaster plus everything needed to reuse it: architecture
    id, config, the scaler that produced its inputs, and run metadata."""

    architecture: str
    config: dict
    model: object
    scaler: ScalerParams | None = None
    metadata: dict | None = None

    def predict_scaled(self, inputs: np.ndarray) -> np.ndarray:
        return self.model.predict(inputs)

    def predict_kwh(self, inputs: np.ndarray) -> np.ndarray:
        if self.scaler is None:
            raise PersistError("model carries no scaler; cannot produce kWh")
        return inverse_scale_energy(self.predict_scaled(inputs), self.scaler)


def _model_arrays(trained: TrainedModel) -> tuple[dict, list]:
    if trained.architecture in NEURAL_MODELS:
        return {}, [p.data.reshape(-1) for p in trained.model.parameters()]
    return dict(trained.model.state_header()), trained.model.state_arrays()


def save_model(trained: TrainedModel, path) -> None:
    extra, arrays = _model_arrays(trained)
    header = {
        "architecture": trained.architecture,
        "config": trained.config,
        "metadata": trained.metadata or {},
        "scaler": None if trained.scaler is None else {
            "x_min": trained.scaler.x_min.tolist(),
            "x_max": trained.scaler.x_max.tolist(),
        },
        "structure": extra,
        "array_count": len(arrays),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in arrays:
            flat = np.ascontiguousarray(arr, dtype="<f8").reshape(-1)
            fh.write(struct.pack("<I", flat.size))
            fh.write(flat.tobytes())


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise PersistError(f"corrupt model file: truncated while reading {what}")
    return data


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise PersistError(f"not an EFBENCH1 model file (magic {magic!r})")
        version = _read_exact(fh, 1, "version")[0]
        if version != VERSION:
            raise PersistError(f"unsupported model format version {version}")
        (blob_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        try:
            header = json.loads(_read_exact(fh, blob_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise PersistError(f"corrupt model file: bad header ({exc})") from None
        arrays = []
        for i in range(header["array_count"]):
            (count,) = struct.unpack("<I", _read_exact(fh, 4, f"array {i} length"))
            raw = _read_exact(fh, count * 8, f"array {i} data")
            arrays.append(np.frombuffer(raw, dtype="<f8").copy())
        if fh.read(1):
            raise PersistError("corrupt model file: trailing bytes")

    architecture = header["architecture"]
    config = header["config"]
    scaler = None
    if header.get("scaler"):
        scaler = ScalerParams(np.asarray(header["scaler"]["x_min"]),
                              np.asarray(header["scaler"]["x_max"]))

    if architecture in NEURAL_MODELS:
        model = build_model(architecture, config, RngStream(0, "load"))
        params = model.parameters()
        if len(params) != len(arrays):
            raise PersistError(f"model file holds {len(arrays)} tensors but "
                               f"{architecture} declares {len(params)}")
        for p, flat in zip(params, arrays):
            if flat.size != p.data.size:
                raise PersistError(f"tensor size mismatch for {p.name}: "
                                   f"file {flat.size} vs config {p.data.size}")
            p.data[...] = flat.reshape(p.data.shape)
    elif architecture in ENSEMBLE_MODELS:
        try:
            model = ENSEMBLE_MODELS[architecture].from_state(
                config, header["structure"], arrays)
        except (ValueError, IndexError, KeyError) as exc:
            raise PersistError(f"corrupt {architecture} state: {exc}") from None
    else:
        raise PersistError(f"unknown architecture {architecture!r} in model file")

    return TrainedModel(architecture=architecture, config=config, model=model,
                        scaler=scaler, metadata=header.get("metadata", {}))
