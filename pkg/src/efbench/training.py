"""Training loop, early stopping, and grid search.

Validation is monitored after every epoch with dropout off; training halts
once the loss fails to improve for ``patience`` consecutive epochs and the
parameters from the best epoch are restored. Grid points are enumerated in
declaration order and ranked by best validation loss.
"""

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from efbench.autodiff import Tape, Tensor
from efbench.data import WindowedDataset
from efbench.optim import Optimizer, OptimizerConfig, get_loss
from efbench.rng import RngStream

EPOCH_CAP_DEFAULT = 200
PATIENCE_DEFAULT = 5
BATCH_SIZE_DEFAULT = 64
IMPROVEMENT_TOLERANCE = 1e-9


class TrainingDiverged(RuntimeError):
    pass


class GridSearchFailed(RuntimeError):
    pass


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without improvement.

    Improvement means the validation loss drops below the best seen minus a
    small absolute tolerance; the counter resets on every improvement.
    """

    def __init__(self, patience: int = PATIENCE_DEFAULT,
                 tolerance: float = IMPROVEMENT_TOLERANCE):
        self.patience = patience
        self.tolerance = tolerance
        self.best = np.inf
        self.best_epoch = 0
        self.counter = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best - self.tolerance:
            self.best = val_loss
            self.best_epoch = epoch
            self.counter = 0
        else:
            self.counter += 1
        return self.counter >= self.patience


@dataclass
class TrainRunResult:
    architecture: str
    config: dict
    optimizer: dict
    loss_kind: str
    seed: int
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_val_loss: float = np.inf
    n_parameters: int = 0
    wall_time_s: float = 0.0
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def _epoch_loss(model, inputs, targets, loss_kind: str, batch_size: int) -> float:
    """Eval-mode loss over a whole split, pooled across every element."""
    total = 0.0
    n = inputs.shape[0]
    for lo in range(0, n, batch_size):
        pred = model.forward(Tensor(inputs[lo:lo + batch_size], validate=False),
                             training=False).data
        diff = pred - targets[lo:lo + batch_size]
        if loss_kind == "mae":
            total += np.abs(diff).sum()
        else:
            total += (diff * diff).sum()
    return total / targets.size


def train(model, dataset: WindowedDataset, opt_cfg: OptimizerConfig,
          loss_kind: str = "mse", epoch_cap: int = EPOCH_CAP_DEFAULT,
          patience: int = PATIENCE_DEFAULT, batch_size: int = BATCH_SIZE_DEFAULT,
          seed: int = 0) -> TrainRunResult:
    """Mini-batch training with early stopping; restores best-epoch weights.

    A non-finite training loss aborts the run by raising TrainingDiverged.
    """
    from efbench.models.base import count_parameters

    loss_fn = get_loss(loss_kind)
    x_train, y_train = dataset.subset("train")
    x_val, y_val = dataset.subset("val")
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("train() needs non-empty train and val splits")

    result = TrainRunResult(architecture=model.architecture, config=dict(model.config),
                            optimizer=vars(opt_cfg).copy(), loss_kind=loss_kind,
                            seed=seed, n_parameters=count_parameters(model))
    opt = Optimizer(model.parameters(), opt_cfg)
    shuffle_rng = RngStream(seed, "train/shuffle")
    stopper = EarlyStopper(patience)
    best_params = [p.data.copy() for p in model.parameters()]
    started = time.perf_counter()

    n = x_train.shape[0]
    for epoch in range(1, epoch_cap + 1):
        order = shuffle_rng.permutation(n)
        epoch_total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            xb = Tensor(x_train[idx], validate=False)
            yb = Tensor(y_train[idx], validate=False)
            with Tape() as tape:
                loss = loss_fn(model.forward(xb, training=True), yb)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"{model.architecture}: non-finite training loss at epoch {epoch}")
            epoch_total += value * idx.size
            opt.step(tape.backward(loss))

        result.train_losses.append(epoch_total / n)
        val_loss = _epoch_loss(model, x_val, y_val, loss_kind, batch_size)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(
                f"{model.architecture}: non-finite validation loss at epoch {epoch}")
        result.val_losses.append(val_loss)
        should_stop = stopper.update(epoch, val_loss)
        if stopper.best_epoch == epoch:
            best_params = [p.data.copy() for p in model.parameters()]
        result.stopped_epoch = epoch
        if should_stop:
            break

    for p, saved in zip(model.parameters(), best_params):
        p.data[...] = saved
    result.best_epoch = stopper.best_epoch
    result.best_val_loss = float(stopper.best)
    result.wall_time_s = time.perf_counter() - started
    return result


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

OPTIMIZER_KEYS = ("optimizer", "learning_rate", "weight_decay")


@dataclass
class SearchSpace:
    """Per-hyperparameter candidate lists; the grid is their product.

    Keys naming optimizer settings (``optimizer``, ``learning_rate``,
    ``weight_decay``) and ``loss`` are routed there; everything else is a
    model config field.
    """

    fields: dict

    def __post_init__(self):
        if not self.fields or any(len(v) == 0 for v in self.fields.values()):
            raise ValueError("search space needs at least one candidate per field")

    def cardinality(self) -> int:
        out = 1
        for values in self.fields.values():
            out *= len(values)
        return out

    def points(self):
        keys = list(self.fields)
        for combo in itertools.product(*(self.fields[k] for k in keys)):
            yield dict(zip(keys, combo))


def split_point(point: dict) -> tuple[dict, dict, str]:
    """Partition a grid point into (model config, optimizer kwargs, loss kind)."""
    config, opt_kwargs = {}, {}
    loss_kind = "mse"
    for key, value in point.items():
        if key == "loss":
            loss_kind = value
        elif key == "optimizer":
            opt_kwargs["kind"] = value
        elif key in OPTIMIZER_KEYS:
            opt_kwargs[key] = value
        else:
            config[key] = value
    return config, opt_kwargs, loss_kind


def point_seed_name(architecture: str, point: dict) -> str:
    return f"grid/{architecture}/{json.dumps(point, sort_keys=True)}"


def run_grid_point(architecture: str, point: dict, dataset: WindowedDataset,
                   master_seed: int, epoch_cap: int, patience: int,
                   batch_size: int) -> TrainRunResult:
    """Train one grid point; identical (config, seed) gives identical results."""
    from efbench.models import build_model

    config, opt_kwargs, loss_kind = split_point(point)
    rng = RngStream(master_seed, point_seed_name(architecture, point))
    try:
        model = build_model(architecture, config, rng)
        opt_cfg = OptimizerConfig(**opt_kwargs)
        result = train(model, dataset, opt_cfg, loss_kind=loss_kind,
                       epoch_cap=epoch_cap, patience=patience,
                       batch_size=batch_size, seed=rng.seed)
    except (TrainingDiverged, ValueError) as exc:
        return TrainRunResult(architecture=architecture, config=config,
                              optimizer=opt_kwargs, loss_kind=loss_kind,
                              seed=master_seed, error=str(exc))
    return result


def grid_search(space: SearchSpace, architecture: str, dataset: WindowedDataset,
                seed: int, epoch_cap: int = EPOCH_CAP_DEFAULT,
                patience: int = PATIENCE_DEFAULT,
                batch_size: int = BATCH_SIZE_DEFAULT,
                workers: int = 1) -> list[TrainRunResult]:
    """One training run per grid point, ranked ascending by validation loss.

    Failed (diverged) runs are kept at the tail with their diagnostics; ties
    break by fewer parameters, then enumeration order. Worker-pool execution
    merges by enumeration index, so parallel and serial runs agree.
    """
    points = list(space.points())
    if workers > 1 and len(points) > 1:
        results = _parallel_grid(points, architecture, dataset, seed,
                                 epoch_cap, patience, batch_size, workers)
    else:
        results = [run_grid_point(architecture, p, dataset, seed,
                                  epoch_cap, patience, batch_size)
                   for p in points]

    if all(r.failed for r in results):
        details = "; ".join(f"{r.config}: {r.error}" for r in results)
        raise GridSearchFailed(f"every grid point failed: {details}")

    order = sorted(range(len(results)),
                   key=lambda i: (results[i].failed,
                                  results[i].best_val_loss,
                                  results[i].n_parameters, i))
    return [results[i] for i in order]


def _parallel_grid(points, architecture, dataset, seed, epoch_cap, patience,
                   batch_size, workers):
    import concurrent.futures as cf

    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_grid_point, architecture, p, dataset, seed,
                               epoch_cap, patience, batch_size)
                   for p in points]
        return [f.result() for f in futures]
