"""Regression head over the 4D encoding, trained with manual backprop.

The model concatenates encoder features with a learned species embedding
and feeds a small ReLU MLP that predicts live fuel moisture content as a
raw percentage. Training minimizes mean squared error with Adam, feature
tables at a higher learning rate than the network weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encoder import Earth4DConfig, Earth4DEncoder
from .errors import DomainError, TrainingDivergedError
from .optim import Adam, Parameter


def _normalize_name(name) -> str:
    return str(name).strip().casefold()


class SpeciesTable:
    """Embedding lookup over casefolded species names. Index 0 is the
    reserved unknown row: all zeros, never trained, used for names absent
    from the table (or empty)."""

    def __init__(self, names, dim: int = 32, rng=None, dtype=np.float32):
        seen = sorted({_normalize_name(n) for n in names} - {""})
        self.names = list(seen)
        self._index = {n: i + 1 for i, n in enumerate(self.names)}
        if rng is None:
            rng = np.random.default_rng(0)
        embedding = rng.normal(0.0, 0.1, size=(len(self.names) + 1, dim)).astype(dtype)
        embedding[0] = 0.0
        self.embedding = Parameter("species.embedding", embedding)

    @property
    def dim(self) -> int:
        return self.embedding.values.shape[1]

    def lookup(self, names, strict: bool = False) -> np.ndarray:
        out = np.empty(len(names), dtype=np.int64)
        for i, raw in enumerate(names):
            name = _normalize_name(raw)
            idx = self._index.get(name, 0)
            if strict and idx == 0 and name:
                raise DomainError(f"unknown species {raw!r}")
            out[i] = idx
        return out


class MLPHead:
    """Fully connected ReLU network ending in one linear output."""

    def __init__(self, in_dim: int, hidden=(256, 256), rng=None, dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        dims = [int(in_dim), *(int(h) for h in hidden), 1]
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            self.weights.append(Parameter(f"mlp.w{i}", w.astype(dtype)))
            self.biases.append(Parameter(f"mlp.b{i}", np.zeros(fan_out, dtype=dtype)))

    def parameters(self) -> list[Parameter]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x: np.ndarray, want_cache: bool = False):
        last = len(self.weights) - 1
        acts = [x]
        pres = []
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.values + b.values
            pres.append(z)
            h = z if i == last else np.maximum(z, 0.0)
            acts.append(h)
        if want_cache:
            return h, (acts, pres)
        return h

    def backward(self, cache, upstream: np.ndarray) -> np.ndarray:
        """Accumulate weight gradients and return dL/d(input)."""
        acts, pres = cache
        last = len(self.weights) - 1
        d = upstream
        for i in range(last, -1, -1):
            dz = d if i == last else d * (pres[i] > 0)
            self.weights[i].ensure_grad()
            self.weights[i].grad += acts[i].T @ dz
            self.biases[i].ensure_grad()
            self.biases[i].grad += dz.sum(axis=0)
            d = dz @ self.weights[i].values.T
        return d


@dataclass(frozen=True)
class Metrics:
    mae: float
    rmse: float
    r2: float
    count: int

    def to_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2, "count": self.count}


def compute_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Metrics:
    """MAE, RMSE, and R^2 in float64. R^2 is NaN when the targets have zero
    variance, where the ratio to explainable variance is undefined."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError("prediction and target shapes differ")
    if y_true.size == 0:
        raise ValueError("cannot compute metrics on an empty set")
    err = y_pred - y_true
    mae = float(np.mean(np.abs(err)))
    mse = float(np.mean(err * err))
    variance = float(np.mean((y_true - y_true.mean()) ** 2))
    r2 = float("nan") if variance == 0.0 else 1.0 - mse / variance
    return Metrics(mae=mae, rmse=float(math.sqrt(mse)), r2=r2, count=y_true.size)


@dataclass(frozen=True)
class RegressorConfig:
    species_dim: int = 32
    hidden: tuple = (256, 256)

    def to_dict(self) -> dict:
        return {"species_dim": self.species_dim, "hidden": list(self.hidden)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressorConfig":
        return cls(species_dim=int(d["species_dim"]), hidden=tuple(d["hidden"]))


@dataclass
class TrainConfig:
    steps: int = 5000
    batch_size: int = 4096
    lr_network: float = 1e-3
    lr_tables: float = 1e-2
    seed: int = 0
    eval_every: int = 500

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "batch_size": self.batch_size,
            "lr_network": self.lr_network,
            "lr_tables": self.lr_tables,
            "seed": self.seed,
            "eval_every": self.eval_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class LFMCRegressor:
    """Encoder + species embedding + MLP head."""

    def __init__(
        self,
        encoder: Earth4DEncoder,
        species: SpeciesTable,
        mlp: MLPHead,
        config: RegressorConfig,
    ):
        self.encoder = encoder
        self.species = species
        self.mlp = mlp
        self.config = config

    @classmethod
    def build(
        cls,
        encoder_config: Earth4DConfig | None = None,
        species_names=(),
        config: RegressorConfig | None = None,
        seed: int = 0,
    ) -> "LFMCRegressor":
        config = config if config is not None else RegressorConfig()
        encoder = Earth4DEncoder(encoder_config, seed=seed)
        rng = np.random.default_rng((seed, 1))
        species = SpeciesTable(species_names, dim=config.species_dim, rng=rng)
        mlp = MLPHead(
            encoder.output_dim + config.species_dim, hidden=config.hidden, rng=rng
        )
        return cls(encoder, species, mlp, config)

    def table_parameters(self) -> list[Parameter]:
        return self.encoder.parameters()

    def network_parameters(self) -> list[Parameter]:
        return [self.species.embedding, *self.mlp.parameters()]

    def parameters(self) -> list[Parameter]:
        return [*self.table_parameters(), *self.network_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def _features(self, points4: np.ndarray, species_idx: np.ndarray, hard: bool):
        feats = self.encoder.encode_batch(points4, hard=hard)
        embed = self.species.embedding.values[species_idx]
        return np.concatenate([feats, embed.astype(feats.dtype)], axis=1)

    def predict(
        self, points4: np.ndarray, species_idx: np.ndarray, hard: bool = True
    ) -> np.ndarray:
        x = self._features(points4, species_idx, hard)
        return self.mlp.forward(x)[:, 0].astype(np.float64)

    def forward_backward(
        self,
        points4: np.ndarray,
        species_idx: np.ndarray,
        targets: np.ndarray,
        hard: bool = False,
    ):
        """One training pass: returns (predictions, mse) and accumulates
        gradients on every parameter."""
        x = self._features(points4, species_idx, hard)
        out, cache = self.mlp.forward(x, want_cache=True)
        pred = out[:, 0].astype(np.float64)
        diff = pred - np.asarray(targets, dtype=np.float64)
        loss = float(np.mean(diff * diff))
        dy = ((2.0 / diff.size) * diff).astype(x.dtype)[:, None]
        dx = self.mlp.backward(cache, dy)
        split = self.encoder.output_dim
        self.encoder.encode_backward(points4, dx[:, :split], hard=hard)
        grad = self.species.embedding.ensure_grad()
        np.add.at(grad, species_idx, dx[:, split:])
        grad[0] = 0.0
        return pred, loss


def _first_nonfinite_name(regressor: LFMCRegressor) -> str:
    # corrupt values are the root cause; check them all before any grad,
    # which merely inherits the contamination
    for p in regressor.parameters():
        if not np.all(np.isfinite(p.values)):
            return p.name
    for p in regressor.parameters():
        if p.grad is not None and not np.all(np.isfinite(p.grad)):
            return f"{p.name}.grad"
    return "loss"


def train(
    regressor: LFMCRegressor,
    points4: np.ndarray,
    species_idx: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    val_points4: np.ndarray | None = None,
    val_species_idx: np.ndarray | None = None,
    val_targets: np.ndarray | None = None,
) -> dict:
    """Seeded minibatch training loop. Returns a history dict with one loss
    per step plus validation metrics at every eval_every interval."""
    n = points4.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty set")
    targets = np.asarray(targets, dtype=np.float64)
    # start the output at the target mean so early steps fit structure, not offset
    regressor.mlp.biases[-1].values[:] = targets.mean()
    optimizer = Adam(
        [
            (regressor.table_parameters(), config.lr_tables),
            (regressor.network_parameters(), config.lr_network),
        ]
    )
    rng = np.random.default_rng(config.seed)
    history = {
        "step": [],
        "loss": [],
        "eval_step": [],
        "val_mae": [],
        "val_rmse": [],
        "val_r2": [],
    }
    has_val = val_points4 is not None and val_points4.shape[0] > 0
    order = np.empty(0, dtype=np.int64)
    cursor = 0
    batch = min(config.batch_size, n)
    for step in range(1, config.steps + 1):
        if cursor + batch > order.size:
            order = rng.permutation(n)
            cursor = 0
        pick = order[cursor : cursor + batch]
        cursor += batch
        optimizer.zero_grad()
        _, loss = regressor.forward_backward(
            points4[pick], species_idx[pick], targets[pick]
        )
        if not math.isfinite(loss):
            raise TrainingDivergedError(
                f"step {step}: non-finite values in {_first_nonfinite_name(regressor)}"
            )
        optimizer.step()
        history["step"].append(step)
        history["loss"].append(loss)
        if has_val and (step % config.eval_every == 0 or step == config.steps):
            metrics = evaluate(regressor, val_points4, val_species_idx, val_targets)
            history["eval_step"].append(step)
            history["val_mae"].append(metrics.mae)
            history["val_rmse"].append(metrics.rmse)
            history["val_r2"].append(metrics.r2)
    return history


def evaluate(
    regressor: LFMCRegressor,
    points4: np.ndarray,
    species_idx: np.ndarray,
    targets: np.ndarray,
    hard: bool = True,
    batch_size: int = 8192,
) -> Metrics:
    """Batched inference metrics. Probed levels default to hard row
    selection, the deployment behavior."""
    preds = np.empty(points4.shape[0], dtype=np.float64)
    for start in range(0, points4.shape[0], batch_size):
        stop = start + batch_size
        preds[start:stop] = regressor.predict(
            points4[start:stop], species_idx[start:stop], hard=hard
        )
    return compute_metrics(np.asarray(targets, dtype=np.float64), preds)
