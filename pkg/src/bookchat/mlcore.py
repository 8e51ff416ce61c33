"""Minimal trainable models: a linear layer or one tanh hidden layer,
trained by seeded mini-batch gradient descent.

Shapes and the weight-generation order (w1, b1, w2, b2 for hidden models;
w, b for linear) are fixed so that training is bit-reproducible from
(spec, dataset, hyperparams).  Binary classification applies a sigmoid to
the single output; regression output is clamped to ``spec.output_range``
at inference only, never during training, so gradients stay exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lexicon import FeatureVector, feature_length

TASKS = ("binary_classification", "regression")


class ModelError(ValueError):
    """Bad model file or inconsistent model state."""


class TrainingError(RuntimeError):
    """Training cannot proceed (empty data, single class, diverging loss)."""


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    hidden_dim: int  # 0 = linear model
    output_dim: int
    task: str
    feature_schema_id: str
    output_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.input_dim <= 0 or self.output_dim <= 0 or self.hidden_dim < 0:
            raise ModelError("dims must be positive (hidden_dim may be 0)")
        if self.task not in TASKS:
            raise ModelError(f"unknown task {self.task!r}")
        if self.task == "binary_classification" and self.output_dim != 1:
            raise ModelError("binary_classification forces output_dim = 1")
        if self.output_dim != 1:
            raise ModelError("only scalar outputs are supported")
        if feature_length(self.feature_schema_id) != self.input_dim:
            raise ModelError(
                f"schema {self.feature_schema_id} has length "
                f"{feature_length(self.feature_schema_id)}, spec says {self.input_dim}"
            )


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 16
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs <= 0 or self.batch_size <= 0 or self.l2 < 0:
            raise ValueError("bad hyperparameters")


@dataclass
class Model:
    spec: ModelSpec
    weights: dict[str, np.ndarray]
    train_meta: dict = field(default_factory=dict)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _raw_output(weights: dict[str, np.ndarray], spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    if spec.hidden_dim == 0:
        return X @ weights["w"] + weights["b"]
    a = np.tanh(X @ weights["w1"].T + weights["b1"])
    return a @ weights["w2"] + weights["b2"]


def _check_input(model: Model, x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        if x.schema_id != model.spec.feature_schema_id:
            raise ValueError(
                f"feature schema {x.schema_id!r} does not match model schema "
                f"{model.spec.feature_schema_id!r}"
            )
        x = x.values
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.spec.input_dim,):
        raise ValueError(f"expected input of length {model.spec.input_dim}, got {x.shape}")
    return x


def forward(model: Model, x: FeatureVector | np.ndarray, clamp: bool = True) -> float:
    """Scalar model output.  Sigmoid for classifiers; optional range clamp
    for regressors (inference only)."""
    xv = _check_input(model, x)
    z = float(_raw_output(model.weights, model.spec, xv[None, :])[0])
    if model.spec.task == "binary_classification":
        return float(_sigmoid(np.array([z]))[0])
    if clamp and model.spec.output_range is not None:
        lo, hi = model.spec.output_range
        z = min(hi, max(lo, z))
    return z


def _loss_and_grads(
    weights: dict[str, np.ndarray], spec: ModelSpec, X: np.ndarray, y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean data loss over the batch and its gradient for every weight.

    Classification: logit cross-entropy, dL/dz = sigmoid(z) - y.
    Regression: mean squared error, dL/dz = 2 (z - y) / n.
    """
    n = X.shape[0]
    if spec.hidden_dim == 0:
        z = X @ weights["w"] + weights["b"]
        loss, dz = _scalar_loss(spec, z, y)
        return loss, {"w": X.T @ dz, "b": np.array(dz.sum())}
    h = X @ weights["w1"].T + weights["b1"]
    a = np.tanh(h)
    z = a @ weights["w2"] + weights["b2"]
    loss, dz = _scalar_loss(spec, z, y)
    dw2 = a.T @ dz
    db2 = np.array(dz.sum())
    da = np.outer(dz, weights["w2"])
    dh = da * (1.0 - a * a)
    return loss, {"w1": dh.T @ X, "b1": dh.sum(axis=0), "w2": dw2, "b2": db2}


def _scalar_loss(spec: ModelSpec, z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    n = len(z)
    if spec.task == "binary_classification":
        # stable form of -[y log p + (1-y) log (1-p)] from the logit
        loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
        dz = (_sigmoid(z) - y) / n
    else:
        diff = z - y
        loss = float(np.mean(diff * diff))
        dz = 2.0 * diff / n
    return loss, dz


def _init_weights(spec: ModelSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    def uniform(fan_in: int, shape) -> np.ndarray:
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    d = spec.input_dim
    if spec.hidden_dim == 0:
        return {"w": uniform(d, d), "b": np.array(uniform(d, ()))}
    h = spec.hidden_dim
    return {
        "w1": uniform(d, (h, d)),
        "b1": uniform(d, h),
        "w2": uniform(h, h),
        "b2": np.array(uniform(h, ())),
    }


def _as_matrix(spec: ModelSpec, dataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.empty((len(dataset), spec.input_dim))
    y = np.empty(len(dataset))
    for i, (fv, target) in enumerate(dataset):
        if isinstance(fv, FeatureVector):
            if fv.schema_id != spec.feature_schema_id:
                raise ValueError(f"sample {i}: schema {fv.schema_id!r} != {spec.feature_schema_id!r}")
            X[i] = fv.values
        else:
            X[i] = np.asarray(fv, dtype=np.float64)
        y[i] = float(target)
    if spec.task == "binary_classification" and not np.all(np.isin(y, (0.0, 1.0))):
        raise TrainingError("classification targets must be 0/1")
    return X, y


def train(spec: ModelSpec, dataset, hyper: Hyperparams) -> Model:
    """Seeded mini-batch gradient descent; bit-reproducible."""
    if not dataset:
        raise TrainingError("empty dataset")
    X, y = _as_matrix(spec, dataset)
    rng = np.random.default_rng(hyper.seed)
    weights = _init_weights(spec, rng)
    n = len(dataset)
    loss = math.nan
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            loss, grads = _loss_and_grads(weights, spec, X[idx], y[idx])
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            for name, g in grads.items():
                penalty = hyper.l2 * weights[name] if name.startswith("w") else 0.0
                weights[name] = weights[name] - hyper.learning_rate * (g + penalty)
    final_loss, _ = _loss_and_grads(weights, spec, X, y)
    return Model(
        spec=spec,
        weights=weights,
        train_meta={"seed": hyper.seed, "epochs_run": hyper.epochs, "final_loss": final_loss},
    )


def grad_check(model: Model, x, target: float, h: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central finite
    differences of the per-sample data loss, over every weight."""
    xv = _check_input(model, x)
    X = xv[None, :]
    y = np.array([float(target)])
    _, grads = _loss_and_grads(model.weights, model.spec, X, y)
    worst = 0.0
    for name, w in model.weights.items():
        flat = np.atleast_1d(w).astype(np.float64)
        g_flat = np.atleast_1d(grads[name])
        for i in range(flat.size):
            perturbed = {k: v.copy() for k, v in model.weights.items()}
            pw = np.atleast_1d(perturbed[name])
            orig = pw.flat[i]
            pw.flat[i] = orig + h
            lo_plus, _ = _loss_and_grads(perturbed, model.spec, X, y)
            pw.flat[i] = orig - h
            lo_minus, _ = _loss_and_grads(perturbed, model.spec, X, y)
            numeric = (lo_plus - lo_minus) / (2.0 * h)
            analytic = g_flat.flat[i]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Serialization

_FILE_FORMAT = "bookchat-model"
_FILE_VERSION = 1


def save_model(model: Model, path: str | Path) -> None:
    payload = {
        "format": _FILE_FORMAT,
        "version": _FILE_VERSION,
        "spec": {
            "input_dim": model.spec.input_dim,
            "hidden_dim": model.spec.hidden_dim,
            "output_dim": model.spec.output_dim,
            "task": model.spec.task,
            "feature_schema_id": model.spec.feature_schema_id,
            "output_range": list(model.spec.output_range) if model.spec.output_range else None,
        },
        "schema_id": model.spec.feature_schema_id,
        "seed": model.train_meta.get("seed"),
        "train_meta": model.train_meta,
        "weights": {name: w.tolist() for name, w in model.weights.items()},
    }
    # json floats round-trip exactly (repr is shortest-round-trip)
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_model(path: str | Path, expect_schema: str | None = None) -> Model:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != _FILE_FORMAT:
        raise ModelError(f"{path}: not a model file")
    if payload.get("version") != _FILE_VERSION:
        raise ModelError(f"{path}: unsupported model version {payload.get('version')!r}")
    try:
        s = payload["spec"]
        spec = ModelSpec(
            input_dim=s["input_dim"],
            hidden_dim=s["hidden_dim"],
            output_dim=s["output_dim"],
            task=s["task"],
            feature_schema_id=s["feature_schema_id"],
            output_range=tuple(s["output_range"]) if s.get("output_range") else None,
        )
        weights = {name: np.array(w, dtype=np.float64) for name, w in payload["weights"].items()}
    except (KeyError, TypeError) as exc:
        raise ModelError(f"{path}: malformed model file: {exc}") from exc
    if expect_schema is not None and spec.feature_schema_id != expect_schema:
        raise ModelError(
            f"{path}: model schema {spec.feature_schema_id!r} does not match expected {expect_schema!r}"
        )
    expected_names = {"w", "b"} if spec.hidden_dim == 0 else {"w1", "b1", "w2", "b2"}
    if set(weights) != expected_names:
        raise ModelError(f"{path}: weight names {sorted(weights)} do not match spec")
    for w in weights.values():
        if not np.all(np.isfinite(w)):
            raise ModelError(f"{path}: non-finite weights")
    model = Model(spec=spec, weights=weights, train_meta=payload.get("train_meta", {}))
    # shape check via a forward pass on zeros
    try:
        forward(model, np.zeros(spec.input_dim))
    except Exception as exc:
        raise ModelError(f"{path}: inconsistent weight shapes: {exc}") from exc
    return model


def zero_model(spec: ModelSpec) -> Model:
    """All-zero weights; handy as the untrained baseline."""
    rng = np.random.default_rng(0)
    weights = {k: np.zeros_like(v) for k, v in _init_weights(spec, rng).items()}
    return Model(spec=spec, weights=weights, train_meta={"seed": 0, "epochs_run": 0, "final_loss": None})
