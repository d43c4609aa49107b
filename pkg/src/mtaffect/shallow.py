"""Linear SVM (one-vs-rest hinge) and epsilon-insensitive SVR trained on
extracted shared representations by deterministic epoch-shuffled subgradient
descent with the 1/(lambda * t) step schedule, lambda = 1/(C * n).

Features are z-scored with training statistics by default (the inputs mix
pooled activations with raw lexicon sums); the statistics ride along in the
saved model so prediction reproduces training-time scaling exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

N_CLASSES = 7
SHALLOW_MAGIC = b"MTAFSHL1"


class ShallowError(ValueError):
    pass


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray  # per-dim std with zeros replaced by 1

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std == 0.0] = 1.0
        return cls(mean=mean, scale=std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def _check_matrix(x: np.ndarray, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShallowError(f"expected a 2-d feature matrix, got shape {x.shape}")
    if dim is not None and x.shape[1] != dim:
        raise ShallowError(f"feature width {x.shape[1]}, model expects {dim}")
    return x


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # [7, dim]
    biases: np.ndarray  # [7]
    c: float
    standardizer: Standardizer | None

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        x = _check_matrix(x, self.dim)
        if self.standardizer is not None:
            x = self.standardizer.apply(x)
        return x @ self.weights.T + self.biases


@dataclass
class SvrModel:
    weights: np.ndarray  # [dim]
    bias: float
    epsilon: float
    c: float
    standardizer: Standardizer | None
    objective_history: list[float]

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def raw_values(self, x: np.ndarray) -> np.ndarray:
        x = _check_matrix(x, self.dim)
        if self.standardizer is not None:
            x = self.standardizer.apply(x)
        return x @ self.weights + self.bias


def train_svm(
    x: np.ndarray,
    y,
    c: float = 1.0,
    epochs: int = 50,
    seed: int = 0,
    standardize: bool = True,
) -> LinearSvmModel:
    """One-vs-rest L2-regularized hinge SVM via per-sample subgradient steps.

    y holds class ordinals in -3..3. Classes absent from the data keep their
    zero rows, so degenerate label sets still produce a usable model.
    """
    x = _check_matrix(x)
    y = np.asarray([int(v) for v in y], dtype=int)
    n, dim = x.shape
    if y.shape != (n,):
        raise ShallowError(f"labels shape {y.shape}, expected ({n},)")
    if c <= 0:
        raise ShallowError(f"C must be positive, got {c}")
    std = Standardizer.fit(x) if standardize else None
    if std is not None:
        x = std.apply(x)
    lam = 1.0 / (c * n)
    rng = np.random.default_rng(seed)
    weights = np.zeros((N_CLASSES, dim))
    biases = np.zeros(N_CLASSES)
    present = sorted(set(y.tolist()))
    for ordinal in present:
        k = ordinal + 3
        targets = np.where(y == ordinal, 1.0, -1.0)
        w = weights[k]
        b = 0.0
        step = 0
        for _ in range(epochs):
            for i in rng.permutation(n):
                step += 1
                eta = 1.0 / (lam * step)
                margin = targets[i] * (x[i] @ w + b)
                w *= 1.0 - eta * lam
                if margin < 1.0:
                    w += eta * targets[i] * x[i]
                    b += eta * targets[i]
        biases[k] = b
    return LinearSvmModel(weights=weights, biases=biases, c=c, standardizer=std)


def predict_svm(model: LinearSvmModel, x: np.ndarray) -> np.ndarray:
    """Predicted class ordinals; ties go to the lower ordinal."""
    values = model.decision_values(x)
    return values.argmax(axis=1) - 3


def train_svr(
    x: np.ndarray,
    y,
    c: float = 1.0,
    epsilon: float = 0.1,
    epochs: int = 50,
    seed: int = 0,
    standardize: bool = True,
) -> SvrModel:
    """Epsilon-insensitive linear regression with L2 regularization.

    Records the regularized objective at each epoch end. Inference clips
    predictions to [0, 1].
    """
    x = _check_matrix(x)
    y = np.asarray(y, dtype=np.float64)
    n, dim = x.shape
    if y.shape != (n,):
        raise ShallowError(f"targets shape {y.shape}, expected ({n},)")
    if n < 2:
        raise ShallowError(f"SVR needs n >= 2, got {n}")
    if c <= 0 or epsilon < 0:
        raise ShallowError(f"bad hyperparameters C={c} epsilon={epsilon}")
    std = Standardizer.fit(x) if standardize else None
    if std is not None:
        x = std.apply(x)
    lam = 1.0 / (c * n)
    rng = np.random.default_rng(seed)
    w = np.zeros(dim)
    b = 0.0
    step = 0
    objective_history = []
    for _ in range(epochs):
        for i in rng.permutation(n):
            step += 1
            eta = 1.0 / (lam * step)
            err = x[i] @ w + b - y[i]
            w *= 1.0 - eta * lam
            if abs(err) > epsilon:
                sign = 1.0 if err > 0 else -1.0
                w -= eta * sign * x[i]
                b -= eta * sign
        residuals = np.abs(x @ w + b - y)
        loss = np.maximum(residuals - epsilon, 0.0).mean()
        objective_history.append(0.5 * lam * float(w @ w) + float(loss))
    return SvrModel(
        weights=w,
        bias=b,
        epsilon=epsilon,
        c=c,
        standardizer=std,
        objective_history=objective_history,
    )


def predict_svr(model: SvrModel, x: np.ndarray) -> np.ndarray:
    return np.clip(model.raw_values(x), 0.0, 1.0)


def save_shallow(model: LinearSvmModel | SvrModel, path) -> None:
    """Same container convention as checkpoints: JSON header + raw arrays."""
    if isinstance(model, LinearSvmModel):
        kind = "svm"
        arrays = {"weights": model.weights, "biases": model.biases}
        hyper = {"c": model.c}
    elif isinstance(model, SvrModel):
        kind = "svr"
        arrays = {"weights": model.weights, "bias": np.array([model.bias])}
        hyper = {
            "c": model.c,
            "epsilon": model.epsilon,
            "objective_history": model.objective_history,
        }
    else:
        raise ShallowError(f"cannot save {type(model).__name__}")
    if model.standardizer is not None:
        arrays["std_mean"] = model.standardizer.mean
        arrays["std_scale"] = model.standardizer.scale
    names = sorted(arrays)
    header = {
        "format": 1,
        "kind": kind,
        "hyper": hyper,
        "standardized": model.standardizer is not None,
        "arrays": [{"name": k, "shape": list(arrays[k].shape)} for k in names],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(SHALLOW_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for k in names:
            f.write(np.asarray(arrays[k], dtype="<f8").tobytes())


def load_shallow(path) -> LinearSvmModel | SvrModel:
    with open(path, "rb") as f:
        magic = f.read(len(SHALLOW_MAGIC))
        if magic != SHALLOW_MAGIC:
            raise ShallowError(f"{path}: not a shallow model file")
        (blob_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(blob_len).decode())
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arrays[entry["name"]] = (
                np.frombuffer(f.read(8 * count), dtype="<f8").reshape(shape).copy()
            )
    std = None
    if header["standardized"]:
        std = Standardizer(mean=arrays["std_mean"], scale=arrays["std_scale"])
    if header["kind"] == "svm":
        return LinearSvmModel(
            weights=arrays["weights"],
            biases=arrays["biases"],
            c=header["hyper"]["c"],
            standardizer=std,
        )
    return SvrModel(
        weights=arrays["weights"],
        bias=float(arrays["bias"][0]),
        epsilon=header["hyper"]["epsilon"],
        c=header["hyper"]["c"],
        standardizer=std,
        objective_history=list(header["hyper"].get("objective_history", [])),
    )
