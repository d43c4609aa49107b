"""Encoder assembly and training: embedded tweets pass through dropout, a
bidirectional GRU, a multi-width convolution bank with mask-aware max
pooling, then concatenate with the hand-crafted feature block; task heads
are a 7-way softmax (classification), a 1-unit sigmoid (intensity), or both
when multi-tasking. Training is Adam on CE + lambda * MSE with dev-Pearson
early stopping and best-epoch restoration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus import ValenceClass, ordinal_to_class
from .evaluation import pearson

TASK_MODES = ("stl_class", "stl_intensity", "mtl")
N_CLASSES = 7

CHECKPOINT_MAGIC = b"MTAFCKP1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    max_len: int = 50
    embed_dim: int = 300
    gru_hidden: int = 256
    filter_widths: tuple[int, ...] = (2, 3, 4, 5, 6)
    filters_per_width: int = 100
    dropout: float = 0.5
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 20
    task_mode: str = "mtl"
    loss_weight_lambda: float = 1.0
    seed: int = 0
    feature_dim: int = 0
    feature_config: tuple[str, ...] = ()

    def __post_init__(self):
        positive = {
            "max_len": self.max_len,
            "embed_dim": self.embed_dim,
            "gru_hidden": self.gru_hidden,
            "filters_per_width": self.filters_per_width,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
        }
        for name, value in positive.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ConfigError(f"bad filter widths {self.filter_widths}")
        if max(self.filter_widths) > self.max_len:
            raise ConfigError(
                f"max filter width {max(self.filter_widths)} exceeds max_len "
                f"{self.max_len}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.patience < 0 or self.patience > self.max_epochs:
            raise ConfigError(
                f"patience must be in 0..max_epochs, got {self.patience}"
            )
        if self.task_mode not in TASK_MODES:
            raise ConfigError(f"task_mode must be one of {TASK_MODES}")
        if self.feature_dim < 0:
            raise ConfigError(f"feature_dim must be >= 0, got {self.feature_dim}")

    @property
    def pooled_dim(self) -> int:
        return len(self.filter_widths) * self.filters_per_width

    @property
    def combined_dim(self) -> int:
        return self.pooled_dim + self.feature_dim

    @property
    def has_class_head(self) -> bool:
        return self.task_mode in ("stl_class", "mtl")

    @property
    def has_intensity_head(self) -> bool:
        return self.task_mode in ("stl_intensity", "mtl")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["filter_widths"] = list(self.filter_widths)
        d["feature_config"] = list(self.feature_config)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["filter_widths"] = tuple(d.get("filter_widths", (2, 3, 4, 5, 6)))
        d["feature_config"] = tuple(d.get("feature_config", ()))
        return cls(**d)

    def hash(self) -> str:
        return hash_config(self.to_dict())


def hash_config(d: dict) -> str:
    return hashlib.sha256(
        json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


@dataclass
class EncodedDataset:
    """Arrays ready for the model: embedded tweets, masks, features, labels.

    y_class holds ordinals in -3..3; either label array may be None when the
    split lacks that annotation.
    """

    ids: list[str]
    x: np.ndarray  # [n, max_len, embed_dim]
    mask: np.ndarray  # [n, max_len] bool
    feats: np.ndarray  # [n, feature_dim]
    y_class: np.ndarray | None = None
    y_intensity: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.ids)
        if self.x.shape[0] != n or self.mask.shape[0] != n or self.feats.shape[0] != n:
            raise ValueError("encoded arrays disagree on example count")
        for y in (self.y_class, self.y_intensity):
            if y is not None and y.shape != (n,):
                raise ValueError("label array shape mismatch")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class SharedRepresentation:
    pooled: np.ndarray
    handcrafted: np.ndarray
    combined: np.ndarray


@dataclass
class ForwardPass:
    class_logits: ad.Tensor | None
    class_probs: np.ndarray | None
    intensity: ad.Tensor | None
    representation: np.ndarray

    @property
    def intensity_values(self) -> np.ndarray | None:
        return None if self.intensity is None else self.intensity.data


class Model:
    """The encoder plus task heads, with parameters in a flat named dict."""

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.gru_fwd = ad.GruParams.init(config.embed_dim, config.gru_hidden, rng)
        self.gru_bwd = ad.GruParams.init(config.embed_dim, config.gru_hidden, rng)
        self.bank = ad.init_conv_bank(
            config.filter_widths, 2 * config.gru_hidden, config.filters_per_width, rng
        )
        self._params: dict[str, ad.Tensor] = {}
        self._params.update(self.gru_fwd.named("gru_fwd"))
        self._params.update(self.gru_bwd.named("gru_bwd"))
        for f in self.bank:
            self._params[f"conv.w{f.width}.weight"] = f.weight
            self._params[f"conv.w{f.width}.bias"] = f.bias
        delta = config.combined_dim
        if config.has_class_head:
            self._params["head_class.weight"] = ad.Tensor(
                ad.glorot_uniform(delta, N_CLASSES, rng), requires_grad=True
            )
            self._params["head_class.bias"] = ad.Tensor(
                np.zeros(N_CLASSES), requires_grad=True
            )
        if config.has_intensity_head:
            self._params["head_intensity.weight"] = ad.Tensor(
                ad.glorot_uniform(delta, 1, rng), requires_grad=True
            )
            self._params["head_intensity.bias"] = ad.Tensor(
                np.zeros(1), requires_grad=True
            )
        # dropout noise flows from the same seed, after init draws
        self._dropout_rng = np.random.default_rng(rng.integers(2**63))

    def parameters(self) -> dict[str, ad.Tensor]:
        return self._params

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def set_parameters(self, arrays: dict[str, np.ndarray]) -> None:
        if set(arrays) != set(self._params):
            raise ConfigError(
                f"parameter names mismatch: {sorted(set(arrays) ^ set(self._params))}"
            )
        for name, value in arrays.items():
            p = self._params[name]
            if p.data.shape != value.shape:
                raise ConfigError(
                    f"parameter {name!r} shape {value.shape}, expected {p.data.shape}"
                )
            p.data = value.astype(np.float64).copy()

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def forward(
        self,
        x: np.ndarray,
        mask: np.ndarray,
        feats: np.ndarray,
        training: bool = False,
    ) -> ForwardPass:
        cfg = self.config
        if x.shape[1:] != (cfg.max_len, cfg.embed_dim):
            raise ConfigError(
                f"input shape {x.shape[1:]}, expected ({cfg.max_len}, {cfg.embed_dim})"
            )
        if feats.shape[1:] != (cfg.feature_dim,):
            raise ConfigError(
                f"feature width {feats.shape[1:]}, expected ({cfg.feature_dim},)"
            )
        embedded = ad.dropout(
            ad.Tensor(x), cfg.dropout, training, self._dropout_rng
        )
        contextual = ad.bigru(embedded, mask, self.gru_fwd, self.gru_bwd)
        pooled = ad.conv1d_maxpool(contextual, mask, self.bank)
        combined = ad.concat([pooled, ad.Tensor(feats)], axis=1)
        dropped = ad.dropout(combined, cfg.dropout, training, self._dropout_rng)
        class_logits = None
        class_probs = None
        intensity = None
        if cfg.has_class_head:
            class_logits = ad.affine(
                dropped,
                self._params["head_class.weight"],
                self._params["head_class.bias"],
            )
            class_probs = ad.softmax(class_logits).data
        if cfg.has_intensity_head:
            raw = ad.affine(
                dropped,
                self._params["head_intensity.weight"],
                self._params["head_intensity.bias"],
            )
            intensity = ad.reshape(ad.sigmoid(raw), (x.shape[0],))
        return ForwardPass(
            class_logits=class_logits,
            class_probs=class_probs,
            intensity=intensity,
            representation=combined.data,
        )


def build_model(config: ModelConfig) -> Model:
    return Model(config)


def parameter_count(config: ModelConfig) -> int:
    h, d = config.gru_hidden, config.embed_dim
    total = 2 * 3 * (d * h + h * h + h)
    total += sum(
        w * 2 * h * config.filters_per_width + config.filters_per_width
        for w in config.filter_widths
    )
    if config.has_class_head:
        total += config.combined_dim * N_CLASSES + N_CLASSES
    if config.has_intensity_head:
        total += config.combined_dim + 1
    return total


def _batches(n: int, batch_size: int, order=None):
    order = np.arange(n) if order is None else order
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


@dataclass
class Prediction:
    id: str
    valence: ValenceClass | None
    intensity: float | None


def predict(model: Model, data: EncodedDataset) -> list[Prediction]:
    """Eval-mode predictions; argmax ties resolve to the lower ordinal."""
    cfg = model.config
    preds: list[Prediction] = []
    for idx in _batches(len(data), cfg.batch_size):
        fp = model.forward(data.x[idx], data.mask[idx], data.feats[idx])
        classes = (
            None
            if fp.class_probs is None
            else [ordinal_to_class(int(k) - 3) for k in fp.class_probs.argmax(axis=1)]
        )
        intensities = fp.intensity_values
        for j, row in enumerate(idx):
            preds.append(
                Prediction(
                    id=data.ids[row],
                    valence=None if classes is None else classes[j],
                    intensity=None if intensities is None else float(intensities[j]),
                )
            )
    return preds


def extract_representations(model: Model, data: EncodedDataset) -> np.ndarray:
    """Deterministic [n, pooled + feature] shared representations."""
    rows = []
    for idx in _batches(len(data), model.config.batch_size):
        fp = model.forward(data.x[idx], data.mask[idx], data.feats[idx])
        rows.append(fp.representation)
    return np.concatenate(rows, axis=0)


def extract_representation(
    model: Model, x: np.ndarray, mask: np.ndarray, feats: np.ndarray
) -> SharedRepresentation:
    """Single-tweet shared representation split into its two blocks."""
    fp = model.forward(x[None, :, :], mask[None, :], feats[None, :])
    combined = fp.representation[0]
    pooled_dim = model.config.pooled_dim
    return SharedRepresentation(
        pooled=combined[:pooled_dim],
        handcrafted=combined[pooled_dim:],
        combined=combined,
    )


def _dev_pearson(model: Model, dev: EncodedDataset) -> dict[str, float]:
    cfg = model.config
    scores: dict[str, float] = {}
    preds = predict(model, dev)
    if cfg.has_class_head:
        gold = dev.y_class.astype(float)
        got = np.array([float(int(p.valence)) for p in preds])
        scores["class"] = pearson(gold, got).value
    if cfg.has_intensity_head:
        gold = dev.y_intensity
        got = np.array([p.intensity for p in preds])
        scores["intensity"] = pearson(gold, got).value
    return scores


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    history: list[dict]
    best_epoch: int
    config_hash: str = ""

    def __post_init__(self):
        if not self.config_hash:
            self.config_hash = self.config.hash()


def train(
    model: Model,
    train_data: EncodedDataset,
    dev_data: EncodedDataset,
    config: ModelConfig | None = None,
) -> Checkpoint:
    """Adam on the joint loss with early stopping.

    The monitored value is the mean dev Pearson over active tasks (undefined
    Pearson counts as 0); training stops after max(patience, 1) epochs
    without improvement and the best epoch's parameters are restored.
    """
    cfg = config or model.config
    if cfg.task_mode != model.config.task_mode:
        raise ValueError(
            f"config task_mode {cfg.task_mode!r} does not match the model's "
            f"{model.config.task_mode!r}"
        )
    if len(train_data) == 0 or len(dev_data) == 0:
        raise ValueError("train and dev splits must be non-empty")
    if cfg.has_class_head and (train_data.y_class is None or dev_data.y_class is None):
        raise ValueError(f"{cfg.task_mode} training needs class labels on both splits")
    if cfg.has_intensity_head and (
        train_data.y_intensity is None or dev_data.y_intensity is None
    ):
        raise ValueError(
            f"{cfg.task_mode} training needs intensity labels on both splits"
        )
    rng = np.random.default_rng(cfg.seed)
    state = ad.AdamState.init(model.parameters(), lr=cfg.lr)
    history: list[dict] = []
    best_monitor = -np.inf
    best_epoch = -1
    best_params = model.parameter_arrays()
    wait = 0
    n = len(train_data)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for idx in _batches(n, cfg.batch_size, order):
            fp = model.forward(
                train_data.x[idx], train_data.mask[idx], train_data.feats[idx],
                training=True,
            )
            terms = []
            if cfg.has_class_head:
                gold = train_data.y_class[idx] + 3  # ordinals to indices
                terms.append(ad.softmax_cross_entropy(fp.class_logits, gold))
            if cfg.has_intensity_head:
                term = ad.mse(fp.intensity, train_data.y_intensity[idx])
                if cfg.task_mode == "mtl":
                    term = ad.mul(term, cfg.loss_weight_lambda)
                terms.append(term)
            loss = terms[0]
            for term in terms[1:]:
                loss = ad.add(loss, term)
            if not np.isfinite(loss.item()):
                raise RuntimeError(
                    f"non-finite loss {loss.item()} at epoch {epoch}; aborting"
                )
            model.zero_grads()
            loss.backward()
            grads = {
                name: p.grad
                for name, p in model.parameters().items()
                if p.grad is not None
            }
            ad.adam_step(model.parameters(), grads, state)
            total_loss += loss.item() * len(idx)
        scores = _dev_pearson(model, dev_data)
        entry = {"epoch": epoch, "train_loss": total_loss / n}
        if "class" in scores:
            entry["dev_pearson_class"] = scores["class"]
        if "intensity" in scores:
            entry["dev_pearson_intensity"] = scores["intensity"]
        history.append(entry)
        monitor = float(np.mean(list(scores.values())))
        if monitor > best_monitor:
            best_monitor = monitor
            best_epoch = epoch
            best_params = model.parameter_arrays()
            wait = 0
        else:
            wait += 1
            if wait >= max(cfg.patience, 1):
                break
    model.set_parameters(best_params)
    return Checkpoint(
        config=cfg, params=best_params, history=history, best_epoch=best_epoch
    )


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Self-describing container: JSON header, then float64 little-endian
    arrays in header order."""
    names = sorted(ckpt.params)
    header = {
        "format": 1,
        "config": ckpt.config.to_dict(),
        "config_hash": ckpt.config_hash,
        "arrays": [
            {"name": name, "shape": list(ckpt.params[name].shape)} for name in names
        ],
        "history": ckpt.history,
        "best_epoch": ckpt.best_epoch,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for name in names:
            f.write(ckpt.params[name].astype("<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ConfigError(f"{path}: not a checkpoint file")
        (blob_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(blob_len).decode())
        params = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(8 * count)
            params[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        params=params,
        history=header["history"],
        best_epoch=header["best_epoch"],
        config_hash=header["config_hash"],
    )


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    model = Model(ckpt.config)
    model.set_parameters(ckpt.params)
    return model
