"""Small fully-connected classifier trained with SGD on an MSE loss.

Hidden layers are ReLU, the output layer is softmax. The loss is the mean
squared error between the softmax output and a one-hot label, and the
gradient of that loss with respect to the *raw* input is what the attack
code consumes. An optional affine map ``(x - shift) / scale`` is stored with
the network and applied before the first layer.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptyDataset, InvalidSpec, MalformedFile

log = logging.getLogger(__name__)

NUM_CLASSES = 2


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str = "relu"
    dropout_after: float = 0.0


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    layers: tuple[LayerSpec, ...]
    seed: int = 0

    def validate(self) -> None:
        if self.input_dim <= 0:
            raise InvalidSpec("input_dim must be positive")
        if not self.layers:
            raise InvalidSpec("network needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.width <= 0:
                raise InvalidSpec(f"layer {i} has zero width")
            if not 0.0 <= layer.dropout_after < 1.0:
                raise InvalidSpec(f"layer {i} dropout must be in [0, 1)")
            last = i == len(self.layers) - 1
            want = "softmax" if last else "relu"
            if layer.activation != want:
                raise InvalidSpec(f"layer {i} activation must be {want}")
        if self.layers[-1].width != NUM_CLASSES:
            raise InvalidSpec(f"output layer must have width {NUM_CLASSES}")

    @property
    def n_layers(self) -> int:
        """Dense layers plus dropout layers, as counted in a model summary table."""
        return len(self.layers) + sum(1 for layer in self.layers if layer.dropout_after > 0)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "seed": self.seed,
            "layers": [[l.width, l.activation, l.dropout_after] for l in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        layers = tuple(LayerSpec(int(w), str(a), float(p)) for w, a, p in d["layers"])
        return cls(int(d["input_dim"]), layers, int(d.get("seed", 0)))


def mlp_spec(input_dim: int, hidden: list, seed: int = 0) -> NetworkSpec:
    """Build a spec from a compact list: ints are ReLU widths, floats are dropout rates.

    >>> mlp_spec(4, [8, 0.25, 6]).n_layers
    4
    """
    layers: list[LayerSpec] = []
    for item in hidden:
        if isinstance(item, float):
            if not layers:
                raise InvalidSpec("dropout cannot precede the first dense layer")
            prev = layers[-1]
            layers[-1] = LayerSpec(prev.width, prev.activation, item)
        else:
            layers.append(LayerSpec(int(item), "relu"))
    layers.append(LayerSpec(NUM_CLASSES, "softmax"))
    spec = NetworkSpec(input_dim, tuple(layers), seed)
    spec.validate()
    return spec


# Layer stacks of the detectors used in the two case studies.
FDIA_DEFENDER = [32, 48, 56, 48, 32, 0.25, 16, 0.25]
FDIA_ATTACKER = [30, 40, 30, 0.25, 20, 0.25]
WATER_DEFENDER = [20, 40, 30, 0.25, 20, 0.25]
WATER_ATTACKER = [24, 32, 32, 16]


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionMismatch("features and labels differ in length")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def onehot(self) -> np.ndarray:
        return np.eye(NUM_CLASSES)[self.labels]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx])

    def split(self, train_fraction: float, seed: int) -> tuple["LabeledDataset", "LabeledDataset"]:
        order = np.random.default_rng(seed).permutation(len(self))
        cut = int(round(train_fraction * len(self)))
        return self.subset(order[:cut]), self.subset(order[cut:])

    def to_csv(self, path, header: list[str] | None = None, comment: str | None = None) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            wr = csv.writer(fh)
            if header:
                wr.writerow(list(header) + ["label"])
            for x, y in zip(self.features, self.labels):
                wr.writerow([repr(float(v)) for v in x] + [int(y)])

    @classmethod
    def from_csv(cls, path) -> "LabeledDataset":
        feats, labels = [], []
        with open(path, newline="") as fh:
            lines = (ln for ln in fh if not ln.startswith("#"))
            for i, rec in enumerate(csv.reader(lines)):
                if not rec:
                    continue
                try:
                    row = [float(v) for v in rec[:-1]]
                    lab = int(rec[-1])
                except ValueError:
                    if i == 0:
                        continue
                    raise MalformedFile(f"{path}: bad record {i + 1}") from None
                feats.append(row)
                labels.append(lab)
        if not feats or len({len(r) for r in feats}) != 1:
            raise MalformedFile(f"{path}: empty or ragged dataset")
        return cls(np.array(feats), np.array(labels))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 512
    epochs: int = 100
    seed: int = 0
    patience: int = 5

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise InvalidSpec("invalid training configuration")


@dataclass
class Network:
    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = [self.spec.input_dim] + [l.width for l in self.spec.layers]
        if len(self.weights) != len(self.spec.layers) or len(self.biases) != len(self.weights):
            raise MalformedFile("layer count does not match spec")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise MalformedFile(f"layer {k} weights have inconsistent shape")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        for arr in ("input_shift", "input_scale"):
            v = getattr(self, arr)
            if v is not None:
                v = np.asarray(v, dtype=np.float64)
                if v.shape != (self.spec.input_dim,):
                    raise MalformedFile(f"{arr} has shape {v.shape}")
                setattr(self, arr, v)

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim

    def copy(self) -> "Network":
        return Network(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            None if self.input_shift is None else self.input_shift.copy(),
            None if self.input_scale is None else self.input_scale.copy(),
            dict(self.meta),
        )

    def _scale(self, x: np.ndarray) -> np.ndarray:
        if self.input_shift is not None:
            x = x - self.input_shift
        if self.input_scale is not None:
            x = x / self.input_scale
        return x

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise DimensionMismatch(f"expected {self.input_dim} features, got {x.shape[-1]}")
        return x

    def forward(self, x) -> np.ndarray:
        """Class probabilities for one vector or a batch (rows)."""
        x = self._check(x)
        if x.ndim == 1:
            return kernels.forward(self.weights, self.biases, self._scale(x))
        return _batch_forward(self.weights, self.biases, self._scale(x))[0][-1]

    def predict(self, x):
        p = self.forward(x)
        return int(np.argmax(p)) if p.ndim == 1 else np.argmax(p, axis=1)

    def input_gradient(self, x, label) -> np.ndarray:
        """Gradient of the MSE loss w.r.t. the raw input vector.

        ``label`` is a class index or a one-hot vector.
        """
        x = self._check(x)
        if x.ndim != 1:
            raise DimensionMismatch("input_gradient takes a single vector")
        target = _as_target(label)
        _, g = kernels.loss_input_gradient(self.weights, self.biases, self._scale(x), target)
        if self.input_scale is not None:
            g = g / self.input_scale
        return np.asarray(g)

    def loss(self, x, label) -> float:
        p = self.forward(x)
        return float(np.mean((p - _as_target(label)) ** 2))


def _as_target(label) -> np.ndarray:
    if np.ndim(label) == 0:
        return np.eye(NUM_CLASSES)[int(label)]
    t = np.asarray(label, dtype=np.float64)
    if t.shape != (NUM_CLASSES,):
        raise DimensionMismatch("one-hot label must have length 2")
    return t


def _batch_forward(weights, biases, x, dropout=None, rng=None):
    acts, pre, masks = [x], [], []
    a = x
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pre.append(z)
        if k == last:
            e = np.exp(z - z.max(axis=1, keepdims=True))
            a = e / e.sum(axis=1, keepdims=True)
        else:
            a = np.maximum(z, 0.0)
            rate = dropout[k] if dropout is not None else 0.0
            if rate > 0.0:
                mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
                a = a * mask
                masks.append(mask)
            else:
                masks.append(None)
        acts.append(a)
    return acts, pre, masks


def build_network(spec: NetworkSpec) -> Network:
    """Glorot-uniform weights, zero biases, deterministic in ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dims = [spec.input_dim] + [l.width for l in spec.layers]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(spec, weights, biases)


def standardize(net: Network, features: np.ndarray) -> Network:
    """Copy of ``net`` with a per-feature mean/std input map fitted to ``features``."""
    out = net.copy()
    out.input_shift = features.mean(axis=0)
    std = features.std(axis=0)
    out.input_scale = np.where(std > 0, std, 1.0)
    return out


def train_sgd(net: Network, data: LabeledDataset, cfg: TrainConfig) -> Network:
    """Minibatch SGD on the softmax/MSE loss. Returns a trained copy.

    Stops early once training accuracy has not improved for ``cfg.patience``
    consecutive epochs.
    """
    if len(data) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if data.dim != net.input_dim:
        raise DimensionMismatch(f"dataset has {data.dim} features, network expects {net.input_dim}")
    out = net.copy()
    if cfg.epochs == 0:
        return out
    rng = np.random.default_rng(cfg.seed)
    x_all = out._scale(data.features)
    y_all = data.onehot()
    n = len(data)
    dropout = [l.dropout_after for l in out.spec.layers]
    ws, bs = out.weights, out.biases
    best, stale = -1.0, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            acts, pre, masks = _batch_forward(ws, bs, x_all[idx], dropout, rng)
            p = acts[-1]
            nb = idx.shape[0]
            dp = 2.0 * (p - y_all[idx]) / (NUM_CLASSES * nb)
            dz = p * (dp - np.sum(dp * p, axis=1, keepdims=True))
            for k in range(len(ws) - 1, -1, -1):
                gw = acts[k].T @ dz
                gb = dz.sum(axis=0)
                if k > 0:
                    da = dz @ ws[k].T
                    if masks[k - 1] is not None:
                        da = da * masks[k - 1]
                    dz = da * (pre[k - 1] > 0.0)
                ws[k] -= cfg.learning_rate * gw
                bs[k] -= cfg.learning_rate * gb
        acc = float(np.mean(np.argmax(_batch_forward(ws, bs, x_all)[0][-1], axis=1) == data.labels))
        log.debug("epoch %d train accuracy %.4f", epoch, acc)
        if acc > best:
            best, stale = acc, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    out.meta["epochs_run"] = epoch + 1
    out.meta["train_accuracy"] = best
    return out


def class_accuracy(net: Network, data: LabeledDataset) -> float:
    if len(data) == 0:
        raise EmptyDataset("accuracy of an empty dataset is undefined")
    return float(np.mean(net.predict(data.features) == data.labels))


def save_network(net: Network, path) -> None:
    doc = {
        "format": "physadv-mlp/1",
        "spec": net.spec.to_dict(),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "input_shift": None if net.input_shift is None else net.input_shift.tolist(),
        "input_scale": None if net.input_scale is None else net.input_scale.tolist(),
        "meta": net.meta,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc))


def load_network(path) -> Network:
    try:
        doc = json.loads(Path(path).read_text())
        spec = NetworkSpec.from_dict(doc["spec"])
        spec.validate()
        weights = [np.array(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
        shift = doc.get("input_shift")
        scale = doc.get("input_scale")
    except (ValueError, KeyError, TypeError, InvalidSpec) as exc:
        raise MalformedFile(f"{path}: {exc}") from None
    return Network(
        spec,
        weights,
        biases,
        None if shift is None else np.array(shift),
        None if scale is None else np.array(scale),
        doc.get("meta", {}),
    )
