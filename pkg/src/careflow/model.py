"""Two-branch dense classifier for mortality prediction.

Architecture: the timed-state-sample vector feeds dense(76) -> ReLU ->
dropout(0.5) -> dense(20) -> ReLU; the 6-wide demographic vector feeds
dense(5) -> ReLU; the two branches are concatenated (width 25) and pass
through dense(96) -> ReLU -> dropout(0.5) -> dense(10) -> ReLU -> dense(1)
-> sigmoid. Trained with mini-batch RMSprop on binary cross-entropy,
keeping the weights of the epoch with the best validation AUC.

Everything is plain numpy and deterministic for a fixed seed. Dropout is
inverted (activations scaled by 1/(1-rate) at train time), so inference
applies no rescaling.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import roc_auc
from .vocabulary import INSURANCE_TYPES

LAYER_NAMES = ("tss1", "tss2", "demo1", "head1", "head2", "out")


@dataclass
class PredictionDataset:
    samples: np.ndarray       # (n, 3 * |places|)
    demographics: np.ndarray  # (n, 6)
    labels: np.ndarray        # (n,) in {0, 1}
    case_ids: list = field(default_factory=list)

    def __post_init__(self):
        n = len(self.labels)
        if len(self.samples) != n or len(self.demographics) != n:
            raise ValueError("samples, demographics and labels disagree on length")
        if n and not set(np.unique(self.labels)) <= {0, 1}:
            raise ValueError("labels must be binary")
        if n and (
            not np.all(np.isfinite(self.samples))
            or not np.all(np.isfinite(self.demographics))
        ):
            raise ValueError("dataset contains non-finite entries")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return PredictionDataset(
            samples=self.samples[idx],
            demographics=self.demographics[idx],
            labels=self.labels[idx],
            case_ids=[self.case_ids[i] for i in idx] if self.case_ids else [],
        )


@dataclass
class TrainConfig:
    epochs: int = 350
    batch_size: int = 50
    learning_rate: float = 5e-4
    dropout: float = 0.5
    rmsprop_decay: float = 0.9
    rmsprop_epsilon: float = 1e-8
    seed: int = 0
    class_weighting: bool = False

    def validate(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")


def encode_demographics(record):
    """6-wide vector: age/100 followed by a one-hot over insurance types."""
    vec = np.zeros(6)
    vec[0] = record.age / 100.0
    vec[1 + INSURANCE_TYPES.index(record.insurance)] = 1.0
    return vec


class NetworkWeights:
    """Weight matrices and bias vectors for the six dense layers."""

    def __init__(self, layers):
        self.layers = dict(layers)  # name -> (W, b)
        for name in LAYER_NAMES:
            if name not in self.layers:
                raise ValueError(f"missing layer {name}")

    @property
    def tss_width(self):
        return self.layers["tss1"][0].shape[0]

    def copy(self):
        return NetworkWeights(
            {k: (W.copy(), b.copy()) for k, (W, b) in self.layers.items()}
        )

    def flat(self):
        return np.concatenate(
            [arr.ravel() for name in LAYER_NAMES for arr in self.layers[name]]
        )

    def save(self, path):
        arrays = {}
        for name in LAYER_NAMES:
            W, b = self.layers[name]
            arrays[f"W_{name}"] = W
            arrays[f"b_{name}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            return cls(
                {name: (data[f"W_{name}"], data[f"b_{name}"]) for name in LAYER_NAMES}
            )


def layer_shapes(tss_width, demo_width=6):
    return {
        "tss1": (tss_width, 76),
        "tss2": (76, 20),
        "demo1": (demo_width, 5),
        "head1": (25, 96),
        "head2": (96, 10),
        "out": (10, 1),
    }


def init_weights(shapes, seed):
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = np.random.RandomState(seed)
    layers = {}
    for name in LAYER_NAMES:
        fan_in, fan_out = shapes[name]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        layers[name] = (
            rng.uniform(-bound, bound, size=(fan_in, fan_out)),
            np.zeros(fan_out),
        )
    return NetworkWeights(layers)


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))


def _dropout_mask(rng, shape, rate):
    if rate == 0:
        return np.ones(shape)
    return (rng.uniform(size=shape) >= rate) / (1.0 - rate)


def _forward_full(w, tss, demo, training=False, dropout_rate=0.5, rng=None):
    """Batch forward pass; returns probabilities and the cache for backprop."""
    tss = np.atleast_2d(np.asarray(tss, dtype=float))
    demo = np.atleast_2d(np.asarray(demo, dtype=float))
    if tss.shape[1] != w.tss_width or demo.shape[1] != w.layers["demo1"][0].shape[0]:
        raise ValueError(
            f"input widths ({tss.shape[1]}, {demo.shape[1]}) do not match the network"
        )
    cache = {"tss": tss, "demo": demo}
    if training:
        if rng is None:
            rng = np.random.RandomState(0)
        mask1 = _dropout_mask(rng, (tss.shape[0], 76), dropout_rate)
        mask2 = _dropout_mask(rng, (tss.shape[0], 96), dropout_rate)
    else:
        mask1 = mask2 = None

    W, b = w.layers["tss1"]
    cache["z1"] = tss @ W + b
    a1 = _relu(cache["z1"])
    if mask1 is not None:
        a1 = a1 * mask1
    cache["a1"], cache["mask1"] = a1, mask1

    W, b = w.layers["tss2"]
    cache["z2"] = a1 @ W + b
    cache["a2"] = _relu(cache["z2"])

    W, b = w.layers["demo1"]
    cache["z3"] = demo @ W + b
    cache["a3"] = _relu(cache["z3"])

    cache["concat"] = np.concatenate([cache["a2"], cache["a3"]], axis=1)

    W, b = w.layers["head1"]
    cache["z4"] = cache["concat"] @ W + b
    a4 = _relu(cache["z4"])
    if mask2 is not None:
        a4 = a4 * mask2
    cache["a4"], cache["mask2"] = a4, mask2

    W, b = w.layers["head2"]
    cache["z5"] = a4 @ W + b
    cache["a5"] = _relu(cache["z5"])

    W, b = w.layers["out"]
    cache["z6"] = cache["a5"] @ W + b
    prob = _sigmoid(cache["z6"][:, 0])
    return prob, cache


def forward(w, tss, demo, training=False, dropout_rate=0.5, rng=None):
    """Predicted death probability for one input (or a batch)."""
    prob, _ = _forward_full(w, tss, demo, training, dropout_rate, rng)
    return prob if np.ndim(tss) > 1 else float(prob[0])


def bce_loss(probs, labels, sample_weights=None):
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    terms = -(labels * np.log(p) + (1 - labels) * np.log(1 - p))
    if sample_weights is None:
        return float(np.mean(terms))
    return float(np.sum(sample_weights * terms) / np.sum(sample_weights))


def gradients(w, tss, demo, labels, training=False, dropout_rate=0.5, rng=None,
              sample_weights=None):
    """Analytic gradients of mean binary cross-entropy w.r.t. every layer."""
    probs, cache = _forward_full(w, tss, demo, training, dropout_rate, rng)
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if sample_weights is None:
        dz6 = (probs - labels) / n
    else:
        sw = np.asarray(sample_weights, dtype=float)
        dz6 = sw * (probs - labels) / np.sum(sw)
    dz6 = dz6[:, None]

    grads = {}
    W_out, _ = w.layers["out"]
    grads["out"] = (cache["a5"].T @ dz6, dz6.sum(axis=0))
    da5 = dz6 @ W_out.T
    dz5 = da5 * (cache["z5"] > 0)

    W5, _ = w.layers["head2"]
    grads["head2"] = (cache["a4"].T @ dz5, dz5.sum(axis=0))
    da4 = dz5 @ W5.T
    if cache["mask2"] is not None:
        da4 = da4 * cache["mask2"]
    dz4 = da4 * (cache["z4"] > 0)

    W4, _ = w.layers["head1"]
    grads["head1"] = (cache["concat"].T @ dz4, dz4.sum(axis=0))
    dconcat = dz4 @ W4.T
    da2 = dconcat[:, :20]
    da3 = dconcat[:, 20:]

    dz3 = da3 * (cache["z3"] > 0)
    grads["demo1"] = (cache["demo"].T @ dz3, dz3.sum(axis=0))

    dz2 = da2 * (cache["z2"] > 0)
    W2, _ = w.layers["tss2"]
    grads["tss2"] = (cache["a1"].T @ dz2, dz2.sum(axis=0))
    da1 = dz2 @ W2.T
    if cache["mask1"] is not None:
        da1 = da1 * cache["mask1"]
    dz1 = da1 * (cache["z1"] > 0)
    grads["tss1"] = (cache["tss"].T @ dz1, dz1.sum(axis=0))
    return probs, grads


def predict_proba(w, dataset):
    if len(dataset) == 0:
        return np.zeros(0)
    probs, _ = _forward_full(w, dataset.samples, dataset.demographics, training=False)
    return probs


def train(train_data, val_data, cfg):
    """Mini-batch RMSprop training; returns (best weights, history).

    History is one dict per epoch: epoch index, mean train loss, validation
    AUC. Epoch 0 records the untrained network; the returned weights are
    those of the epoch with the highest validation AUC (earliest on ties).
    """
    cfg.validate()
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("train and validation sets must be non-empty")
    shapes = layer_shapes(train_data.samples.shape[1], train_data.demographics.shape[1])
    w = init_weights(shapes, cfg.seed)
    v = {name: (np.zeros_like(W), np.zeros_like(b)) for name, (W, b) in w.layers.items()}
    shuffle_rng = np.random.RandomState(cfg.seed + 1)
    dropout_rng = np.random.RandomState(cfg.seed + 2)

    weights_per_class = None
    if cfg.class_weighting:
        n = len(train_data)
        n_pos = int(np.sum(train_data.labels))
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            raise ValueError("class weighting requires both classes in training data")
        weights_per_class = {0: n / (2.0 * n_neg), 1: n / (2.0 * n_pos)}

    def val_auc(weights):
        return roc_auc(predict_proba(weights, val_data), val_data.labels)

    history = [{"epoch": 0, "train_loss": None, "val_auc": val_auc(w)}]
    best = (history[0]["val_auc"], 0, w.copy())

    n = len(train_data)
    rho, eps, lr = cfg.rmsprop_decay, cfg.rmsprop_epsilon, cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            tss = train_data.samples[idx]
            demo = train_data.demographics[idx]
            labels = train_data.labels[idx]
            sw = None
            if weights_per_class is not None:
                sw = np.array([weights_per_class[int(y)] for y in labels])
            probs, grads = gradients(
                w, tss, demo, labels,
                training=cfg.dropout > 0, dropout_rate=cfg.dropout, rng=dropout_rng,
                sample_weights=sw,
            )
            loss = bce_loss(probs, labels, sw)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            losses.append(loss)
            for name in LAYER_NAMES:
                gW, gb = grads[name]
                vW, vb = v[name]
                vW *= rho
                vW += (1 - rho) * gW * gW
                vb *= rho
                vb += (1 - rho) * gb * gb
                W, b = w.layers[name]
                W -= lr * gW / (np.sqrt(vW) + eps)
                b -= lr * gb / (np.sqrt(vb) + eps)
        auc = val_auc(w)
        history.append(
            {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_auc": auc}
        )
        if auc > best[0]:
            best = (auc, epoch, w.copy())
    return best[2], history
