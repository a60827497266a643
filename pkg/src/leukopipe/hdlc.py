"""Hierarchical classifier over flat feature vectors, plus evaluation metrics.

The model slides 128 length-3 filters over the feature vector (same
padding, ReLU), flattens, and finishes with six dense layers ending in a
single sigmoid unit. Training is plain mini-batch gradient descent on
binary cross-entropy. The metrics follow the usual confusion-matrix
definitions with the disease class as positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import DataError, DimensionError, ParameterError, TrainingError
from .tensor import Tensor

DEFAULT_DENSE_WIDTHS = (512, 256, 128, 64, 32, 1)
CONV_FILTERS = 128
CONV_WIDTH = 3


@dataclass(frozen=True)
class HDLCConfig:
    input_dim: int
    dense_widths: tuple[int, ...] = DEFAULT_DENSE_WIDTHS

    def __post_init__(self):
        if self.input_dim < CONV_WIDTH:
            raise DimensionError(
                f"input_dim must be >= {CONV_WIDTH}, got {self.input_dim}")
        if len(self.dense_widths) != 6 or self.dense_widths[-1] != 1:
            raise ParameterError(
                f"dense_widths must be six layers ending in 1, got {self.dense_widths}")


@dataclass
class HDLCModel:
    config: HDLCConfig
    conv_w: Tensor                      # (filters, window)
    conv_b: Tensor                      # (filters,)
    dense: list[tuple[Tensor, Tensor]] = field(default_factory=list)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 32


def init_model(config: HDLCConfig, rng: np.random.Generator,
               requires_grad: bool = True) -> HDLCModel:
    """He-normal weights, zero biases."""
    model = HDLCModel(
        config=config,
        conv_w=Tensor(rng.normal(0.0, math.sqrt(2.0 / CONV_WIDTH),
                                 size=(CONV_FILTERS, CONV_WIDTH)),
                      requires_grad=requires_grad),
        conv_b=Tensor(np.zeros(CONV_FILTERS), requires_grad=requires_grad),
    )
    fan_in = CONV_FILTERS * config.input_dim
    for width in config.dense_widths:
        w = Tensor(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, width)),
                   requires_grad=requires_grad)
        b = Tensor(np.zeros(width), requires_grad=requires_grad)
        model.dense.append((w, b))
        fan_in = width
    return model


def named_parameters(model: HDLCModel) -> dict[str, Tensor]:
    out = {"hdlc.conv.w": model.conv_w, "hdlc.conv.b": model.conv_b}
    for i, (w, b) in enumerate(model.dense):
        out[f"hdlc.dense{i}.w"] = w
        out[f"hdlc.dense{i}.b"] = b
    return out


def load_model(config: HDLCConfig, values: dict[str, np.ndarray],
               requires_grad: bool = False) -> HDLCModel:
    model = init_model(config, np.random.default_rng(0), requires_grad=requires_grad)
    for name, tens in named_parameters(model).items():
        if name not in values:
            raise ParameterError(f"missing parameter '{name}'")
        if values[name].shape != tens.shape:
            raise DimensionError(
                f"parameter '{name}' has shape {values[name].shape}, expected {tens.shape}")
        tens.data = np.asarray(values[name], dtype=np.float64).copy()
    return model


# ---------------------------------------------------------------------------
# forward and training


def hdlc_forward(model: HDLCModel, features: Tensor | np.ndarray) -> Tensor:
    """Probability of the positive class; (d,) -> scalar, (b, d) -> (b,)."""
    x = features if isinstance(features, Tensor) else Tensor(features)
    single = x.ndim == 1
    if single:
        x = x.reshape(1, x.shape[0])
    if x.ndim != 2:
        raise DimensionError(f"expected (d,) or (b, d) features, got {x.shape}")
    b, d = x.shape
    if d != model.config.input_dim:
        raise DimensionError(f"feature width {d} does not match model "
                             f"input_dim {model.config.input_dim}")
    zeros = Tensor(np.zeros((b, 1)))
    padded = T.concat([zeros, x, zeros], axis=1)          # same padding
    conv = None
    for k in range(CONV_WIDTH):
        term = padded[:, k:k + d].reshape(b, 1, d) * model.conv_w[:, k].reshape(1, CONV_FILTERS, 1)
        conv = term if conv is None else conv + term
    conv = T.relu(conv + model.conv_b.reshape(1, CONV_FILTERS, 1))
    h = conv.reshape(b, CONV_FILTERS * d)
    for i, (w, bias) in enumerate(model.dense):
        h = h @ w + bias
        if i < len(model.dense) - 1:
            h = T.relu(h)
    out = T.sigmoid(h).reshape(b)
    return out[0] if single else out


def bce_loss(probs: Tensor, labels: np.ndarray, eps: float = 1e-12) -> Tensor:
    y = Tensor(np.asarray(labels, dtype=np.float64))
    one = Tensor(1.0)
    return -(y * T.tlog(probs + eps) + (one - y) * T.tlog(one - probs + eps)).mean()


def train(model: HDLCModel, features: np.ndarray, labels: np.ndarray,
          hyper: TrainConfig, rng: np.random.Generator) -> list[float]:
    """Mini-batch gradient descent on binary cross-entropy.

    Returns the per-epoch mean training loss. Batch order comes from the
    supplied generator, so equal seeds give bit-identical traces.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise TrainingError("training data contains a single class")
    if len(features) != len(labels):
        raise DataError(f"{len(features)} feature rows vs {len(labels)} labels")
    params = list(named_parameters(model).values())
    n = len(features)
    trace: list[float] = []
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        losses: list[float] = []
        for start in range(0, n, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            probs = hdlc_forward(model, features[idx])
            loss = bce_loss(probs, labels[idx])
            for p in params:
                p.zero_grad()
            T.backward(loss)
            for p in params:
                p.data -= hyper.learning_rate * p.grad
            losses.append(loss.item())
            T.tape().reset()
        trace.append(float(np.mean(losses)))
    return trace


def predict(model: HDLCModel, features: np.ndarray) -> np.ndarray:
    """Positive-class probabilities without recording gradients."""
    with T.no_grad():
        return hdlc_forward(model, np.asarray(features, dtype=np.float64)).data.copy()


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int   # disease predicted as disease
    fp: int   # healthy predicted as disease
    tn: int   # healthy predicted as healthy
    fn: int   # disease predicted as healthy

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()   # metrics whose denominator was zero


def confusion(probabilities, labels, threshold: float = 0.5) -> ConfusionMatrix:
    """Tally predictions (probability >= threshold) against 0/1 labels."""
    probs = np.asarray(probabilities, dtype=np.float64)
    labs = np.asarray(labels)
    if probs.shape != labs.shape:
        raise DataError(f"{probs.shape} probabilities vs {labs.shape} labels")
    if not np.isin(labs, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    pred = probs >= threshold
    pos = labs == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision, recall, F1; zero denominators flag the metric as 0."""
    if cm.total == 0:
        raise DataError("empty confusion matrix")
    undefined: list[str] = []
    accuracy = (cm.tp + cm.tn) / cm.total
    if cm.tp + cm.fp:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision, undefined = 0.0, undefined + ["precision"]
    if cm.tp + cm.fn:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall, undefined = 0.0, undefined + ["recall"]
    if not undefined and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, undefined = 0.0, undefined + ["f1"]
    return MetricsReport(accuracy=accuracy, precision=precision, recall=recall,
                         f1=f1, undefined=tuple(undefined))


def roc_auc(probabilities, labels) -> tuple[list[tuple[float, float, float]], float]:
    """ROC points (threshold, fpr, tpr) in descending-threshold order, plus
    the trapezoidal area under the curve.

    Thresholds are every distinct probability with a leading sentinel above
    the maximum, so the curve always starts at (0, 0) and ends at (1, 1).
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    labs = np.asarray(labels)
    if probs.shape != labs.shape:
        raise DataError(f"{probs.shape} probabilities vs {labs.shape} labels")
    n_pos = int(np.sum(labs == 1))
    n_neg = int(np.sum(labs == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError(f"both classes required, got {n_pos} positive / {n_neg} negative")
    thresholds = [math.inf] + sorted(set(probs.tolist()), reverse=True)
    points: list[tuple[float, float, float]] = []
    for theta in thresholds:
        pred = probs >= theta
        tpr = float(np.sum(pred & (labs == 1))) / n_pos
        fpr = float(np.sum(pred & (labs == 0))) / n_neg
        points.append((theta, fpr, tpr))
    auc = 0.0
    for (_, fpr0, tpr0), (_, fpr1, tpr1) in zip(points, points[1:]):
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0
    return points, auc
