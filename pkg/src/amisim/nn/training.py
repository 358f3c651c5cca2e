"""Loss functions, the Adam optimizer, and the seeded training loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from amisim.errors import ConfigError, TrainingError
from amisim.nn.model import Activation, ModelSpec, Params, backward, forward, init_params

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    l2_lambda: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate <= 0 or self.l2_lambda < 0:
            raise ConfigError("learning_rate must be > 0 and l2_lambda >= 0")


def one_hot(labels, classes: int):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def cross_entropy(y, y_hat) -> float:
    """Mean categorical cross-entropy; probabilities clamped at 1e-12."""
    probs = np.clip(y_hat, LOG_CLAMP, None)
    return float(-(y * np.log(probs)).sum(axis=1).mean())


def binary_cross_entropy(y, y_hat) -> float:
    """Per-unit Bernoulli cross-entropy for sigmoid output heads."""
    p = np.clip(y_hat, LOG_CLAMP, 1.0 - LOG_CLAMP)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum(axis=1).mean())


def _output_kind(spec: ModelSpec) -> str:
    last = spec.layers[-1]
    if not isinstance(last, Activation) or last.kind not in ("softmax", "sigmoid"):
        raise ConfigError("model must end in a softmax or sigmoid activation")
    return last.kind


def model_loss(spec, params, x, y, l2_lambda: float = 0.0):
    """Loss (data term plus l2_lambda * sum ||W||^2) on a batch."""
    out, _ = forward(spec, params, x)
    kind = _output_kind(spec)
    data = cross_entropy(y, out) if kind == "softmax" else binary_cross_entropy(y, out)
    reg = 0.0
    if l2_lambda:
        reg = l2_lambda * sum(
            float((arr * arr).sum())
            for w in params.weights
            for key, arr in w.items()
            if key.startswith("W")
        )
    return data + reg


def loss_and_grads(spec, params, x, y, l2_lambda: float = 0.0):
    """Forward + backward on a batch; returns (loss, output, gradients)."""
    out, caches = forward(spec, params, x)
    kind = _output_kind(spec)
    data = cross_entropy(y, out) if kind == "softmax" else binary_cross_entropy(y, out)
    grads = backward(spec, params, caches, y, l2_lambda=l2_lambda)
    reg = 0.0
    if l2_lambda:
        reg = l2_lambda * sum(
            float((arr * arr).sum())
            for w in params.weights
            for key, arr in w.items()
            if key.startswith("W")
        )
    return data + reg, out, grads


def adam_step(params: Params, grads, config: TrainConfig, t: int) -> Params:
    """Standard Adam update with bias correction; t counts from 1."""
    if t < 1:
        raise ConfigError("Adam step index starts at 1")
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    lr = config.learning_rate
    for i, layer_grads in enumerate(grads):
        for key, g in layer_grads.items():
            m = params.adam_m[i][key]
            v = params.adam_v[i][key]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            params.weights[i][key] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    params.step = t
    return params


def train(spec: ModelSpec, x, labels, config: TrainConfig, params: Params | None = None):
    """Mini-batch Adam training; returns (params, history).

    history holds one dict per epoch with mean loss and accuracy measured
    on the shuffled training stream before each update. Training is
    deterministic for a fixed config seed. A non-finite loss aborts with a
    TrainingError suggesting the usual suspects.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(x) != len(labels):
        raise ConfigError("x and labels length mismatch")
    if len(x) == 0:
        raise ConfigError("empty training set")
    y = one_hot(labels, spec.output_classes)

    if params is None:
        params = init_params(spec, seed=config.rng_seed)
    rng = np.random.default_rng(config.rng_seed + 1)
    history = []
    t = params.step
    for epoch in range(config.epochs):
        order = rng.permutation(len(x))
        losses = []
        sizes = []
        correct = 0
        for start in range(0, len(x), config.batch_size):
            sel = order[start : start + config.batch_size]
            loss, out, grads = loss_and_grads(
                spec, params, x[sel], y[sel], l2_lambda=config.l2_lambda
            )
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, step {t + 1}; "
                    "try a lower learning rate or check inputs for overflow"
                )
            correct += int((np.argmax(out, axis=1) == labels[sel]).sum())
            losses.append(loss)
            sizes.append(len(sel))
            t += 1
            adam_step(params, grads, config, t)
        history.append(
            {
                "epoch": epoch + 1,
                "loss": float(np.average(losses, weights=sizes)),
                "accuracy": correct / len(x),
            }
        )
    return params, history


def predict_proba(spec, params, x, batch_size: int = 1024):
    """Forward in chunks; returns output rows for each input row."""
    x = np.asarray(x, dtype=np.float64)
    outs = []
    for start in range(0, len(x), batch_size):
        out, _ = forward(spec, params, x[start : start + batch_size])
        outs.append(out)
    return np.concatenate(outs, axis=0)


def accuracy(spec, params, x, labels) -> float:
    probs = predict_proba(spec, params, x)
    return float((np.argmax(probs, axis=1) == np.asarray(labels)).mean())
