"""Bayesian classification model over feed-forward network weights.

The network is a plain multilayer perceptron with one bias per unit and a
softmax head. Its weights live in a single flat vector so that MCMC kernels
can treat the whole model as a point in R^D. The unnormalized log-posterior
is the categorical log-likelihood plus an isotropic zero-mean Gaussian
log-prior; the normalizing evidence term is never computed because the
samplers only ever need density ratios.

Weight vector layout: layer by layer from the input side; within a layer
the weight matrix (shape ``n_out x n_in``) flattened row-major, followed by
the ``n_out`` biases. A Gaussian prior with variance ``s2`` is equivalent
to an L2 weight-decay penalty of strength ``lambda = 1 / (2 * s2)`` up to a
weight-independent constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import as_labels, as_matrix, as_vector

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the classifier head: layer widths and activation.

    Parameters
    ----------
    input_dim : int
        Number of input features.
    hidden_dims : tuple of int
        Widths of the hidden layers; may be empty for a linear model.
    n_classes : int
        Number of output classes, at least 2.
    activation : str
        Hidden-layer nonlinearity, ``"relu"`` or ``"tanh"``.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = ()
    n_classes: int = 2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must all be >= 1, got {self.hidden_dims}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.n_classes)


@dataclass(frozen=True)
class PriorSpec:
    """Zero-mean isotropic Gaussian prior over all weights and biases."""

    variance: float = 1.0

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError(f"prior variance must be positive, got {self.variance}")

    @property
    def weight_decay(self) -> float:
        """Equivalent L2 penalty strength, ``1 / (2 * variance)``."""
        return 1.0 / (2.0 * self.variance)


@dataclass(frozen=True)
class Dataset:
    """A labelled feature matrix: ``n`` rows, integer labels in [0, K)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        features = as_matrix(self.features, "features")
        if features.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.n_classes < 1:
            raise ValueError(f"n_classes must be >= 1, got {self.n_classes}")
        labels = as_labels(self.labels, self.n_classes)
        if labels.shape[0] != features.shape[0]:
            raise ValueError(
                f"{labels.shape[0]} labels for {features.shape[0]} feature rows"
            )
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def param_count(spec: NetworkSpec) -> int:
    """Total number of parameters: sum of (n_in + 1) * n_out over layer pairs."""
    dims = spec.layer_dims
    return sum((dims[i] + 1) * dims[i + 1] for i in range(len(dims) - 1))


def _check_weights(spec: NetworkSpec, w) -> np.ndarray:
    w = as_vector(w, "weights")
    expected = param_count(spec)
    if w.shape[0] != expected:
        raise ValueError(f"weight vector has length {w.shape[0]}, spec needs {expected}")
    return w


def unpack_weights(spec: NetworkSpec, w) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split a flat weight vector into per-layer (matrix, bias) views."""
    w = _check_weights(spec, w)
    dims = spec.layer_dims
    layers = []
    offset = 0
    for i in range(len(dims) - 1):
        n_in, n_out = dims[i], dims[i + 1]
        mat = w[offset : offset + n_in * n_out].reshape(n_out, n_in)
        offset += n_in * n_out
        bias = w[offset : offset + n_out]
        offset += n_out
        layers.append((mat, bias))
    return layers


def pack_weights(spec: NetworkSpec, layers) -> np.ndarray:
    """Inverse of :func:`unpack_weights`."""
    parts = []
    for mat, bias in layers:
        parts.append(np.asarray(mat, dtype=np.float64).ravel())
        parts.append(np.asarray(bias, dtype=np.float64).ravel())
    w = np.concatenate(parts)
    return _check_weights(spec, w)


def _activate(name: str, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(a, 0.0)
    return np.tanh(a)


def _activate_deriv(name: str, a: np.ndarray) -> np.ndarray:
    # ReLU derivative at exactly 0 is taken as 0.
    if name == "relu":
        return (a > 0.0).astype(np.float64)
    t = np.tanh(a)
    return 1.0 - t * t


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax with max subtraction for overflow safety."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _logits(spec: NetworkSpec, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    layers = unpack_weights(spec, w)
    z = X
    for mat, bias in layers[:-1]:
        z = _activate(spec.activation, z @ mat.T + bias)
    mat, bias = layers[-1]
    return z @ mat.T + bias


def forward_batch(spec: NetworkSpec, w, X) -> np.ndarray:
    """Class probabilities for every row of ``X``, shape ``(n, n_classes)``."""
    X = as_matrix(X, "X")
    if X.shape[1] != spec.input_dim:
        raise ValueError(f"X has {X.shape[1]} features, spec needs {spec.input_dim}")
    return np.exp(_log_softmax(_logits(spec, np.asarray(w, dtype=np.float64), X)))


def forward(spec: NetworkSpec, w, x) -> np.ndarray:
    """Class probabilities for a single feature vector."""
    x = as_vector(x, "x")
    return forward_batch(spec, w, x[None, :])[0]


def log_likelihood(spec: NetworkSpec, w, data: Dataset) -> float:
    """Categorical log-likelihood: sum_i log p(y_i | x_i, w).

    Computed from log-softmax directly (logit minus logsumexp), so the
    result is finite for any finite weights.
    """
    if data.n_features != spec.input_dim:
        raise ValueError(
            f"dataset has {data.n_features} features, spec needs {spec.input_dim}"
        )
    if data.n_classes != spec.n_classes:
        raise ValueError(
            f"dataset has {data.n_classes} classes, spec needs {spec.n_classes}"
        )
    logp = _log_softmax(_logits(spec, np.asarray(w, dtype=np.float64), data.features))
    return float(logp[np.arange(data.n_samples), data.labels].sum())


def log_prior(w, prior: PriorSpec) -> float:
    """Log-density of the isotropic Gaussian prior at ``w``."""
    w = as_vector(w, "weights")
    d = w.shape[0]
    s2 = prior.variance
    return float(-0.5 * d * math.log(2.0 * math.pi * s2) - 0.5 * w @ w / s2)


def log_posterior_unnorm(spec: NetworkSpec, w, data: Dataset, prior: PriorSpec) -> float:
    """Log-likelihood plus log-prior; the evidence term is deliberately omitted."""
    w = _check_weights(spec, w)
    return log_likelihood(spec, w, data) + log_prior(w, prior)


def grad_log_posterior(
    spec: NetworkSpec, w, data: Dataset, prior: PriorSpec
) -> np.ndarray:
    """Exact gradient of :func:`log_posterior_unnorm` with respect to ``w``.

    Reverse-mode accumulation through the layers; softmax and the
    categorical log-likelihood combine to the probability-minus-one-hot
    form at the output, here with ascending sign (one-hot minus
    probabilities).
    """
    w = _check_weights(spec, w)
    if data.n_features != spec.input_dim:
        raise ValueError(
            f"dataset has {data.n_features} features, spec needs {spec.input_dim}"
        )
    if data.n_classes != spec.n_classes:
        raise ValueError(
            f"dataset has {data.n_classes} classes, spec needs {spec.n_classes}"
        )
    layers = unpack_weights(spec, w)
    X = data.features

    # Forward pass, caching pre-activations and layer inputs.
    inputs = [X]
    pre = []
    z = X
    for mat, bias in layers[:-1]:
        a = z @ mat.T + bias
        pre.append(a)
        z = _activate(spec.activation, a)
        inputs.append(z)
    mat, bias = layers[-1]
    logits = inputs[-1] @ mat.T + bias

    probs = np.exp(_log_softmax(logits))
    delta = -probs
    delta[np.arange(data.n_samples), data.labels] += 1.0

    # Backward pass, output layer first.
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    grads.append((delta.T @ inputs[-1], delta.sum(axis=0)))
    upstream = delta @ layers[-1][0]
    for l in range(len(layers) - 2, -1, -1):
        d = upstream * _activate_deriv(spec.activation, pre[l])
        grads.append((d.T @ inputs[l], d.sum(axis=0)))
        upstream = d @ layers[l][0]
    grads.reverse()

    return pack_weights(spec, grads) - w / prior.variance
