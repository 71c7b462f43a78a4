"""Dense feed-forward networks with exact reverse-mode gradients.

Everything is float64 numpy. A network is an :class:`MLPParams` (a list of
affine layers, each followed by an elementwise activation); ``mlp_forward``
returns the output together with a cache that ``mlp_backward`` consumes to
produce gradients for every parameter and for the input batch.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

ACTIVATIONS = ("relu", "leaky_relu", "softplus", "sigmoid", "identity")
LEAKY_SLOPE = 0.01


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    """A forward cache was used with parameters it was not produced from."""


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


def _activate(kind, z):
    if kind == "identity":
        return z
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if kind == "softplus":
        return softplus(z)
    if kind == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def _backprop_activation(kind, z, g):
    """``g * act'(z)`` without materializing the derivative where avoidable."""
    if kind == "identity":
        return g
    if kind == "relu":
        return np.where(z > 0, g, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0, g, LEAKY_SLOPE * g)
    return g * activation_eval(kind, z)[1]


def activation_eval(kind, x):
    """Value and derivative of activation ``kind`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "identity":
        value, deriv = x.copy(), np.ones_like(x)
    elif kind == "relu":
        value, deriv = np.maximum(x, 0.0), (x > 0).astype(np.float64)
    elif kind == "leaky_relu":
        value = np.where(x > 0, x, LEAKY_SLOPE * x)
        deriv = np.where(x > 0, 1.0, LEAKY_SLOPE)
    elif kind == "softplus":
        value, deriv = softplus(x), sigmoid(x)
    elif kind == "sigmoid":
        value = sigmoid(x)
        deriv = value * (1.0 - value)
    else:
        raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} do not match"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MLPParams:
    layers: list
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("an MLP needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.weight.shape[0] != nxt.weight.shape[1]:
                raise ShapeError(
                    f"layer widths do not chain: {prev.weight.shape} -> {nxt.weight.shape}"
                )

    @property
    def in_features(self):
        return self.layers[0].weight.shape[1]

    @property
    def out_features(self):
        return self.layers[-1].weight.shape[0]

    @property
    def activations(self):
        return [layer.activation for layer in self.layers]

    def arrays(self):
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self):
        return MLPParams(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def zeros_like(self):
        return MLPParams(
            [
                Layer(np.zeros_like(l.weight), np.zeros_like(l.bias), l.activation)
                for l in self.layers
            ]
        )

    def squared_norm(self):
        return float(sum(np.sum(a * a) for a in self.arrays()))

    def digest(self):
        h = hashlib.sha256()
        for layer in self.layers:
            h.update(layer.activation.encode())
            for a in (layer.weight, layer.bias):
                h.update(str(a.shape).encode())
                h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def init_mlp(sizes, activations, rng):
    """Glorot-uniform weights, zero biases.

    ``sizes`` lists every width from input to output, so a network with
    ``len(sizes) - 1`` layers is built; ``activations`` may be a single name
    applied to all layers or one name per layer.
    """
    n_layers = len(sizes) - 1
    if n_layers < 1:
        raise ShapeError("sizes must include input and output widths")
    if isinstance(activations, str):
        activations = [activations] * n_layers
    if len(activations) != n_layers:
        raise ShapeError(f"{len(activations)} activations for {n_layers} layers")
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return MLPParams(layers)


@dataclass
class ForwardCache:
    params_id: int
    version: int
    inputs: list  # input to each layer
    pre: list  # pre-activation of each layer


def _as_batch(batch, width):
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[1] != width:
        raise ShapeError(f"batch of shape {batch.shape} does not fit input width {width}")
    return batch


def mlp_forward(params, batch):
    x = _as_batch(batch, params.in_features)
    inputs, pre = [], []
    for layer in params.layers:
        inputs.append(x)
        z = x @ layer.weight.T + layer.bias
        pre.append(z)
        x = _activate(layer.activation, z)
    return x, ForwardCache(id(params), params.version, inputs, pre)


def mlp_backward(params, cache, output_grad):
    """Gradients w.r.t. parameters (as an MLPParams) and w.r.t. the input batch."""
    if cache.params_id != id(params) or cache.version != params.version:
        raise StaleCacheError("forward cache does not belong to these parameters")
    if len(cache.pre) != len(params.layers):
        raise StaleCacheError("forward cache has the wrong number of layers")
    g = np.asarray(output_grad, dtype=np.float64)
    if g.shape != cache.pre[-1].shape:
        raise ShapeError(f"output_grad {g.shape} does not match outputs {cache.pre[-1].shape}")
    grads = []
    for layer, x, z in zip(reversed(params.layers), reversed(cache.inputs), reversed(cache.pre)):
        gz = _backprop_activation(layer.activation, z, g)
        grads.append(Layer(gz.T @ x, gz.sum(axis=0), layer.activation))
        g = gz @ layer.weight
    return MLPParams(grads[::-1]), g


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of ``logits`` against integer ``labels`` and its gradient."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"{labels.shape[0]} labels for {n} rows")
    if n and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    log_norm = logsumexp(logits, axis=1)
    rows = np.arange(n)
    loss = float(np.mean(log_norm - logits[rows, labels]))
    grad = np.exp(logits - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad / n


def add_weight_decay(grads, params, strength):
    """Add ``strength * w`` to every gradient array in place (L2 penalty)."""
    if strength:
        for g, w in zip(grads.arrays(), params.arrays()):
            g += strength * w
    return grads


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls(
            [np.zeros_like(a) for a in params.arrays()],
            [np.zeros_like(a) for a in params.arrays()],
            **kwargs,
        )


def adam_step(state, params, grads, lr):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for w, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    params.version += 1
    return params, state


@dataclass
class MomentumState:
    velocity: list
    momentum: float = 0.9

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls([np.zeros_like(a) for a in params.arrays()], **kwargs)


def momentum_step(state, params, grads, lr):
    """SGD with heavy-ball momentum: ``v <- mu*v + g``, ``w <- w - lr*v``."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for w, g, vel in zip(params.arrays(), grads.arrays(), state.velocity):
        vel *= state.momentum
        vel += g
        w -= lr * vel
    params.version += 1
    return params, state


def cosine_lr(epoch, total_epochs, base_lr):
    if total_epochs < 1 or not 0 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs}]")
    return base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs)) / 2.0
