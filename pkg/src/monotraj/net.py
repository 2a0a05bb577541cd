"""Fully connected network with an exposed final linear layer.

The score is ``f(x) = w . g(x) + b`` where ``g`` is the output of the last
hidden layer (the embedding). Backward accepts gradient contributions on the
logit, on the embedding directly, and on ``w`` directly, which is what a loss
built from cosines between embedding differences and ``w`` needs.

Weights are stored as (fan_out, fan_in) matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ContractError, DimensionError

DEFAULT_HIDDEN = (64, 64, 64, 32, 32, 32)
CHECKPOINT_FORMAT = "monotraj-mlp"
CHECKPOINT_VERSION = 1


@dataclass(eq=False)
class MlpParams:
    weights: list
    biases: list
    activation: str = "relu"
    seed: Optional[int] = None

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[1]] + [W.shape[0] for W in self.weights]

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    @property
    def w(self) -> np.ndarray:
        """Final-layer weight vector over the embedding, shape (p,)."""
        return self.weights[-1][0]

    @property
    def b(self) -> float:
        return float(self.biases[-1][0])

    def copy(self) -> "MlpParams":
        return MlpParams(
            [W.copy() for W in self.weights], [c.copy() for c in self.biases], self.activation, self.seed
        )

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def with_flat(self, vector: np.ndarray) -> "MlpParams":
        out = self.copy()
        pos = 0
        for W, c in zip(out.weights, out.biases):
            W[...] = vector[pos : pos + W.size].reshape(W.shape)
            pos += W.size
            c[...] = vector[pos : pos + c.size]
            pos += c.size
        return out

    def arrays(self) -> list:
        """Interleaved [W0, b0, W1, b1, ...] views, the order used by optimizers."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]


def init_params(layer_sizes: Sequence[int], seed: int = 0, activation: str = "relu") -> MlpParams:
    """Uniform fan-in initialization: W ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)), biases 0.

    The bound gives unit-variance weights times 1/sqrt(fan_in).
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ConfigError("layer_sizes needs at least an input and an output size")
    if any(s <= 0 for s in sizes):
        raise ConfigError(f"layer sizes must be positive, got {sizes}")
    if sizes[-1] != 1:
        raise ConfigError(f"last layer must have size 1, got {sizes[-1]}")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, activation, seed)


def mlp_layer_sizes(d: int, hidden: Sequence[int] = DEFAULT_HIDDEN) -> list:
    return [d, *hidden, 1]


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _tanh_grad(z, a):
    return 1.0 - a * a


ACTIVATIONS = {
    "relu": (_relu, _relu_grad),
    "tanh": (np.tanh, _tanh_grad),
}


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    """Cached forward pass over a batch of inputs, one row per input.

    ``activations[l]`` is the output of hidden layer ``l``; the embedding is
    the last of them (or the inputs themselves for a net with no hidden layer).
    """

    inputs: np.ndarray
    pre_activations: tuple
    activations: tuple
    logits: np.ndarray

    @property
    def embedding(self) -> np.ndarray:
        return self.activations[-1] if self.activations else self.inputs

    def __len__(self):
        return self.inputs.shape[0]


def forward(params: MlpParams, x: np.ndarray) -> ForwardTrace:
    """Run the network on one input (d,) or a batch (n, d)."""
    X = np.asarray(x, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    d = params.weights[0].shape[1]
    if X.ndim != 2 or X.shape[1] != d:
        raise DimensionError(f"expected inputs with {d} features, got shape {np.shape(x)}")
    act, _ = ACTIVATIONS[params.activation]
    pre, acts = [], []
    h = X
    for W, c in zip(params.weights[:-1], params.biases[:-1]):
        z = h @ W.T + c
        h = act(z)
        pre.append(z)
        acts.append(h)
    g = h
    logits = g @ params.w + params.b
    return ForwardTrace(X, tuple(pre), tuple(acts), logits)


def score(params: MlpParams, X: np.ndarray) -> np.ndarray:
    return forward(params, X).logits


def backward(
    params: MlpParams,
    trace: ForwardTrace,
    logit_grads: np.ndarray,
    embedding_grads: Optional[np.ndarray] = None,
    w_grad: Optional[np.ndarray] = None,
) -> MlpParams:
    """Gradient of a loss with respect to every parameter.

    Args:
        trace: forward trace of the batch.
        logit_grads: dL/df per input, shape (n,).
        embedding_grads: dL/dg per input that does not pass through the final
            layer, shape (n, p). None means zero.
        w_grad: direct dL/dw not mediated by the logits, shape (p,).

    Returns:
        An MlpParams holding gradients in place of values.
    """
    n = len(trace)
    logit_grads = np.asarray(logit_grads, dtype=np.float64)
    if logit_grads.shape != (n,):
        raise ContractError(f"logit_grads shape {logit_grads.shape} does not match {n} inputs")
    g = trace.embedding
    p = g.shape[1]
    if embedding_grads is not None:
        embedding_grads = np.asarray(embedding_grads, dtype=np.float64)
        if embedding_grads.shape != (n, p):
            raise ContractError(
                f"embedding_grads shape {embedding_grads.shape} does not match ({n}, {p})"
            )
    if w_grad is not None and np.shape(w_grad) != (p,):
        raise ContractError(f"w_grad shape {np.shape(w_grad)} does not match ({p},)")

    _, act_grad = ACTIVATIONS[params.activation]
    gW = [None] * len(params.weights)
    gb = [None] * len(params.biases)

    gW[-1] = (logit_grads @ g)[None, :]
    if w_grad is not None:
        gW[-1] = gW[-1] + w_grad[None, :]
    gb[-1] = np.array([logit_grads.sum()])

    delta = np.outer(logit_grads, params.w)
    if embedding_grads is not None:
        delta = delta + embedding_grads
    for layer in range(params.n_hidden - 1, -1, -1):
        dz = delta * act_grad(trace.pre_activations[layer], trace.activations[layer])
        below = trace.activations[layer - 1] if layer > 0 else trace.inputs
        gW[layer] = dz.T @ below
        gb[layer] = dz.sum(axis=0)
        if layer > 0:
            delta = dz @ params.weights[layer]
    return MlpParams(gW, gb, params.activation, params.seed)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def params_to_dict(params: MlpParams) -> dict:
    # repr() of a float64 round-trips exactly, so a JSON text blob is bit-faithful.
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": params.layer_sizes,
        "activation": params.activation,
        "seed": params.seed,
        "weights": [W.tolist() for W in params.weights],
        "biases": [c.tolist() for c in params.biases],
    }


def params_from_dict(data: dict) -> MlpParams:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError("not a network checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {data.get('version')}")
    weights = [np.array(W, dtype=np.float64) for W in data["weights"]]
    biases = [np.array(c, dtype=np.float64) for c in data["biases"]]
    params = MlpParams(weights, biases, data["activation"], data.get("seed"))
    if params.layer_sizes != list(data["layer_sizes"]):
        raise ConfigError("checkpoint layer sizes disagree with stored arrays")
    return params


def save_params(params: MlpParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> MlpParams:
    return params_from_dict(json.loads(Path(path).read_text()))
