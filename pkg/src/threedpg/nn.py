"""Fixed-depth feed-forward networks with hand-written reverse-mode gradients.

Parameters live in one flat float64 vector. For every layer the weight matrix
(``output_dim x input_dim``, row-major) comes first, then the bias. This
layer-major layout is also the wire order used by the network simulator.

GELU uses the exact erf form ``x * Phi(x)`` (``scipy.special.erf``, Cephes),
not the tanh approximation, so that its derivative is exact and C^2.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from .errors import ConfigurationError, NonFiniteParameterError, StaleTapeError

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_generation = itertools.count(1)


class Activation(str, enum.Enum):
    GELU = "gelu"
    TANH = "tanh"
    IDENTITY = "identity"


def gelu(x):
    return x * (0.5 * (1.0 + erf(x * _SQRT_HALF)))


def gelu_prime(x):
    """Exact derivative ``Phi(x) + x * phi(x)``."""
    cdf = 0.5 * (1.0 + erf(x * _SQRT_HALF))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def _activate(kind: Activation, z: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Returns ``(output, aux)``; for GELU ``aux`` caches Phi(z) for the backward pass."""
    if kind is Activation.GELU:
        cdf = 0.5 * (1.0 + erf(z * _SQRT_HALF))
        return z * cdf, cdf
    if kind is Activation.TANH:
        return np.tanh(z), None
    return z, None


def _activate_prime(kind: Activation, z: np.ndarray, out: np.ndarray, aux) -> np.ndarray | None:
    # None means identity derivative; callers skip the multiply.
    if kind is Activation.GELU:
        return aux + z * (_INV_SQRT_2PI * np.exp(-0.5 * z * z))
    if kind is Activation.TANH:
        return 1.0 - out * out
    return None


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: Activation = Activation.GELU

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ConfigurationError(f"layer dims must be >= 1, got {self.input_dim}x{self.output_dim}")
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def n_params(self) -> int:
        return self.input_dim * self.output_dim + self.output_dim


def build_shape(input_dim: int, hidden: Sequence[int], output_dim: int,
                hidden_activation=Activation.GELU,
                output_activation=Activation.IDENTITY) -> tuple[LayerSpec, ...]:
    dims = [input_dim, *hidden, output_dim]
    layers = []
    for k, (n_in, n_out) in enumerate(zip(dims[:-1], dims[1:])):
        act = output_activation if k == len(dims) - 2 else hidden_activation
        layers.append(LayerSpec(n_in, n_out, act))
    return tuple(layers)


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Immutable parameter vector plus its layer shapes.

    Every instance gets a fresh generation number; an :class:`EvalTape` is
    only accepted by :func:`backward` for the instance that produced it.
    """

    shape: tuple[LayerSpec, ...]
    values: np.ndarray
    generation: int = field(init=False)
    _layers: tuple = field(init=False, repr=False)

    def __post_init__(self):
        shape = tuple(self.shape)
        if not shape:
            raise ConfigurationError("an MLP needs at least one layer")
        for a, b in zip(shape[:-1], shape[1:]):
            if a.output_dim != b.input_dim:
                raise ConfigurationError(
                    f"layer mismatch: output_dim {a.output_dim} feeds input_dim {b.input_dim}")
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        expected = sum(layer.n_params for layer in shape)
        if values.size != expected:
            raise ConfigurationError(f"expected {expected} parameters, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteParameterError("parameter vector contains NaN or Inf")
        values.flags.writeable = False
        layers = []
        offset = 0
        for layer in shape:
            n_w = layer.input_dim * layer.output_dim
            w = values[offset:offset + n_w].reshape(layer.output_dim, layer.input_dim)
            b = values[offset + n_w:offset + n_w + layer.output_dim]
            layers.append((w, b, layer.activation))
            offset += n_w + layer.output_dim
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "generation", next(_generation))
        object.__setattr__(self, "_layers", tuple(layers))

    @property
    def input_dim(self) -> int:
        return self.shape[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.shape[-1].output_dim

    @property
    def size(self) -> int:
        return self.values.size

    def replace(self, values: np.ndarray) -> "MlpParams":
        return MlpParams(self.shape, values)

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def param_count(shape: Sequence[LayerSpec]) -> int:
    return sum(layer.n_params for layer in shape)


def init_params(shape: Sequence[LayerSpec], rng: np.random.Generator) -> MlpParams:
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] for weights and biases."""
    chunks = []
    for layer in shape:
        bound = 1.0 / math.sqrt(layer.input_dim)
        chunks.append(rng.uniform(-bound, bound, size=layer.n_params))
    return MlpParams(tuple(shape), np.concatenate(chunks))


def zero_params(shape: Sequence[LayerSpec]) -> MlpParams:
    return MlpParams(tuple(shape), np.zeros(param_count(shape)))


@dataclass(frozen=True)
class EvalTape:
    generation: int
    inputs: tuple        # input to each layer
    outputs: tuple       # post-activation output of each layer
    pre: tuple           # pre-activations
    aux: tuple           # per-layer activation cache (Phi(z) for GELU)


def forward(params: MlpParams, x) -> tuple[np.ndarray, EvalTape]:
    """Evaluate the network on one input vector or a ``(batch, input_dim)`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.input_dim or x.ndim not in (1, 2):
        raise ConfigurationError(f"input of shape {x.shape} does not match input_dim {params.input_dim}")
    inputs, outputs, pre, aux = [], [], [], []
    h = x
    for w, b, act in params._layers:
        inputs.append(h)
        z = h @ w.T + b
        h, cache = _activate(act, z)
        pre.append(z)
        outputs.append(h)
        aux.append(cache)
    return h, EvalTape(params.generation, tuple(inputs), tuple(outputs), tuple(pre), tuple(aux))


def backward(params: MlpParams, tape: EvalTape, out_grad) -> tuple[np.ndarray, np.ndarray]:
    """Vector-Jacobian product of ``<out_grad, output>``.

    Returns ``(param_grad, input_grad)``. For batched tapes the parameter
    gradient is summed over the batch and ``input_grad`` keeps the batch axis.
    """
    if tape.generation != params.generation:
        raise StaleTapeError("tape was produced by a different parameter instance")
    g = np.asarray(out_grad, dtype=np.float64)
    if g.shape != tape.outputs[-1].shape:
        raise ConfigurationError(f"out_grad shape {g.shape} != output shape {tape.outputs[-1].shape}")
    grads = []
    for k in range(len(params._layers) - 1, -1, -1):
        w, _, act = params._layers[k]
        d = _activate_prime(act, tape.pre[k], tape.outputs[k], tape.aux[k])
        dz = g if d is None else g * d
        h = tape.inputs[k]
        if dz.ndim == 1:
            grads.append((np.outer(dz, h).ravel(), dz))
        else:
            grads.append(((dz.T @ h).ravel(), dz.sum(axis=0)))
        g = dz @ w
    param_grad = np.concatenate([part for pair in reversed(grads) for part in pair])
    return param_grad, g


def check_bounds(bounds) -> tuple[np.ndarray, np.ndarray]:
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo >= hi):
        raise ConfigurationError(f"action bounds need lower < upper, got {bounds.tolist()}")
    return lo, hi


def actor_forward(params: MlpParams, obs, action_bounds) -> np.ndarray:
    """Policy output rescaled from the tanh range [-1, 1] to ``action_bounds``."""
    action, _ = actor_forward_tape(params, obs, action_bounds)
    return action


def actor_forward_tape(params: MlpParams, obs, action_bounds) -> tuple[np.ndarray, EvalTape]:
    if params.shape[-1].activation is not Activation.TANH:
        raise ConfigurationError("actor networks need a tanh output layer")
    lo, hi = check_bounds(action_bounds)
    if lo.size != params.output_dim:
        raise ConfigurationError("one bound interval per action dimension is required")
    t, tape = forward(params, obs)
    return lo + (t + 1.0) * (hi - lo) / 2.0, tape


def actor_backward(params: MlpParams, tape: EvalTape, action_grad, action_bounds) -> np.ndarray:
    """Parameter gradient of ``<action_grad, actor_forward(...)>``."""
    lo, hi = check_bounds(action_bounds)
    param_grad, _ = backward(params, tape, np.asarray(action_grad) * ((hi - lo) / 2.0))
    return param_grad


def ensure_finite(values: np.ndarray, what: str = "parameters") -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteParameterError(f"{what} became non-finite")
    return values
