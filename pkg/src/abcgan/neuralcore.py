"""Minimal dense-network engine.

Forward evaluation, exact reverse-mode gradients, binary cross-entropy,
and an Adam optimizer -- just enough for small generator/discriminator
networks. Everything is float64 so gradient checks can be tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# A Matrix is a 2-D float64 ndarray, rows = batch items.
Matrix = np.ndarray

ACTIVATIONS = ("relu", "sigmoid", "identity")

BCE_EPS = 1e-7

# Keep sigmoid outputs strictly inside (0, 1) even under saturation.
_SIG_LO = 1e-16
_SIG_HI = 1.0 - 1e-16


class ShapeError(ValueError):
    """Batch/gradient dimensions incompatible with the network."""


class NonFiniteGradientError(FloatingPointError):
    """A gradient contained NaN or inf; treat as training divergence."""


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, clipped to the open unit interval."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _SIG_LO, _SIG_HI)


def _apply_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return sigmoid(z)
    return z


def _activation_grad(post: np.ndarray, kind: str) -> np.ndarray:
    # Derivatives expressed through the post-activation value; valid for
    # all three supported activations.
    if kind == "relu":
        return (post > 0.0).astype(np.float64)
    if kind == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(post)


@dataclass
class DenseLayer:
    """One affine layer: y = activation(x @ weights.T + bias)."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray     # (out,)
    activation: str

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("weights must be 2-D and bias 1-D")
        if self.weights.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"bias length {self.bias.shape[0]} does not match "
                f"{self.weights.shape[0]} output units"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    """An ordered chain of dense layers."""

    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for i in range(1, len(self.layers)):
            if self.layers[i].in_dim != self.layers[i - 1].out_dim:
                raise ShapeError(
                    f"layer {i} expects {self.layers[i].in_dim} inputs but "
                    f"layer {i - 1} emits {self.layers[i - 1].out_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...]; arrays are live views."""
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.append(layer.weights)
            params.append(layer.bias)
        return params


@dataclass
class GradientSet:
    """Gradients shape-congruent with a Network, plus the input-batch gradient."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray
    skip_grad: float | None = None

    def parameter_grads(self) -> list[np.ndarray]:
        """Gradient list matching Network.parameters() order."""
        grads: list[np.ndarray] = []
        for dw, db in zip(self.weight_grads, self.bias_grads):
            grads.append(dw)
            grads.append(db)
        return grads


def init_network(
    layer_dims: list[int], activations: list[str], rng: np.random.Generator
) -> Network:
    """Build a network with uniform(-a, a) weights, a = sqrt(6/(fan_in+fan_out)).

    Biases start at zero. The result is a deterministic function of the rng
    state, so two generators seeded identically produce identical networks.
    """
    if len(layer_dims) < 2:
        raise ValueError("layer_dims must list at least input and output sizes")
    if len(activations) != len(layer_dims) - 1:
        raise ValueError(
            f"need {len(layer_dims) - 1} activations, got {len(activations)}"
        )
    layers = []
    for fan_in, fan_out, act in zip(layer_dims, layer_dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(weights, np.zeros(fan_out), act))
    return Network(layers)


def _check_batch(net: Network, batch: Matrix) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != net.input_dim:
        raise ShapeError(
            f"layer 0 expects {net.input_dim} input columns, batch has "
            f"{batch.shape[1]}"
        )
    return batch


def forward_trace(net: Network, batch: Matrix) -> list[np.ndarray]:
    """Run the network and return [input, post-activation of every layer]."""
    batch = _check_batch(net, batch)
    acts = [batch]
    out = batch
    for layer in net.layers:
        out = _apply_activation(out @ layer.weights.T + layer.bias, layer.activation)
        acts.append(out)
    return acts


def forward(net: Network, batch: Matrix) -> Matrix:
    """Final-layer activations for a batch; pure function of (net, batch)."""
    return forward_trace(net, batch)[-1]


def backward(
    net: Network,
    batch: Matrix,
    upstream_grad: Matrix,
    trace: list[np.ndarray] | None = None,
) -> GradientSet:
    """Exact gradients of the scalar loss whose output-gradient is `upstream_grad`.

    Returns gradients w.r.t. every weight, bias, and the input batch. When a
    forward trace is not supplied, the forward pass is recomputed internally.
    """
    if trace is None:
        trace = forward_trace(net, batch)
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    if upstream_grad.shape != trace[-1].shape:
        raise ShapeError(
            f"upstream gradient shape {upstream_grad.shape} does not match "
            f"output shape {trace[-1].shape}"
        )
    n_layers = len(net.layers)
    weight_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    grad = upstream_grad
    for k in range(n_layers - 1, -1, -1):
        layer = net.layers[k]
        dz = grad * _activation_grad(trace[k + 1], layer.activation)
        weight_grads[k] = dz.T @ trace[k]
        bias_grads[k] = dz.sum(axis=0)
        grad = dz @ layer.weights
    return GradientSet(weight_grads, bias_grads, input_grad=grad)


def bce_loss(pred: np.ndarray, label: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. `pred`.

    Predictions are clamped to [1e-7, 1 - 1e-7] before the logs; the gradient
    treats the clamp as the identity so saturated predictions keep a signal.
    """
    pred = np.asarray(pred, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if pred.shape != label.shape:
        raise ShapeError(f"pred shape {pred.shape} != label shape {label.shape}")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(np.mean(-(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))))
    grad = (p - label) / (p * (1.0 - p)) / pred.size
    return loss, grad


@dataclass
class OptimizerState:
    """Adam accumulators for one parameter list."""

    learning_rate: float
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float, **kw) -> "OptimizerState":
        state = cls(learning_rate=learning_rate, **kw)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: OptimizerState
) -> tuple[list[np.ndarray], OptimizerState]:
    """One in-place Adam update with bias correction.

    Raises NonFiniteGradientError if any gradient entry is NaN/inf, which
    callers treat as a training-divergence signal.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state must align")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(
                f"non-finite gradient at optimizer step {state.step + 1}"
            )
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
