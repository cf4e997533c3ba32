"""Small feed-forward networks with hand-written backprop and Adam.

Everything is float64. Weight matrix ``i`` has shape ``(out, in)`` and the
forward map of a layer is ``h @ W.T + b``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")


@dataclass
class Mlp:
    layer_sizes: list[int]
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or any(int(n) <= 0 for n in self.layer_sizes):
            raise ValueError(f"bad layer_sizes {self.layer_sizes}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        if not self.weights:
            self.weights = [np.zeros((o, i)) for i, o in zip(self.layer_sizes, self.layer_sizes[1:])]
            self.biases = [np.zeros(o) for o in self.layer_sizes[1:]]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != want or b.shape != (want[0],):
                raise ValueError(f"layer {i}: weight {w.shape}, bias {b.shape}, expected {want}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        """Parameters in the canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * self.n_layers:
            raise ValueError("parameter list length does not match network")
        for i in range(self.n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError(f"shape mismatch at layer {i}")
            self.weights[i][...] = w
            self.biases[i][...] = b

    def copy(self) -> "Mlp":
        return copy.deepcopy(self)

    def __call__(self, inputs):
        return forward(self, inputs)


def init_mlp(layer_sizes, rng, hidden_activation="relu", output_activation="identity") -> Mlp:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` init for weights and biases."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    weights, biases = [], []
    for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    return Mlp(list(layer_sizes), hidden_activation, output_activation, weights, biases)


def _as_batch(net: Mlp, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ValueError(f"expected inputs of width {net.in_dim}, got shape {np.shape(inputs)}")
    return x


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def forward_cache(net: Mlp, inputs) -> list[np.ndarray]:
    """Run the net and keep every layer's post-activation output.

    Element 0 is the input batch and the last element is the network output.
    """
    h = _as_batch(net, inputs)
    acts = [h]
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        h = _activate(z, net.output_activation if i == last else net.hidden_activation)
        acts.append(h)
    return acts


def forward(net: Mlp, inputs) -> np.ndarray:
    """Batched forward pass. A 1-D input is treated as a batch of one."""
    return forward_cache(net, inputs)[-1]


def backward(net: Mlp, inputs, upstream, cache=None, param_grads=True):
    """Gradients of ``sum(output * upstream)``.

    Parameter gradients are averaged over the batch; input gradients are
    per row. Returns ``(param_grads, input_grads)`` with ``param_grads`` in
    the order of :meth:`Mlp.params` (``None`` when ``param_grads=False``).
    """
    acts = cache if cache is not None else forward_cache(net, inputs)
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    out = acts[-1]
    if g.shape != out.shape:
        raise ValueError(f"upstream shape {g.shape} does not match output shape {out.shape}")
    batch = out.shape[0]
    grads = [None] * (2 * net.n_layers) if param_grads else None
    last = net.n_layers - 1
    for i in range(last, -1, -1):
        kind = net.output_activation if i == last else net.hidden_activation
        h = acts[i + 1]
        if kind == "tanh":
            g = g * (1.0 - h * h)
        elif kind == "relu":
            # subgradient 0 at the kink
            g = np.where(h > 0.0, g, 0.0)
        if param_grads:
            grads[2 * i] = g.T @ acts[i] / batch
            grads[2 * i + 1] = g.sum(axis=0) / batch
        g = g @ net.weights[i]
    return grads, g


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        zeros = lambda: [np.zeros_like(p) for p in net.params()]
        return cls(zeros(), zeros(), 0, learning_rate, beta1, beta2, epsilon)


class NonFiniteGradientError(FloatingPointError):
    pass


def adam_update(net: Mlp, grads, state: AdamState) -> None:
    """One bias-corrected Adam step, applied in place to ``net`` and ``state``."""
    params = net.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match network parameters")
    for j, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape:
            raise ValueError(f"gradient {j} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            kind = "weight" if j % 2 == 0 else "bias"
            raise NonFiniteGradientError(f"non-finite {kind} gradient in layer {j // 2}")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1.0 - b1**t, 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: int
    worst_index: tuple
    n_checked: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def _rel_error(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return np.abs(a - b) / denom


def gradient_check(net: Mlp, inputs, upstream=None, step=1e-5, include_inputs=True) -> GradCheckReport:
    """Compare :func:`backward` against central finite differences.

    The checked scalar is ``mean_over_batch(sum(output * upstream))`` for the
    parameters (matching the batch-averaged parameter gradients) and
    ``sum(output * upstream)`` for the inputs. ``upstream`` defaults to ones.
    """
    x = _as_batch(net, inputs)
    out = forward(net, x)
    u = np.ones_like(out) if upstream is None else np.asarray(upstream, dtype=np.float64)
    batch = x.shape[0]
    grads, gin = backward(net, x, u)

    def objective(n, xx):
        return float(np.sum(forward(n, xx) * u))

    worst = (0.0, -1, ())
    count = 0
    probe = net.copy()
    for j, p in enumerate(probe.params()):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = objective(probe, x)
            p[idx] = orig - step
            down = objective(probe, x)
            p[idx] = orig
            numeric = (up - down) / (2 * step) / batch
            err = float(_rel_error(numeric, grads[j][idx]))
            count += 1
            if err > worst[0]:
                worst = (err, j, idx)
    if include_inputs:
        xp = x.copy()
        for idx in np.ndindex(xp.shape):
            orig = xp[idx]
            xp[idx] = orig + step
            up = objective(net, xp)
            xp[idx] = orig - step
            down = objective(net, xp)
            xp[idx] = orig
            numeric = (up - down) / (2 * step)
            err = float(_rel_error(numeric, gin[idx]))
            count += 1
            if err > worst[0]:
                worst = (err, -1, idx)
    return GradCheckReport(worst[0], worst[1], worst[2], count)
