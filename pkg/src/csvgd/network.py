"""Layered feed-forward networks with closed-form forward and reverse passes.

A network is a plain chain of affine maps and elementwise activations.
Everything here is a pure function of immutable value objects, so results
are reproducible bit-for-bit and safe to evaluate from multiple threads.
Besides the usual parameter/input gradients, the module provides the
parameter gradient of an input-directional derivative (reverse-over-forward),
which is what stress-style models built on input gradients need.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ShapeError

__all__ = [
    "LayeredNet",
    "Layout",
    "softplus",
    "sigmoid",
    "forward",
    "forward_batch",
    "grad_params",
    "grad_params_batch",
    "grad_input",
    "grad_input_batch",
    "dirderiv",
    "grad_params_dirderiv",
    "grad_params_dirderiv_batch",
    "param_count",
    "permute_hidden",
    "save_net",
    "load_net",
]

NET_FORMAT_TAG = "layered-net-v1"


def softplus(x):
    """Overflow-safe softplus: max(x,0) + log1p(exp(-|x|))."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _sigmoid_deriv(x):
    s = sigmoid(x)
    return s * (1.0 - s)


# tag -> (value, first derivative, second derivative)
_ACTIVATIONS = {
    "softplus": (softplus, sigmoid, _sigmoid_deriv),
    "identity": (lambda x: x, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
}


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Layout:
    """Ordered flattening map: tuple of (array name, shape)."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.entries)

    def slices(self) -> dict[str, slice]:
        out, off = {}, 0
        for name, shape in self.entries:
            n = int(np.prod(shape))
            out[name] = slice(off, off + n)
            off += n
        return out

    def flatten(self, arrays) -> np.ndarray:
        if len(arrays) != len(self.entries):
            raise ShapeError(f"layout has {len(self.entries)} entries, got {len(arrays)} arrays")
        parts = []
        for (name, shape), a in zip(self.entries, arrays):
            a = np.asarray(a, dtype=float)
            if a.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {a.shape}")
            parts.append(a.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def unflatten(self, flat) -> list[np.ndarray]:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.size,):
            raise ShapeError(f"flat vector has length {flat.shape}, layout needs ({self.size},)")
        out, off = [], 0
        for _, shape in self.entries:
            n = int(np.prod(shape))
            out.append(flat[off:off + n].reshape(shape))
            off += n
        return out


@dataclass(frozen=True)
class LayeredNet:
    """Immutable chain network.

    weights[k] maps layer k to layer k+1 and has shape
    (layer_widths[k+1], layer_widths[k]).  ``biases`` is the empty tuple for
    bias-free architectures.  ``activations`` holds one tag per link; the
    last one must be "identity".  ``nonneg_mask[k]`` marks weight matrices
    constrained to be elementwise >= 0.
    """

    layer_widths: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    nonneg_mask: tuple[bool, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ShapeError("need at least an input and an output layer")
        n_links = len(widths) - 1
        if len(self.weights) != n_links:
            raise ShapeError(f"expected {n_links} weight matrices, got {len(self.weights)}")
        if len(self.activations) != n_links or len(self.nonneg_mask) != n_links:
            raise ShapeError("activations and nonneg_mask must have one entry per link")
        ws = []
        for k, w in enumerate(self.weights):
            w = _frozen(w)
            if w.shape != (widths[k + 1], widths[k]):
                raise ShapeError(
                    f"W{k}: expected shape {(widths[k + 1], widths[k])}, got {w.shape}")
            if self.nonneg_mask[k] and w.size and w.min() < 0.0:
                raise ShapeError(f"W{k} is flagged nonnegative but has negative entries")
            ws.append(w)
        object.__setattr__(self, "weights", tuple(ws))
        if self.biases:
            if len(self.biases) != n_links:
                raise ShapeError(f"expected {n_links} bias vectors, got {len(self.biases)}")
            bs = []
            for k, b in enumerate(self.biases):
                b = _frozen(b)
                if b.shape != (widths[k + 1],):
                    raise ShapeError(f"b{k}: expected shape {(widths[k + 1],)}, got {b.shape}")
                bs.append(b)
            object.__setattr__(self, "biases", tuple(bs))
        else:
            object.__setattr__(self, "biases", ())
        for tag in self.activations:
            if tag not in _ACTIVATIONS:
                raise ShapeError(f"unknown activation tag {tag!r}")
        if self.activations[-1] != "identity":
            raise ShapeError("output layer activation must be identity")
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "nonneg_mask", tuple(bool(m) for m in self.nonneg_mask))

    @property
    def n_links(self) -> int:
        return len(self.weights)

    @property
    def layout(self) -> Layout:
        entries = [(f"W{k}", w.shape) for k, w in enumerate(self.weights)]
        entries += [(f"b{k}", b.shape) for k, b in enumerate(self.biases)]
        return Layout(tuple(entries))

    def flatten(self) -> np.ndarray:
        return self.layout.flatten(list(self.weights) + list(self.biases))

    def with_values(self, flat) -> "LayeredNet":
        arrays = self.layout.unflatten(flat)
        nw = len(self.weights)
        return replace(self, weights=tuple(arrays[:nw]), biases=tuple(arrays[nw:]))

    def nonneg_flat_mask(self) -> np.ndarray:
        """Boolean mask over the flat vector marking nonneg-constrained coords."""
        parts = [np.full(w.size, m, dtype=bool)
                 for w, m in zip(self.weights, self.nonneg_mask)]
        parts += [np.zeros(b.size, dtype=bool) for b in self.biases]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)

    def weight_flat_mask(self) -> np.ndarray:
        """Boolean mask selecting weight (non-bias) coordinates of the flat vector."""
        parts = [np.ones(w.size, dtype=bool) for w in self.weights]
        parts += [np.zeros(b.size, dtype=bool) for b in self.biases]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)


def _check_input(net, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != net.layer_widths[0]:
        raise ShapeError(
            f"input width {X.shape[-1]} does not match layer width {net.layer_widths[0]}")
    return X, single


def _forward_pass(net, X):
    """Returns per-link pre-activations Z and post-activations H (H[0] is X)."""
    H = [X]
    Z = []
    for k in range(net.n_links):
        z = H[-1] @ net.weights[k].T
        if net.biases:
            z = z + net.biases[k]
        Z.append(z)
        H.append(_ACTIVATIONS[net.activations[k]][0](z))
    return Z, H


def forward(net: LayeredNet, x) -> np.ndarray:
    """Evaluate the network on a single input vector."""
    X, _ = _check_input(net, x)
    _, H = _forward_pass(net, X)
    return H[-1][0]


def forward_batch(net: LayeredNet, X) -> np.ndarray:
    """Evaluate the network on rows of X, shape (batch, in) -> (batch, out)."""
    X, single = _check_input(net, X)
    _, H = _forward_pass(net, X)
    return H[-1][0] if single else H[-1]


def grad_params_batch(net: LayeredNet, X, upstream) -> np.ndarray:
    """Flat gradient of sum_b upstream[b] . net(X[b]) with respect to all parameters."""
    X, single = _check_input(net, X)
    U = np.asarray(upstream, dtype=float)
    if single:
        U = U[None, :]
    if U.shape != (X.shape[0], net.layer_widths[-1]):
        raise ShapeError(f"upstream shape {U.shape} does not match "
                         f"({X.shape[0]}, {net.layer_widths[-1]})")
    Z, H = _forward_pass(net, X)
    gW = [None] * net.n_links
    gb = [None] * net.n_links
    bar = U  # output activation is identity
    for k in range(net.n_links - 1, -1, -1):
        gW[k] = bar.T @ H[k]
        if net.biases:
            gb[k] = bar.sum(axis=0)
        if k > 0:
            d = _ACTIVATIONS[net.activations[k - 1]][1](Z[k - 1])
            bar = (bar @ net.weights[k]) * d
    arrays = gW + (gb if net.biases else [])
    return net.layout.flatten(arrays)


def grad_params(net: LayeredNet, x, upstream) -> np.ndarray:
    """Flat gradient of upstream . net(x) with respect to all parameters."""
    return grad_params_batch(net, x, upstream)


def grad_input_batch(net: LayeredNet, X) -> np.ndarray:
    """Jacobian d net(X[b]) / d X[b] for every row, shape (batch, out, in)."""
    X, single = _check_input(net, X)
    Z, _ = _forward_pass(net, X)
    B = X.shape[0]
    J = np.broadcast_to(np.eye(net.layer_widths[-1]),
                        (B, net.layer_widths[-1], net.layer_widths[-1])).copy()
    for k in range(net.n_links - 1, -1, -1):
        J = J @ net.weights[k]
        if k > 0:
            d = _ACTIVATIONS[net.activations[k - 1]][1](Z[k - 1])
            J = J * d[:, None, :]
    return J[0] if single else J


def grad_input(net: LayeredNet, x) -> np.ndarray:
    """Jacobian of the output with respect to the input, shape (out, in)."""
    return grad_input_batch(net, x)


def dirderiv(net: LayeredNet, x, u) -> np.ndarray:
    """Directional derivative J(x) @ u via a forward (tangent) pass."""
    X, single = _check_input(net, x)
    U, _ = _check_input(net, u)
    Z, _ = _forward_pass(net, X)
    T = U
    for k in range(net.n_links):
        T = T @ net.weights[k].T
        T = _ACTIVATIONS[net.activations[k]][1](Z[k]) * T
    return T[0] if single else T


def grad_params_dirderiv_batch(net: LayeredNet, X, u, upstream) -> np.ndarray:
    """Flat parameter gradient of sum_b upstream[b] . (J(X[b]) @ u[b]).

    Reverse pass over the tangent-augmented forward computation.  For each
    link k with z = W h + b, tz = W t, h' = act(z), t' = act'(z) * tz, the
    adjoints are

        bar_z  = act'(z) * bar_h' + act''(z) * tz * bar_t'
        bar_tz = act'(z) * bar_t'
        dW    += outer(bar_z, h) + outer(bar_tz, t)
        db    += bar_z

    which yields the exact mixed second derivative d/dtheta of the
    input-directional derivative.
    """
    X, single = _check_input(net, X)
    Udir, _ = _check_input(net, u)
    Up = np.asarray(upstream, dtype=float)
    if single:
        Up = Up[None, :]
    if Up.shape != (X.shape[0], net.layer_widths[-1]):
        raise ShapeError(f"upstream shape {Up.shape} does not match "
                         f"({X.shape[0]}, {net.layer_widths[-1]})")
    Z, H = _forward_pass(net, X)
    # tangent forward
    T = [Udir]
    TZ = []
    for k in range(net.n_links):
        tz = T[-1] @ net.weights[k].T
        TZ.append(tz)
        T.append(_ACTIVATIONS[net.activations[k]][1](Z[k]) * tz)
    gW = [None] * net.n_links
    gb = [None] * net.n_links
    bar_h = np.zeros_like(H[-1])
    bar_t = Up
    for k in range(net.n_links - 1, -1, -1):
        d1 = _ACTIVATIONS[net.activations[k]][1](Z[k])
        d2 = _ACTIVATIONS[net.activations[k]][2](Z[k])
        bar_z = d1 * bar_h + d2 * TZ[k] * bar_t
        bar_tz = d1 * bar_t
        gW[k] = bar_z.T @ H[k] + bar_tz.T @ T[k]
        if net.biases:
            gb[k] = bar_z.sum(axis=0)
        bar_h = bar_z @ net.weights[k]
        bar_t = bar_tz @ net.weights[k]
    arrays = gW + (gb if net.biases else [])
    return net.layout.flatten(arrays)


def grad_params_dirderiv(net: LayeredNet, x, u, upstream) -> np.ndarray:
    """Single-sample form of grad_params_dirderiv_batch."""
    return grad_params_dirderiv_batch(net, x, u, upstream)


def param_count(net: LayeredNet, threshold: float = 0.0) -> int:
    """Number of weight entries with |w| strictly above threshold."""
    if threshold < 0:
        raise ShapeError("threshold must be >= 0")
    return int(sum((np.abs(w) > threshold).sum() for w in net.weights))


def permute_hidden(net: LayeredNet, layer: int, perm) -> LayeredNet:
    """Reorder the nodes of a hidden layer; the network output is unchanged.

    Permutes the rows of the incoming matrix and the columns of the outgoing
    matrix (and the layer's bias if present) by the same permutation.
    """
    if not 0 < layer < len(net.layer_widths) - 1:
        raise ShapeError("only hidden layers can be permuted")
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(net.layer_widths[layer])):
        raise ShapeError("perm is not a permutation of the layer's node indices")
    ws = list(net.weights)
    ws[layer - 1] = ws[layer - 1][perm, :]
    ws[layer] = ws[layer][:, perm]
    bs = list(net.biases)
    if bs:
        bs[layer - 1] = bs[layer - 1][perm]
    return replace(net, weights=tuple(ws), biases=tuple(bs))


def save_net(net: LayeredNet, path) -> None:
    """Write a network as structured text (JSON); floats round-trip exactly."""
    doc = {
        "format": NET_FORMAT_TAG,
        "layer_widths": list(net.layer_widths),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "activations": list(net.activations),
        "nonneg_mask": list(net.nonneg_mask),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_net(path) -> LayeredNet:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != NET_FORMAT_TAG:
        raise ShapeError(f"unknown network format tag {doc.get('format')!r}")
    return LayeredNet(
        layer_widths=tuple(doc["layer_widths"]),
        weights=tuple(np.asarray(w, dtype=float) for w in doc["weights"]),
        biases=tuple(np.asarray(b, dtype=float) for b in doc["biases"]),
        activations=tuple(doc["activations"]),
        nonneg_mask=tuple(doc["nonneg_mask"]),
    )
