"""Minimal real-valued dense-network engine with exact backpropagation.

Everything is plain numpy with float64 parameters: small multilayer
perceptrons, reverse-mode gradients that match central finite differences to
first order, stochastic gradient descent, and JSON checkpoints that round-trip
bit for bit.  A complex Moore-Penrose pseudoinverse (for decoding grid
reflections from combined measurements) lives here too, since decoding feeds
the sensing network.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointError, IncompatibleCheckpointError

ACTIVATIONS = ("relu", "sigmoid", "softmax", "identity")


def _apply_activation(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        # exp(-logaddexp(0, -z)) is a numerically stable sigmoid.
        return np.exp(-np.logaddexp(0.0, -z))
    if name == "softmax":
        e = np.exp(z - z.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation '{name}'")


def _activation_backward(name: str, grad_out, z, out) -> np.ndarray:
    """Gradient with respect to pre-activations given the output gradient."""
    if name == "relu":
        return grad_out * (z > 0.0)
    if name == "sigmoid":
        return grad_out * out * (1.0 - out)
    if name == "softmax":
        inner = np.sum(grad_out * out, axis=-1, keepdims=True)
        return out * (grad_out - inner)
    if name == "identity":
        return grad_out
    raise ValueError(f"unknown activation '{name}'")


# ---------------------------------------------------------------------------
# Network structure
# ---------------------------------------------------------------------------

@dataclass
class DenseLayer:
    """One fully connected layer: ``out = activation(w @ x + b)``."""

    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str


@dataclass
class DenseNet:
    """A stack of dense layers applied in order."""

    layers: list[DenseLayer]

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    @property
    def n_params(self) -> int:
        return sum(l.w.size + l.b.size for l in self.layers)

    @property
    def spec_hash(self) -> str:
        """Digest of the architecture (dimensions and activations only)."""
        desc = "|".join(
            f"{l.w.shape[1]}>{l.w.shape[0]}:{l.activation}" for l in self.layers
        )
        return hashlib.sha256(desc.encode()).hexdigest()

    def copy(self) -> "DenseNet":
        return DenseNet(
            layers=[
                DenseLayer(w=l.w.copy(), b=l.b.copy(), activation=l.activation)
                for l in self.layers
            ]
        )


def init_dense_net(
    dims: list[int], activations: list[str], rng: np.random.Generator
) -> DenseNet:
    """Glorot-uniform weights, zero biases.

    ``dims`` lists the input dimension followed by each layer's output
    dimension, so ``len(activations) == len(dims) - 1``.
    """
    if len(activations) != len(dims) - 1:
        raise ValueError(
            f"need {len(dims) - 1} activations for {len(dims)} dims, "
            f"got {len(activations)}"
        )
    for act in activations:
        if act not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{act}'")
    layers = []
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w=w, b=np.zeros(fan_out), activation=act))
    return DenseNet(layers=layers)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

@dataclass
class Tape:
    """Cached per-layer inputs, pre-activations, and outputs for backward."""

    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    outputs: list[np.ndarray]
    squeezed: bool


@dataclass
class LayerGrads:
    """Parameter gradients of one layer."""

    dw: np.ndarray
    db: np.ndarray


def forward(net: DenseNet, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Evaluate the network; accepts a single vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    squeezed = x.ndim == 1
    h = x[None, :] if squeezed else x
    inputs, pres, outs = [], [], []
    for layer in net.layers:
        inputs.append(h)
        z = h @ layer.w.T + layer.b
        h = _apply_activation(layer.activation, z)
        pres.append(z)
        outs.append(h)
    out = h[0] if squeezed else h
    return out, Tape(inputs=inputs, pre=pres, outputs=outs, squeezed=squeezed)


def backward(
    net: DenseNet, tape: Tape, grad_out: np.ndarray
) -> tuple[list[LayerGrads], np.ndarray]:
    """Exact reverse-mode gradients.

    ``grad_out`` is the gradient of a scalar objective with respect to the
    network output (same shape as the forward output).  Returns per-layer
    parameter gradients and the gradient with respect to the input.
    """
    g = np.asarray(grad_out, dtype=float)
    if tape.squeezed:
        g = g[None, :]
    grads: list[LayerGrads] = [None] * len(net.layers)  # type: ignore[list-item]
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        gz = _activation_backward(
            layer.activation, g, tape.pre[idx], tape.outputs[idx]
        )
        grads[idx] = LayerGrads(dw=gz.T @ tape.inputs[idx], db=gz.sum(axis=0))
        g = gz @ layer.w
    return grads, (g[0] if tape.squeezed else g)


def sgd_step(net: DenseNet, grads: list[LayerGrads], lr: float) -> DenseNet:
    """One in-place descent step; returns the net for chaining."""
    for layer, g in zip(net.layers, grads):
        layer.w -= lr * g.dw
        layer.b -= lr * g.db
    return net


def scale_grads(grads: list[LayerGrads], factor: float) -> list[LayerGrads]:
    """Multiply every gradient by a scalar (for sign flips and averaging)."""
    return [LayerGrads(dw=g.dw * factor, db=g.db * factor) for g in grads]


def accumulate_grads(
    total: list[LayerGrads] | None, grads: list[LayerGrads]
) -> list[LayerGrads]:
    """Sum gradients layer-wise; ``total=None`` starts a fresh accumulator."""
    if total is None:
        return [LayerGrads(dw=g.dw.copy(), db=g.db.copy()) for g in grads]
    for t, g in zip(total, grads):
        t.dw += g.dw
        t.db += g.db
    return total


# ---------------------------------------------------------------------------
# Parameter packing (used by tests and the policy-gradient update)
# ---------------------------------------------------------------------------

def get_params(net: DenseNet) -> np.ndarray:
    """Flatten all parameters into one vector (weights row-major, then bias)."""
    return np.concatenate([np.concatenate([l.w.ravel(), l.b]) for l in net.layers])

def set_params(net: DenseNet, theta: np.ndarray) -> None:
    """Inverse of :func:`get_params`; writes in place."""
    pos = 0
    for layer in net.layers:
        n = layer.w.size
        layer.w[...] = theta[pos : pos + n].reshape(layer.w.shape)
        pos += n
        n = layer.b.size
        layer.b[...] = theta[pos : pos + n]
        pos += n
    if pos != theta.size:
        raise ValueError(f"parameter vector has {theta.size} entries, need {pos}")


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def gradient_check(
    net: DenseNet,
    rng: np.random.Generator,
    step: float = 1e-5,
    chunk: int = 8192,
) -> float:
    """Compare analytic gradients against central finite differences.

    The scalar objective is a fixed random projection of the network output.
    Every parameter is perturbed by ``+-step``; perturbations are propagated
    in batches from the perturbed layer onward, so even wide layers finish
    quickly.  Inputs are resampled (deterministically) if any pre-activation
    sits within ``10 * step`` of a relu kink, where finite differences are
    invalid.  Returns the maximum relative error over all parameters.

    The relative-error denominator is floored at ``1e-5 * max(1, |f|)``:
    the difference quotient carries roundoff of order ``eps * |f| / step``
    (about 1e-11 absolute here), so for parameters whose true gradient sits
    below the floor the comparison asserts absolute agreement at the
    oracle's own resolution instead of amplifying its noise.
    """
    for _ in range(64):
        x = rng.standard_normal(net.input_dim)
        out, tape = forward(net, x)
        margin = 10.0 * step * max(1.0, float(np.abs(x).max()))
        safe = all(
            np.abs(z).min() > margin
            for l, z in zip(net.layers, tape.pre)
            if l.activation == "relu"
        )
        if safe:
            break
    else:
        raise RuntimeError("could not find a kink-free probe input")

    projection = rng.standard_normal(net.output_dim)
    grads, _ = backward(net, tape, projection)

    worst = 0.0
    for idx, layer in enumerate(net.layers):
        x_in = tape.inputs[idx][0]
        z_base = tape.pre[idx][0]
        analytic = np.concatenate([grads[idx].dw.ravel(), grads[idx].db])

        n_w = layer.w.size
        fd = np.empty(n_w + layer.b.size)
        f_mag = np.empty(n_w + layer.b.size)
        # Perturbing w[i, j] by +-step shifts z[i] by +-step * x_in[j]; biases
        # shift z[i] by +-step.  Propagate those shifted pre-activations
        # through the remaining layers in batches.
        rows = np.repeat(np.arange(layer.w.shape[0]), layer.w.shape[1])
        deltas_w = step * np.tile(x_in, layer.w.shape[0])
        rows_all = np.concatenate([rows, np.arange(layer.b.size)])
        deltas_all = np.concatenate([deltas_w, np.full(layer.b.size, step)])

        for start in range(0, rows_all.size, chunk):
            r = rows_all[start : start + chunk]
            d = deltas_all[start : start + chunk]
            z_plus = np.tile(z_base, (r.size, 1))
            z_plus[np.arange(r.size), r] += d
            z_minus = np.tile(z_base, (r.size, 1))
            z_minus[np.arange(r.size), r] -= d
            h_plus = _apply_activation(layer.activation, z_plus)
            h_minus = _apply_activation(layer.activation, z_minus)
            for nxt in net.layers[idx + 1 :]:
                h_plus = _apply_activation(nxt.activation, h_plus @ nxt.w.T + nxt.b)
                h_minus = _apply_activation(
                    nxt.activation, h_minus @ nxt.w.T + nxt.b
                )
            s_plus = h_plus @ projection
            s_minus = h_minus @ projection
            fd[start : start + chunk] = (s_plus - s_minus) / (2.0 * step)
            f_mag[start : start + chunk] = np.maximum(
                np.abs(s_plus), np.abs(s_minus)
            )

        # Roundoff in each objective evaluation is ~eps * |f|, so the
        # difference quotient is only trustworthy to ~eps * |f| / step
        # absolute.  Flooring the denominator above that level keeps the
        # ratio a genuine relative error for resolvable gradients and an
        # absolute check at oracle resolution for vanishing ones.
        floor = 1e-5 * np.maximum(1.0, f_mag)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
        worst = max(worst, float((np.abs(analytic - fd) / denom).max()))
    return worst


# ---------------------------------------------------------------------------
# Pseudoinverse decoding
# ---------------------------------------------------------------------------

def pinv(matrix: np.ndarray, rel_threshold: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse via complex SVD.

    Singular values below ``rel_threshold`` times the largest one are
    treated as zero.  Supports stacked matrices (leading batch dimensions).
    """
    return np.linalg.pinv(np.asarray(matrix), rcond=rel_threshold)


def decode_measurement(gamma: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares reflection estimate ``gamma^+ @ y``."""
    return pinv(gamma) @ y


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def net_to_document(net: DenseNet) -> dict:
    """JSON-ready checkpoint document (weights row-major, exact floats)."""
    return {
        "kind": "metasense.densenet",
        "spec_hash": net.spec_hash,
        "layers": [
            {
                "rows": l.w.shape[0],
                "cols": l.w.shape[1],
                "activation": l.activation,
                "weights": l.w.ravel().tolist(),
                "bias": l.b.tolist(),
            }
            for l in net.layers
        ],
    }


def net_from_document(doc: dict) -> DenseNet:
    """Rebuild a network from a checkpoint document, verifying its digest."""
    try:
        layers = []
        for entry in doc["layers"]:
            rows, cols = int(entry["rows"]), int(entry["cols"])
            w = np.asarray(entry["weights"], dtype=float)
            if w.size != rows * cols:
                raise CheckpointError(
                    f"layer expects {rows * cols} weights, got {w.size}"
                )
            b = np.asarray(entry["bias"], dtype=float)
            if b.size != rows:
                raise CheckpointError(f"layer expects {rows} biases, got {b.size}")
            act = entry["activation"]
            if act not in ACTIVATIONS:
                raise CheckpointError(f"unknown activation '{act}'")
            layers.append(
                DenseLayer(w=w.reshape(rows, cols), b=b, activation=act)
            )
        net = DenseNet(layers=layers)
        declared = doc["spec_hash"]
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint document: {exc}") from exc
    if net.spec_hash != declared:
        raise IncompatibleCheckpointError(
            f"checkpoint digest {declared[:12]}... does not match the "
            f"architecture it carries ({net.spec_hash[:12]}...)"
        )
    return net


def save_checkpoint(net: DenseNet, path: str | Path) -> None:
    """Write a checkpoint; loading it reproduces the parameters bit for bit."""
    Path(path).write_text(json.dumps(net_to_document(net)))


def load_checkpoint(path: str | Path) -> DenseNet:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    return net_from_document(doc)
