"""Direct training of SpikePack networks with a straight-through gradient.

The quantizer ``s = quantize(v_g / theta)`` is differentiated as if it were
``v_g / theta``, so the gradient that reaches a layer's packed output is
divided by that layer's threshold and then flows through ``W`` (and the next
layer's ``input_scale``) as in an ordinary affine network. No time unrolling is
involved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError, TrainingDivergedError
from .network import LayerSpec, NetworkSpec, _apply_scale, _channel_theta, layer_potential
from .neurons import default_direct_theta, spikepack_quantize_parallel
from .spike_tensor import evaluate


@dataclass
class GradTape:
    """Per-layer input activity (before ``input_scale``) and potentials."""

    inputs: list[np.ndarray] = field(default_factory=list)
    potentials: list[np.ndarray] = field(default_factory=list)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input: np.ndarray


def forward_with_tape(x, net: NetworkSpec, relaxed: bool = False) -> tuple[np.ndarray, GradTape]:
    """Forward pass that keeps what :func:`backward` needs.

    ``relaxed`` swaps every quantizer for ``v_g / theta``, the smooth model the
    straight-through gradient is exact for.
    """
    tape = GradTape()
    act = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(net.layers):
        tape.inputs.append(act)
        v = layer_potential(act, layer)
        tape.potentials.append(v)
        if i == len(net.layers) - 1:
            return v, tape
        if relaxed:
            act = v / _channel_theta(layer)
        else:
            act = evaluate(spikepack_quantize_parallel(v, net.neuron_config(layer)))
    raise AssertionError("unreachable")


def _conv_backward(g: np.ndarray, x: np.ndarray, layer: LayerSpec) -> tuple[np.ndarray, np.ndarray]:
    s, p = layer.stride, layer.padding
    w = layer.weights
    kh, kw = w.shape[2:]
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
    dw = np.einsum("bohw,bchwij->ocij", g, win, optimize=True)
    dxp = np.zeros_like(xp)
    oh, ow = g.shape[2:]
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + s * oh:s, j:j + s * ow:s] += np.einsum("bohw,oc->bchw", g, w[:, :, i, j])
    dx = dxp[:, :, p:p + x.shape[2], p:p + x.shape[3]] if p else dxp
    return dw, dx


def backward(loss_grad, tape: GradTape, net: NetworkSpec) -> Gradients:
    """Gradients of the loss w.r.t. every weight, bias and the network input.

    ``loss_grad`` is the gradient w.r.t. the readout potentials.
    """
    if len(tape.inputs) != len(net.layers):
        raise ShapeError(f"tape holds {len(tape.inputs)} layers, network has {len(net.layers)}")
    g = np.asarray(loss_grad, dtype=np.float64)
    if g.shape != tape.potentials[-1].shape:
        raise ShapeError(f"loss gradient {g.shape} does not match readout {tape.potentials[-1].shape}")
    n = len(net.layers)
    dws: list[np.ndarray] = [None] * n
    dbs: list[np.ndarray] = [None] * n
    for i in range(n - 1, -1, -1):
        layer = net.layers[i]
        a = tape.inputs[i]
        scaled = _apply_scale(a, layer.input_scale)
        if layer.kind == "dense":
            flat = scaled.reshape(scaled.shape[0], -1) if scaled.ndim >= 3 else scaled
            g2 = np.atleast_2d(g)
            dws[i] = g2.T @ np.atleast_2d(flat)
            dbs[i] = g2.sum(axis=0)
            dx = (g @ layer.weights).reshape(scaled.shape)
        else:
            dws[i], dx = _conv_backward(g, scaled, layer)
            dbs[i] = g.sum(axis=(0, 2, 3))
        da = _apply_scale(dx, layer.input_scale)
        if i == 0:
            return Gradients(dws, dbs, da)
        g = da / _channel_theta(net.layers[i - 1])
    raise AssertionError("unreachable")


def softmax_cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. ``logits``."""
    z = logits - logits.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    n = logits.shape[0]
    loss = -float(logp[np.arange(n), y].mean())
    grad = np.exp(logp)
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def init_network(sizes, T: int = 8, tau: float = 2.0, theta: float | None = None, seed: int = 0) -> NetworkSpec:
    """Dense SpikePack network with He-initialised weights.

    Hidden thresholds default to ``T / 2**T`` and every layer after the first
    reads its input in activation units (``input_scale`` = previous threshold).
    """
    rng = np.random.default_rng(seed)
    theta = default_direct_theta(T) if theta is None else float(theta)
    layers = []
    prev = 1.0
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in)
        th = theta if i < len(sizes) - 2 else 1.0
        layers.append(LayerSpec("dense", w, np.zeros(n_out), th, input_scale=prev))
        prev = th
    return NetworkSpec(layers, T=T, tau=tau)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float


def evaluate_loss(net: NetworkSpec, X, y, relaxed: bool = False) -> tuple[float, float]:
    logits, _ = forward_with_tape(X, net, relaxed)
    loss, _ = softmax_cross_entropy(logits, y)
    return loss, float(np.mean(np.argmax(logits, axis=-1) == y))


def train_toy(net: NetworkSpec, X, y, lr: float = 0.1, epochs: int = 100, batch: int = 64,
              seed: int = 0) -> tuple[NetworkSpec, list[EpochRecord]]:
    """Minibatch SGD on softmax cross-entropy; returns a new network and the loss curve.

    The curve holds the full-dataset loss and accuracy of the quantized model
    after every epoch (epoch 0 is the untrained network).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ShapeError("features and labels differ in length")
    rng = np.random.default_rng(seed)
    layers = [LayerSpec(l.kind, l.weights.copy(), l.bias.copy(), l.theta_out.copy(), l.stride, l.padding,
                        np.array(l.input_scale, copy=True)) for l in net.layers]
    net = NetworkSpec(layers, net.T, net.tau, net.input_encoding, net.comparator, net.rounding)
    curve = [EpochRecord(0, *evaluate_loss(net, X, y))]
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(X))
        for start in range(0, len(X), batch):
            idx = order[start:start + batch]
            logits, tape = forward_with_tape(X[idx], net)
            _, g = softmax_cross_entropy(logits, y[idx])
            grads = backward(g, tape, net)
            for layer, dw, db in zip(net.layers, grads.weights, grads.biases):
                layer.weights -= lr * dw
                layer.bias -= lr * db
        loss, acc = evaluate_loss(net, X, y)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(l.weights)) for l in net.layers):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}")
        curve.append(EpochRecord(epoch, loss, acc))
    return net, curve
