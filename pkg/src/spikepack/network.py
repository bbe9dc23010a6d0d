"""Feed-forward SNN engine in the compressed (packed) domain.

Each layer computes ``v_g = W @ (input_scale * evaluate(s_zip)) + b`` and
re-quantizes the result with its per-channel thresholds; the last layer is a
readout that returns ``v_g`` itself. Arrays carry a leading batch axis: dense
activity is ``(B, N)`` and convolutional activity ``(B, C, H, W)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, ShapeError
from .neurons import NeuronConfig, lif_update, spikepack_quantize_parallel
from .spike_tensor import PackedSpikes, SpikeMatrix, evaluate, full_scale

LayerKind = Literal["dense", "conv2d"]
ForwardMode = Literal["spikepack", "relaxed", "relaxed-clamp"]


@dataclass(eq=False)
class LayerSpec:
    kind: LayerKind
    weights: np.ndarray
    bias: np.ndarray | None = None
    theta_out: np.ndarray | float = 1.0
    stride: int = 1
    padding: int = 0
    input_scale: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.kind not in ("dense", "conv2d"):
            raise DomainError(f"unsupported layer kind {self.kind!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        want = 2 if self.kind == "dense" else 4
        if self.weights.ndim != want:
            raise ShapeError(f"{self.kind} weights need {want} dims, got {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise DomainError("weights must be finite")
        m = self.weights.shape[0]
        self.bias = np.zeros(m) if self.bias is None else np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.bias.shape != (m,):
            raise ShapeError(f"bias length {self.bias.shape} does not match {m} outputs")
        self.theta_out = np.broadcast_to(np.asarray(self.theta_out, dtype=np.float64), (m,)).copy()
        if np.any(~np.isfinite(self.theta_out)) or np.any(self.theta_out <= 0):
            raise DomainError("theta_out must be finite and > 0")
        self.input_scale = np.asarray(self.input_scale, dtype=np.float64)
        if self.input_scale.ndim > 1:
            raise ShapeError("input_scale must be a scalar or a per-channel vector")
        if self.stride < 1 or self.padding < 0:
            raise DomainError("stride must be >= 1 and padding >= 0")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    def fan_out(self) -> int:
        """Synapses touched by one input spike (border effects ignored for conv)."""
        if self.kind == "dense":
            return self.out_channels
        oc, _, kh, kw = self.weights.shape
        return oc * kh * kw // (self.stride * self.stride) or 1

    def macs(self, in_shape: Sequence[int]) -> int:
        """Multiply-accumulates for one sample whose input has shape ``in_shape``."""
        if self.kind == "dense":
            return int(self.weights.size)
        oc, ic, kh, kw = self.weights.shape
        _, h, w = in_shape
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        return int(oc * ic * kh * kw * oh * ow)


@dataclass(eq=False)
class NetworkSpec:
    layers: list[LayerSpec]
    T: int = 8
    tau: float = 2.0
    input_encoding: str = "analog-direct"
    comparator: str = "at-least"
    rounding: str = "greedy-floor"

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        if self.input_encoding != "analog-direct":
            raise DomainError(f"unsupported input encoding {self.input_encoding!r}")
        NeuronConfig(self.tau, 1.0, self.T, self.comparator, self.rounding)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.kind == "conv2d" and prev.kind == "dense":
                raise ShapeError("a conv2d layer cannot follow a dense layer")
            if nxt.kind == "conv2d" and nxt.in_channels != prev.out_channels:
                raise ShapeError(f"conv expects {nxt.in_channels} channels, previous layer gives {prev.out_channels}")
            if nxt.kind == "dense" and prev.kind == "dense" and nxt.in_channels != prev.out_channels:
                raise ShapeError(f"dense expects {nxt.in_channels} inputs, previous layer gives {prev.out_channels}")

    def neuron_config(self, layer: LayerSpec) -> NeuronConfig:
        return NeuronConfig(self.tau, _channel_theta(layer), self.T, self.comparator, self.rounding)


@dataclass(eq=False)
class LayerTrace:
    packed: PackedSpikes | None
    firing_rate: float
    in_shape: tuple[int, ...]
    spikes: SpikeMatrix | None = None


@dataclass(eq=False)
class ForwardTrace:
    layers: list[LayerTrace] = field(default_factory=list)

    @property
    def firing_rates(self) -> list[float]:
        return [lt.firing_rate for lt in self.layers]


def _channel_theta(layer: LayerSpec) -> np.ndarray:
    """``theta_out`` shaped to broadcast over the layer's output activity."""
    if layer.kind == "conv2d":
        return layer.theta_out.reshape(-1, 1, 1)
    return layer.theta_out


def _apply_scale(x: np.ndarray, scale: np.ndarray) -> np.ndarray:
    if scale.ndim == 0:
        return x * scale
    if x.ndim >= 3:
        return x * scale.reshape(-1, 1, 1)
    return x * scale


def conv2d(x: np.ndarray, w: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Plain sliding-window cross-correlation, ``x`` is ``(B, C, H, W)``."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    kh, kw = w.shape[2:]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return np.einsum("bchwij,ocij->bohw", win, w, optimize=True)


def affine(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """``W @ (input_scale * x) + b`` for real-valued input activity."""
    x = _apply_scale(np.asarray(x, dtype=np.float64), layer.input_scale)
    if layer.kind == "dense":
        if x.ndim >= 3:
            x = x.reshape(x.shape[0], -1)
        if x.shape[-1] != layer.in_channels:
            raise ShapeError(f"dense layer expects {layer.in_channels} inputs, got {x.shape[-1]}")
        return x @ layer.weights.T + layer.bias
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeError(f"conv2d layer expects (B, {layer.in_channels}, H, W), got {x.shape}")
    return conv2d(x, layer.weights, layer.stride, layer.padding) + layer.bias.reshape(-1, 1, 1)


def layer_potential(inp: PackedSpikes | np.ndarray, layer: LayerSpec) -> np.ndarray:
    x = evaluate(inp) if isinstance(inp, PackedSpikes) else np.asarray(inp, dtype=np.float64)
    return affine(x, layer)


def layer_forward(inp: PackedSpikes | np.ndarray, layer: LayerSpec, cfg: NeuronConfig) -> PackedSpikes:
    """Compressed-domain layer: one affine map on evaluated words, then quantize."""
    return spikepack_quantize_parallel(layer_potential(inp, layer), cfg.with_theta(_channel_theta(layer)))


def network_forward(x, net: NetworkSpec, mode: ForwardMode = "spikepack") -> tuple[np.ndarray, ForwardTrace]:
    """Run a batch through ``net``; returns readout potentials and a per-layer trace.

    ``mode="relaxed"`` replaces every quantizer by ``v_g / theta`` and
    ``"relaxed-clamp"`` by ``clip(v_g / theta, 0, full_scale)``; in both the
    trace carries no spikes.
    """
    act = np.asarray(x, dtype=np.float64)
    trace = ForwardTrace()
    top = full_scale(net.T, net.tau)
    for i, layer in enumerate(net.layers):
        in_shape = act.shape[1:]
        v = layer_potential(act, layer)
        if i == len(net.layers) - 1:
            return v, trace
        theta = _channel_theta(layer)
        if mode == "spikepack":
            act = spikepack_quantize_parallel(v, net.neuron_config(layer))
            trace.layers.append(LayerTrace(act, act.firing_rate(), tuple(in_shape)))
        elif mode == "relaxed":
            act = v / theta
            trace.layers.append(LayerTrace(None, float("nan"), tuple(in_shape)))
        elif mode == "relaxed-clamp":
            act = np.clip(v / theta, 0.0, top)
            trace.layers.append(LayerTrace(None, float("nan"), tuple(in_shape)))
        else:
            raise DomainError(f"unknown forward mode {mode!r}")
    raise AssertionError("unreachable")


def predict(x, net: NetworkSpec, mode: ForwardMode = "spikepack") -> np.ndarray:
    logits, _ = network_forward(x, net, mode)
    return np.argmax(logits, axis=-1)


def lif_network_forward(x, net: NetworkSpec, T: int, tau: float = 1.0) -> tuple[np.ndarray, ForwardTrace]:
    """Run the same weights as a rate-coded LIF network over ``T`` steps.

    Hidden layer thresholds are ``theta_out * full_scale(net.T, net.tau)``, i.e.
    the activation level a SpikePack layer maps to its all-ones word, and each
    spike carries that amount into the next layer. Layer 0 sees the analog
    input as a constant current; the readout is the time-averaged potential.
    """
    if tau < 1.0:
        raise DomainError("LIF tau must be >= 1")
    if T < 1:
        raise ShapeError("T must be >= 1")
    scale = full_scale(net.T, net.tau)
    x = np.asarray(x, dtype=np.float64)
    layers = net.layers
    thetas = [_channel_theta(l) * scale for l in layers[:-1]]
    lif_layers = [
        LayerSpec(l.kind, l.weights, l.bias, l.theta_out, l.stride, l.padding,
                  l.input_scale * (scale if i else 1.0))
        for i, l in enumerate(layers)
    ]
    first = affine(x, lif_layers[0])
    state = [None] * (len(layers) - 1)
    records = [[] for _ in state]
    logits = 0.0
    for _ in range(T):
        current = first
        for i, layer in enumerate(lif_layers):
            if i == len(lif_layers) - 1:
                logits = logits + current
                break
            if state[i] is None:
                state[i] = (np.zeros_like(current), np.zeros(current.shape, dtype=np.uint8))
            v, s = lif_update(state[i][0], state[i][1], current, tau, thetas[i])
            state[i] = (v, s)
            records[i].append(s)
            current = affine(s.astype(np.float64), lif_layers[i + 1])
    trace = ForwardTrace()
    in_shape = x.shape[1:]
    for i, rec in enumerate(records):
        spikes = SpikeMatrix(np.stack(rec, axis=-1))
        trace.layers.append(LayerTrace(None, spikes.spike_count() / max(spikes.N * T, 1), tuple(in_shape), spikes))
        in_shape = rec[0].shape[1:]
    return logits / T, trace


def lif_predict(x, net: NetworkSpec, T: int, tau: float = 1.0) -> np.ndarray:
    logits, _ = lif_network_forward(x, net, T, tau)
    return np.argmax(logits, axis=-1)
