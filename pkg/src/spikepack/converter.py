"""ANN-to-SNN conversion with per-channel threshold calibration.

The source network is a plain feed-forward ReLU model (:class:`AnnSpec`).
Batch-norm layers are folded into the preceding affine layer and average
pooling becomes a fixed convolution, leaving only dense/conv2d layers. Each
hidden ReLU is replaced by a SpikePack quantizer whose per-channel threshold is
``percentile(activations) / full_scale(T, tau)``; the next layer's
``input_scale`` carries that threshold back into activation units.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .errors import DomainError, ShapeError
from .network import LayerSpec, NetworkSpec, affine
from .spike_tensor import full_scale

log = logging.getLogger(__name__)

AnnKind = Literal["dense", "conv2d", "batchnorm", "avgpool"]
DEFAULT_PERCENTILE = 99.9
DEFAULT_CALIB_FRACTION = 0.1


@dataclass(eq=False)
class AnnLayer:
    kind: AnnKind
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    activation: Literal["relu", "none"] = "none"
    stride: int = 1
    padding: int = 0
    kernel: int = 2
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    mean: np.ndarray | None = None
    var: np.ndarray | None = None
    eps: float = 1e-5

    def __post_init__(self):
        if self.kind not in ("dense", "conv2d", "batchnorm", "avgpool"):
            raise DomainError(f"unsupported ANN layer kind {self.kind!r}")
        if self.activation not in ("relu", "none"):
            raise DomainError(f"unsupported activation {self.activation!r}; only ReLU nets convert")


@dataclass(eq=False)
class AnnSpec:
    layers: list[AnnLayer]

    def forward(self, x, *, collect: bool = False):
        """Float forward pass; with ``collect`` also returns every post-ReLU activation."""
        act = np.asarray(x, dtype=np.float64)
        acts = []
        for layer in self.layers:
            act = _ann_layer_forward(act, layer)
            if layer.activation == "relu":
                act = np.maximum(act, 0.0)
                acts.append(act)
        return (act, acts) if collect else act

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.forward(x), axis=-1)


def _ann_layer_forward(x: np.ndarray, layer: AnnLayer) -> np.ndarray:
    if layer.kind in ("dense", "conv2d"):
        return affine(x, LayerSpec(layer.kind, layer.weights, layer.bias, stride=layer.stride, padding=layer.padding))
    if layer.kind == "batchnorm":
        shape = (-1, 1, 1) if x.ndim == 4 else (-1,)
        scale = layer.gamma / np.sqrt(layer.var + layer.eps)
        return (x - layer.mean.reshape(shape)) * scale.reshape(shape) + layer.beta.reshape(shape)
    c = x.shape[1]
    return affine(x, LayerSpec("conv2d", _pool_weights(c, layer.kernel), stride=layer.kernel))


def _pool_weights(channels: int, k: int) -> np.ndarray:
    w = np.zeros((channels, channels, k, k))
    w[np.arange(channels), np.arange(channels)] = 1.0 / (k * k)
    return w


def fold(ann: AnnSpec) -> list[AnnLayer]:
    """Fold batch-norm into the preceding affine layer and pooling into convs."""
    out: list[AnnLayer] = []
    channels = None
    for layer in ann.layers:
        if layer.kind in ("dense", "conv2d"):
            w = np.asarray(layer.weights, dtype=np.float64)
            b = np.zeros(w.shape[0]) if layer.bias is None else np.asarray(layer.bias, dtype=np.float64)
            out.append(AnnLayer(layer.kind, w.copy(), b.copy(), layer.activation, layer.stride, layer.padding))
            channels = w.shape[0]
        elif layer.kind == "batchnorm":
            if not out or out[-1].activation != "none":
                raise DomainError("batch-norm must directly follow a dense/conv layer before its ReLU")
            prev = out[-1]
            scale = layer.gamma / np.sqrt(layer.var + layer.eps)
            shape = (-1,) + (1,) * (prev.weights.ndim - 1)
            prev.weights = prev.weights * scale.reshape(shape)
            prev.bias = (prev.bias - layer.mean) * scale + layer.beta
            prev.activation = layer.activation
        else:
            if channels is None or (out and out[-1].kind != "conv2d"):
                raise DomainError("average pooling is only supported after a conv2d layer")
            # pooled ReLU output is non-negative, so a ReLU after it is the identity
            act = "relu" if out[-1].activation == "relu" else layer.activation
            out.append(AnnLayer("conv2d", _pool_weights(channels, layer.kernel), np.zeros(channels),
                                act, stride=layer.kernel))
    if not out:
        raise ShapeError("ANN has no affine layers")
    return out


@dataclass
class ChannelCalibration:
    act_max: float
    percentile_value: float
    theta: float
    overflow_fraction: float
    dead: bool = False


@dataclass
class LayerCalibration:
    index: int
    channels: list[ChannelCalibration] = field(default_factory=list)

    @property
    def theta(self) -> np.ndarray:
        return np.array([c.theta for c in self.channels])

    @property
    def percentile_values(self) -> np.ndarray:
        return np.array([c.percentile_value for c in self.channels])


@dataclass
class CalibrationReport:
    T: int
    tau: float
    percentile: float
    samples: int
    layers: list[LayerCalibration] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        layers = [
            LayerCalibration(l["index"], [ChannelCalibration(**c) for c in l["channels"]])
            for l in d["layers"]
        ]
        return cls(d["T"], d["tau"], d["percentile"], d["samples"], layers)

    @property
    def dead_channels(self) -> list[tuple[int, int]]:
        return [(l.index, c) for l in self.layers for c, ch in enumerate(l.channels) if ch.dead]


def calibration_split(n: int, fraction: float = DEFAULT_CALIB_FRACTION, shuffle_seed: int | None = None) -> np.ndarray:
    """Indices of the calibration slice: the first ``fraction`` of the data.

    With ``shuffle_seed`` the data order is permuted first.
    """
    if not 0 < fraction <= 1:
        raise DomainError("calibration fraction must lie in (0, 1]")
    idx = np.arange(n)
    if shuffle_seed is not None:
        idx = np.random.default_rng(shuffle_seed).permutation(n)
    return idx[: max(1, int(round(n * fraction)))]


def _channel_view(act: np.ndarray) -> np.ndarray:
    """Rearrange activity to ``(channels, samples)``."""
    if act.ndim == 4:
        return act.transpose(1, 0, 2, 3).reshape(act.shape[1], -1)
    return act.T


def calibrate(ann: AnnSpec, calib_data, T: int, tau: float = 2.0,
              percentile: float = DEFAULT_PERCENTILE) -> CalibrationReport:
    """Choose one threshold per channel of every hidden ReLU layer.

    A channel whose calibration activations are all zero is flagged as dead
    and gets the smallest positive activation seen anywhere in its layer.
    """
    x = np.asarray(calib_data, dtype=np.float64)
    if x.shape[0] == 0:
        raise ShapeError("calibration data is empty")
    if not 0 < percentile <= 100:
        raise DomainError("percentile must lie in (0, 100]")
    folded = AnnSpec(fold(ann))
    _, acts = folded.forward(x, collect=True)
    relu_layers = [i for i, l in enumerate(folded.layers) if l.activation == "relu"]
    top = full_scale(T, tau)
    report = CalibrationReport(int(T), float(tau), float(percentile), int(x.shape[0]))
    for layer_idx, act in zip(relu_layers, acts):
        per_ch = _channel_view(act)
        positive = act[act > 0]
        fallback = float(positive.min()) if positive.size else 1.0
        lc = LayerCalibration(layer_idx)
        for row in per_ch:
            amax = float(row.max())
            pval = float(np.percentile(row, percentile))
            dead = amax <= 0.0
            if dead:
                theta = fallback
            elif pval <= 0.0:
                theta = amax / top
            else:
                theta = pval / top
            overflow = float(np.mean(row > top * theta))
            lc.channels.append(ChannelCalibration(amax, pval, theta, overflow, dead))
        n_dead = sum(c.dead for c in lc.channels)
        if n_dead:
            log.info("layer %d: %d dead channel(s), theta falls back to %g", layer_idx, n_dead, fallback)
        report.layers.append(lc)
    return report


def convert(ann: AnnSpec, report: CalibrationReport, T: int | None = None, tau: float | None = None) -> NetworkSpec:
    """Build the SpikePack network for ``ann`` with the thresholds in ``report``.

    ``T``/``tau`` default to the calibration values; thresholds are rescaled if
    they differ so that the calibrated activation range still maps onto the
    full word.
    """
    T = report.T if T is None else int(T)
    tau = report.tau if tau is None else float(tau)
    folded = fold(ann)
    hidden = [l for l in folded if l.activation == "relu"]
    if len(hidden) != len(report.layers):
        raise ShapeError(f"report covers {len(report.layers)} ReLU layers, ANN has {len(hidden)}")
    if folded[-1].activation == "relu":
        raise DomainError("the final ANN layer must be linear (it becomes the readout)")
    rescale = full_scale(report.T, report.tau) / full_scale(T, tau)
    layers: list[LayerSpec] = []
    calib = iter(report.layers)
    prev_theta: np.ndarray | float = 1.0
    for i, l in enumerate(folded):
        if 0 < i and folded[i - 1].activation != "relu":
            raise DomainError("consecutive linear layers must be merged before conversion")
        if l.activation == "relu":
            theta = next(calib).theta * rescale
            if len(theta) != l.weights.shape[0]:
                raise ShapeError("calibration channel count does not match the layer")
        else:
            theta = np.ones(l.weights.shape[0])
        layers.append(LayerSpec(l.kind, l.weights, l.bias, theta, l.stride, l.padding, prev_theta))
        prev_theta = theta
    return NetworkSpec(layers, T=T, tau=tau)


def retime(net: NetworkSpec, T: int, tau: float | None = None) -> NetworkSpec:
    """Same network run with ``T`` steps: hidden thresholds scale with the full-scale word."""
    tau = net.tau if tau is None else float(tau)
    r = full_scale(net.T, net.tau) / full_scale(T, tau)
    layers = []
    for i, l in enumerate(net.layers):
        last = i == len(net.layers) - 1
        theta = l.theta_out if last else l.theta_out * r
        scale = l.input_scale * r if i else l.input_scale
        layers.append(LayerSpec(l.kind, l.weights, l.bias, theta, l.stride, l.padding, scale))
    return NetworkSpec(layers, T=T, tau=tau, input_encoding=net.input_encoding,
                       comparator=net.comparator, rounding=net.rounding)
