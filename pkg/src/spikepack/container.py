"""Binary container for SpikePack networks and their source ANNs.

All fields are little-endian::

    header   : b"SPKN" | u16 version | u8 role (0 snn, 1 ann) | u8 T | f64 tau
               | u8 comparator | u8 rounding | u32 n_layers
    layer    : u8 kind | u8 activation | u16 stride | u16 padding | u16 kernel
               | u8 n_tensors, then n_tensors x tensor
    tensor   : u8 tag | u8 ndim | ndim x u32 dims | prod(dims) x f32

kind: 0 dense, 1 conv2d, 2 batchnorm, 3 avgpool.
activation: 0 none, 1 relu, 2 spikepack quantizer, 3 readout.
tag: 0 weights, 1 bias, 2 theta_out, 3 input_scale, 4 gamma, 5 beta,
6 running mean, 7 running var, 8 eps.
ANN files carry T = 0 and tau = 0.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .converter import AnnLayer, AnnSpec
from .errors import ContainerError, SpikePackError
from .network import LayerSpec, NetworkSpec

MAGIC = b"SPKN"
VERSION = 1

_HEAD = struct.Struct("<4sHBBdBBI")
_LAYER = struct.Struct("<BBHHHB")

KINDS = ("dense", "conv2d", "batchnorm", "avgpool")
ACTIVATIONS = ("none", "relu", "spikepack", "readout")
COMPARATORS = ("at-least", "strictly-greater")
ROUNDINGS = ("greedy-floor", "nearest")
TAGS = ("weights", "bias", "theta_out", "input_scale", "gamma", "beta", "mean", "var", "eps")


def _tensor(tag: str, arr) -> bytes:
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f4"))
    dims = a.shape
    return struct.pack(f"<BB{len(dims)}I", TAGS.index(tag), len(dims), *dims) + a.tobytes()


def _layer(kind, activation, stride, padding, kernel, tensors: dict) -> bytes:
    body = b"".join(_tensor(k, v) for k, v in tensors.items() if v is not None)
    n = sum(v is not None for v in tensors.values())
    return _LAYER.pack(KINDS.index(kind), ACTIVATIONS.index(activation), stride, padding, kernel, n) + body


def dumps_network(net: NetworkSpec) -> bytes:
    out = [_HEAD.pack(MAGIC, VERSION, 0, net.T, net.tau, COMPARATORS.index(net.comparator),
                      ROUNDINGS.index(net.rounding), len(net.layers))]
    for i, l in enumerate(net.layers):
        act = "readout" if i == len(net.layers) - 1 else "spikepack"
        out.append(_layer(l.kind, act, l.stride, l.padding, 0, {
            "weights": l.weights, "bias": l.bias, "theta_out": l.theta_out, "input_scale": l.input_scale,
        }))
    return b"".join(out)


def dumps_ann(ann: AnnSpec) -> bytes:
    out = [_HEAD.pack(MAGIC, VERSION, 1, 0, 0.0, 0, 0, len(ann.layers))]
    for l in ann.layers:
        eps = None if l.kind != "batchnorm" else np.float32(l.eps)
        out.append(_layer(l.kind, l.activation, l.stride, l.padding, l.kernel, {
            "weights": l.weights, "bias": l.bias, "gamma": l.gamma, "beta": l.beta,
            "mean": l.mean, "var": l.var, "eps": eps,
        }))
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str | struct.Struct):
        st = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        if self.pos + st.size > len(self.buf):
            raise ContainerError("container is truncated")
        vals = st.unpack_from(self.buf, self.pos)
        self.pos += st.size
        return vals

    def tensor(self) -> tuple[str, np.ndarray]:
        tag, ndim = self.take("<BB")
        if tag >= len(TAGS):
            raise ContainerError(f"unknown tensor tag {tag}")
        dims = self.take(f"<{ndim}I") if ndim else ()
        count = int(np.prod(dims, dtype=np.int64))
        end = self.pos + 4 * count
        if end > len(self.buf):
            raise ContainerError("container is truncated inside a tensor")
        arr = np.frombuffer(self.buf, dtype="<f4", count=count, offset=self.pos).astype(np.float64)
        self.pos = end
        return TAGS[tag], arr.reshape(dims)


def _parse(buf: bytes):
    r = _Reader(buf)
    magic, version, role, T, tau, comp, rnd, n_layers = r.take(_HEAD)
    if magic != MAGIC:
        raise ContainerError("not a SpikePack container (bad magic)")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    layers = []
    for _ in range(n_layers):
        kind, act, stride, padding, kernel, n = r.take(_LAYER)
        if kind >= len(KINDS) or act >= len(ACTIVATIONS):
            raise ContainerError("corrupt layer table")
        tensors = dict(r.tensor() for _ in range(n))
        layers.append((KINDS[kind], ACTIVATIONS[act], stride, padding, kernel, tensors))
    if r.pos != len(buf):
        raise ContainerError("trailing bytes after the last layer")
    if comp >= len(COMPARATORS) or rnd >= len(ROUNDINGS):
        raise ContainerError("corrupt neuron policy fields")
    return role, T, tau, COMPARATORS[comp], ROUNDINGS[rnd], layers


def loads(buf: bytes) -> NetworkSpec | AnnSpec:
    role, T, tau, comp, rnd, layers = _parse(buf)
    try:
        if role == 0:
            specs = [LayerSpec(kind, t["weights"], t.get("bias"), t.get("theta_out", 1.0), stride, padding,
                               t.get("input_scale", 1.0))
                     for kind, _, stride, padding, _, t in layers]
            return NetworkSpec(specs, T=T, tau=tau, comparator=comp, rounding=rnd)
        if role == 1:
            out = []
            for kind, act, stride, padding, kernel, t in layers:
                eps = float(t["eps"].reshape(-1)[0]) if "eps" in t else 1e-5
                out.append(AnnLayer(kind, t.get("weights"), t.get("bias"), act, stride, padding, kernel,
                                    t.get("gamma"), t.get("beta"), t.get("mean"), t.get("var"), eps))
            return AnnSpec(out)
    except (SpikePackError, KeyError, ValueError) as exc:
        raise ContainerError(f"invalid network in container: {exc}") from exc
    raise ContainerError(f"unknown container role {role}")


def save(path, obj: NetworkSpec | AnnSpec) -> None:
    data = dumps_network(obj) if isinstance(obj, NetworkSpec) else dumps_ann(obj)
    Path(path).write_bytes(data)


def load(path) -> NetworkSpec | AnnSpec:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise ContainerError(f"cannot read {path}: {exc}") from exc
    return loads(buf)
