"""Event-driven cycle model of a spike-address-encoder / PE-array / neuron-unit processor.

Per layer the model counts

* encoder cycles: ``ceil(active / detector_width)``; the detector inspects
  ``detector_width`` lines per cycle and only active spikes produce addresses,
  so an all-zero input costs nothing;
* PE cycles: ``ceil(active * fan_out / num_pes)``; weight fetch is assumed to
  be hidden behind accumulation;
* neuron cycles: ``ceil(M / neuron_units) * steps`` per sample, where a LIF
  layer updates every neuron on each of its ``T`` steps and a SpikePack layer
  fires once from its global potential (``steps = 1``);
* a fixed pipeline fill.

Layers run one after another (no inter-layer pipelining). Energy is the sum
of component counts times the per-operation energies.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError, ShapeError
from .network import LayerSpec, NetworkSpec, lif_network_forward, network_forward
from .spike_tensor import PackedSpikes, SpikeMatrix

NeuronKind = Literal["lif", "spikepack"]


@dataclass(frozen=True)
class SimConfig:
    num_pes: int = 64
    neuron_units: int = 16
    detector_width: int = 16
    clock_hz: float = 3e8
    # order-of-magnitude CMOS figures: 32-bit accumulate, potential read-modify-write, address emit
    energy_per_mac: float = 0.9e-12
    energy_per_neuron_update: float = 3.0e-12
    energy_per_encode: float = 0.1e-12
    pipeline_fill_cycles: int = 8

    def __post_init__(self):
        for name in ("num_pes", "neuron_units", "detector_width", "pipeline_fill_cycles"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.clock_hz <= 0:
            raise DomainError("clock_hz must be > 0")
        for name in ("energy_per_mac", "energy_per_neuron_update", "energy_per_encode"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")


@dataclass(frozen=True)
class LayerSim:
    active_spikes: int
    encoder_cycles: int
    pe_cycles: int
    neuron_cycles: int
    fill_cycles: int
    macs: int
    neuron_updates: int
    energy_joules: float

    @property
    def cycles(self) -> int:
        return self.fill_cycles + self.encoder_cycles + self.pe_cycles + self.neuron_cycles


@dataclass
class SimTrace:
    neuron_kind: str
    clock_hz: float
    layers: list[LayerSim] = field(default_factory=list)

    @property
    def total_cycles(self) -> int:
        return sum(l.cycles for l in self.layers)

    @property
    def latency_seconds(self) -> float:
        return self.total_cycles / self.clock_hz

    @property
    def energy_joules(self) -> float:
        return math.fsum(l.energy_joules for l in self.layers)

    @property
    def active_spikes(self) -> int:
        return sum(l.active_spikes for l in self.layers)

    def to_dict(self) -> dict:
        return {
            "neuron_kind": self.neuron_kind,
            "clock_hz": self.clock_hz,
            "total_cycles": self.total_cycles,
            "latency_seconds": self.latency_seconds,
            "energy_joules": self.energy_joules,
            "layers": [dict(asdict(l), cycles=l.cycles) for l in self.layers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _out_neurons(layer: LayerSpec, in_shape: Sequence[int]) -> int:
    if layer.kind == "dense":
        if int(np.prod(in_shape)) != layer.weights.shape[1]:
            raise ShapeError(f"input of {int(np.prod(in_shape))} features does not match dense layer "
                             f"expecting {layer.weights.shape[1]}")
        return layer.out_channels
    if len(in_shape) != 3 or in_shape[0] != layer.in_channels:
        raise ShapeError(f"input shape {tuple(in_shape)} does not match conv layer with "
                         f"{layer.in_channels} input channels")
    kh, kw = layer.weights.shape[2:]
    oh = (in_shape[1] + 2 * layer.padding - kh) // layer.stride + 1
    ow = (in_shape[2] + 2 * layer.padding - kw) // layer.stride + 1
    return layer.out_channels * oh * ow


def layer_cost(active: int, batch: int, in_shape: Sequence[int], layer: LayerSpec, cfg: SimConfig,
               steps: int) -> LayerSim:
    """Cycle and energy accounting for ``active`` input events over a batch."""
    m = _out_neurons(layer, in_shape)
    macs = active * layer.fan_out()
    enc = -(-active // cfg.detector_width)
    pe = -(-macs // cfg.num_pes)
    neuron = -(-m // cfg.neuron_units) * steps * batch
    updates = m * steps * batch
    energy = (active * cfg.energy_per_encode + macs * cfg.energy_per_mac
              + updates * cfg.energy_per_neuron_update)
    return LayerSim(int(active), int(enc), int(pe), int(neuron), cfg.pipeline_fill_cycles, int(macs),
                    int(updates), float(energy))


def simulate_layer(spikes: PackedSpikes | SpikeMatrix, layer: LayerSpec, cfg: SimConfig,
                   neuron_kind: NeuronKind) -> SimTrace:
    """Simulate one layer driven by the spike tensor it receives.

    ``spikes`` has shape ``(batch, *in_shape)`` (packed) or ``(batch, *in_shape, T)``.
    """
    if neuron_kind not in ("lif", "spikepack"):
        raise DomainError(f"unknown neuron kind {neuron_kind!r}")
    if isinstance(spikes, PackedSpikes):
        shape, T = spikes.shape, spikes.T
    elif isinstance(spikes, SpikeMatrix):
        shape, T = spikes.data.shape[:-1], spikes.T
    else:
        raise ShapeError("spikes must be PackedSpikes or SpikeMatrix")
    if len(shape) < 2:
        raise ShapeError("spike tensor needs a batch axis and at least one neuron axis")
    steps = T if neuron_kind == "lif" else 1
    sim = layer_cost(spikes.spike_count(), shape[0], shape[1:], layer, cfg, steps)
    return SimTrace(neuron_kind, cfg.clock_hz, [sim])


def inject_sparsity(spikes: PackedSpikes | SpikeMatrix, fraction: float, seed: int = 0):
    """Silence a random ``fraction`` of the active spikes.

    Every spike slot gets a fixed random key from ``seed`` and spikes whose key
    falls below ``fraction`` are dropped, so larger fractions drop supersets.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DomainError("fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    if isinstance(spikes, SpikeMatrix):
        keep = rng.random(spikes.data.shape) >= fraction
        return SpikeMatrix((spikes.data & keep).astype(np.uint8))
    keys = rng.random(spikes.shape + (spikes.T,))
    bit = np.uint64(1) << np.arange(spikes.T - 1, -1, -1, dtype=np.uint64)
    mask = np.where(keys >= fraction, bit, np.uint64(0)).sum(axis=-1, dtype=np.uint64)
    return PackedSpikes(spikes.bits & mask, spikes.T, spikes.tau)


def simulate_traces(net: NetworkSpec, x, hidden: Sequence[PackedSpikes | SpikeMatrix], cfg: SimConfig,
                    neuron_kind: NeuronKind) -> SimTrace:
    """Compose per-layer costs from the analog input and each hidden layer's output spikes.

    Layer 0 sees the analog input, one event per nonzero value, computed once
    (a LIF layer then reuses that constant current on every step).
    """
    if neuron_kind not in ("lif", "spikepack"):
        raise DomainError(f"unknown neuron kind {neuron_kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise ShapeError("input batch is empty")
    if len(hidden) != len(net.layers) - 1:
        raise ShapeError(f"expected {len(net.layers) - 1} hidden traces, got {len(hidden)}")
    steps_of = [h.T for h in hidden]
    T = steps_of[0] if steps_of else net.T
    steps = T if neuron_kind == "lif" else 1
    trace = SimTrace(neuron_kind, cfg.clock_hz)
    trace.layers.append(layer_cost(int(np.count_nonzero(x)), x.shape[0], x.shape[1:], net.layers[0], cfg, steps))
    for spikes, layer in zip(hidden, net.layers[1:]):
        trace.layers.extend(simulate_layer(spikes, layer, cfg, neuron_kind).layers)
    return trace


def hidden_traces(net: NetworkSpec, x, neuron_kind: NeuronKind, lif_steps: int | None = None) -> list:
    """Output spikes of every hidden layer for ``x``."""
    if neuron_kind == "spikepack":
        _, fwd = network_forward(x, net)
        return [l.packed for l in fwd.layers]
    if neuron_kind == "lif":
        _, fwd = lif_network_forward(x, net, lif_steps or net.T)
        return [l.spikes for l in fwd.layers]
    raise DomainError(f"unknown neuron kind {neuron_kind!r}")


def simulate_network(net: NetworkSpec, input_batch, cfg: SimConfig, neuron_kind: NeuronKind,
                     lif_steps: int | None = None, drop: float = 0.0, seed: int = 0) -> SimTrace:
    """Run ``input_batch`` through ``net`` and cost the measured activity.

    ``lif_steps`` sets the LIF window (default ``net.T``); ``drop`` silences that
    fraction of hidden spikes before costing (see :func:`inject_sparsity`).
    """
    hidden = hidden_traces(net, input_batch, neuron_kind, lif_steps)
    if drop:
        hidden = [inject_sparsity(h, drop, seed + i) for i, h in enumerate(hidden)]
    return simulate_traces(net, input_batch, hidden, cfg, neuron_kind)


def matched_lif_steps(net: NetworkSpec, X, y, ladder: Sequence[int] = (8, 16, 32, 64, 128),
                      tolerance: float = 0.01) -> tuple[int, float, float]:
    """Smallest LIF window on ``ladder`` within ``tolerance`` of SpikePack accuracy.

    Returns ``(steps, lif_accuracy, spikepack_accuracy)``; falls back to the
    last rung if none matches.
    """
    logits, _ = network_forward(X, net)
    target = float(np.mean(np.argmax(logits, -1) == y))
    acc = 0.0
    for steps in ladder:
        lo, _ = lif_network_forward(X, net, steps)
        acc = float(np.mean(np.argmax(lo, -1) == y))
        if acc >= target - tolerance:
            return int(steps), acc, target
    return int(ladder[-1]), acc, target
