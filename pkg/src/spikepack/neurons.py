"""Neuron evaluators: the LIF reference and the two SpikePack decoders.

The SpikePack decoders work in threshold units: the global potential is first
divided by ``theta`` (see :func:`normalize`), after which the dynamic thresholds
are the plain powers ``tau**(T-t)``. Both the serial recursion and the one-shot
quantizer consume the same normalized values, which is what makes them agree
bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np

from .errors import DomainError, ShapeError
from .spike_tensor import (
    MAX_STEPS,
    PackedSpikes,
    SpikeMatrix,
    all_ones,
    temporal_weights,
)

Comparator = Literal["at-least", "strictly-greater"]
Rounding = Literal["greedy-floor", "nearest"]

COMPARATORS = ("at-least", "strictly-greater")
ROUNDINGS = ("greedy-floor", "nearest")

# Above this T a tau != 2 codebook would not fit in memory; the parallel path
# then evaluates the greedy digits vectorised over neurons instead.
CODEBOOK_MAX_T = 20

_SNAP_ULPS = 4.0


@dataclass(frozen=True, eq=False)
class NeuronConfig:
    tau: float = 2.0
    theta: float | np.ndarray = 1.0
    T: int = 8
    comparator: Comparator = "at-least"
    rounding: Rounding = "greedy-floor"

    def __post_init__(self):
        if not np.isfinite(self.tau) or self.tau <= 1.0:
            raise DomainError(f"tau must be > 1, got {self.tau}")
        if not 1 <= int(self.T) <= MAX_STEPS:
            raise ShapeError(f"T must lie in [1, {MAX_STEPS}], got {self.T}")
        theta = np.asarray(self.theta, dtype=np.float64)
        if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
            raise DomainError("theta must be finite and > 0 elementwise")
        if self.comparator not in COMPARATORS:
            raise DomainError(f"unknown comparator {self.comparator!r}")
        if self.rounding not in ROUNDINGS:
            raise DomainError(f"unknown rounding {self.rounding!r}")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "theta", float(theta) if theta.ndim == 0 else theta)

    def with_theta(self, theta) -> "NeuronConfig":
        return NeuronConfig(self.tau, theta, self.T, self.comparator, self.rounding)


@dataclass(frozen=True, eq=False)
class LifState:
    v: np.ndarray
    last_spike: np.ndarray = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64)
        s = np.zeros(v.shape, dtype=np.uint8) if self.last_spike is None else np.asarray(self.last_spike, dtype=np.uint8)
        if s.shape != v.shape:
            raise ShapeError(f"state shapes differ: v {v.shape} vs last_spike {s.shape}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "last_spike", s)

    @classmethod
    def zeros(cls, n: int) -> "LifState":
        return cls(np.zeros(n))

    @property
    def nbytes(self) -> int:
        return self.v.nbytes + self.last_spike.nbytes


# --------------------------------------------------------------------------- LIF


def lif_update(v, last_spike, current, tau: float, theta):
    """One LIF step on raw arrays: soft reset by subtraction, strict firing.

    ``tau == 1`` is accepted here (a non-leaky integrator); :class:`NeuronConfig`
    keeps the stricter ``tau > 1``.
    """
    v = v / tau + current - theta * last_spike
    return v, (v > theta).astype(np.uint8)


def lif_step(state: LifState, input_current, cfg: NeuronConfig) -> tuple[LifState, np.ndarray]:
    current = np.asarray(input_current, dtype=np.float64)
    if current.shape != state.v.shape:
        raise ShapeError(f"input current {current.shape} does not match state {state.v.shape}")
    v, s = lif_update(state.v, state.last_spike, current, cfg.tau, cfg.theta)
    return LifState(v, s), s


def lif_run(inputs: SpikeMatrix | np.ndarray, weights, cfg: NeuronConfig) -> SpikeMatrix:
    """Drive one post-synaptic LIF neuron with an ``N x T`` spike record.

    ``weights`` may also be an ``M x N`` matrix, giving ``M`` neurons. The
    spike record is consumed one column at a time, which is the O(T) baseline.
    """
    if not isinstance(inputs, SpikeMatrix):
        inputs = SpikeMatrix(np.asarray(inputs))
    S = inputs.data
    if S.ndim != 2:
        raise ShapeError("lif_run expects an N x T spike matrix")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1] != S.shape[0]:
        raise ShapeError(f"weights expect {w.shape[-1]} inputs, spike matrix has {S.shape[0]}")
    if not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite")
    W = np.atleast_2d(w)
    state = LifState.zeros(W.shape[0])
    out = np.zeros((W.shape[0], S.shape[1]), dtype=np.uint8)
    for t in range(S.shape[1]):
        state, out[:, t] = lif_step(state, W @ S[:, t], cfg)
    return SpikeMatrix(out)


# ---------------------------------------------------------------------- SpikePack


def normalize(v_g, theta) -> np.ndarray:
    """Express potentials in threshold units, ``v_g / theta``.

    Quotients within a few ulps of an integer are snapped onto it so that an
    exact multiple ``k * theta`` decodes to ``k`` despite rounding in the
    product and the division.
    """
    v = np.asarray(v_g, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise DomainError("global potential must be finite")
    x = v / theta
    r = np.rint(x)
    near = np.abs(x - r) <= _SNAP_ULPS * np.finfo(np.float64).eps * np.maximum(np.abs(r), 1.0)
    return np.where(near, r, x)


def _greedy_digits(x: np.ndarray, T: int, tau: float, strict: bool) -> np.ndarray:
    """Most-significant-first greedy recursion on normalized potentials."""
    rem = np.array(x, dtype=np.float64, copy=True)
    word = np.zeros(rem.shape, dtype=np.uint64)
    for th in temporal_weights(T, tau):
        fire = rem > th if strict else rem >= th
        rem = np.where(fire, rem - th, rem)
        word = (word << np.uint64(1)) | fire.astype(np.uint64)
    return word


def spikepack_decode_serial(v_g, cfg: NeuronConfig) -> PackedSpikes:
    """Emit ``T`` spikes one step at a time against thresholds ``theta * tau**(T-t)``.

    Starting from ``v_g``, step ``t`` fires when the remaining potential reaches
    the step's threshold and then subtracts it.
    """
    x = normalize(v_g, cfg.theta)
    word = _greedy_digits(x, cfg.T, cfg.tau, cfg.comparator == "strictly-greater")
    return PackedSpikes(word, cfg.T, cfg.tau)


@lru_cache(maxsize=32)
def _codebook(T: int, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and words of every pattern that is its own greedy decoding."""
    words = np.arange(1 << T, dtype=np.uint64)
    shifts = np.arange(T - 1, -1, -1, dtype=np.uint64)
    digits = ((words[:, None] >> shifts) & np.uint64(1)).astype(np.float64)
    values = digits @ temporal_weights(T, tau)
    fixed = _greedy_digits(values, T, tau, strict=False) == words
    values, words = values[fixed], words[fixed]
    order = np.argsort(values, kind="stable")
    values, words = values[order], words[order]
    values.setflags(write=False)
    words.setflags(write=False)
    return values, words


def _quantize_pow2(x: np.ndarray, T: int, strict: bool, nearest: bool) -> np.ndarray:
    if nearest:
        k = np.floor(x + 0.5)
    elif strict:
        k = np.ceil(x) - 1.0
    else:
        k = np.floor(x)
    sat = k >= 2.0**T
    k = np.clip(np.where(sat, 0.0, k), 0.0, None)
    return np.where(sat, all_ones(T), k.astype(np.uint64))


def _quantize_codebook(x: np.ndarray, T: int, tau: float, strict: bool, nearest: bool) -> np.ndarray:
    values, words = _codebook(T, tau)
    if nearest:
        hi = np.clip(np.searchsorted(values, x, side="left"), 0, len(values) - 1)
        lo = np.clip(hi - 1, 0, None)
        idx = np.where(np.abs(x - values[lo]) < np.abs(values[hi] - x), lo, hi)
    else:
        side = "left" if strict else "right"
        idx = np.searchsorted(values, x, side=side) - 1
    return np.where(idx < 0, np.uint64(0), words[np.clip(idx, 0, None)])


def spikepack_quantize_parallel(v_g, cfg: NeuronConfig) -> PackedSpikes:
    """Closed-form SpikePack output: no per-step state is carried.

    With ``tau == 2`` the word is ``clamp(floor(v_g / theta), 0, 2**T - 1)``
    (``ceil(.) - 1`` for the strict comparator, ``round(.)`` in nearest mode).
    For other ``tau`` the potential is located in the sorted table of greedy
    codes with a binary search, which is the non-uniform analogue of ``floor``.
    """
    x = normalize(v_g, cfg.theta)
    strict = cfg.comparator == "strictly-greater"
    nearest = cfg.rounding == "nearest"
    if cfg.tau == 2.0:
        word = _quantize_pow2(x, cfg.T, strict, nearest)
    elif cfg.T <= CODEBOOK_MAX_T:
        word = _quantize_codebook(x, cfg.T, cfg.tau, strict, nearest)
    else:
        word = _greedy_digits(x, cfg.T, cfg.tau, strict)
    return PackedSpikes(np.asarray(word, dtype=np.uint64), cfg.T, cfg.tau)


def default_direct_theta(T: int) -> float:
    """Threshold rule for directly trained nets, ``T / 2**T``."""
    return T / 2.0**T
