"""Bit-packed spike trains.

A spike train of ``T`` binary time steps is stored as one unsigned 64-bit word
per neuron. Time step 1 sits in the most significant used bit (position
``T - 1``) and time step ``T`` in bit 0, so for ``tau == 2`` the word read as an
integer is exactly the tau-weighted spike sum ``S @ q`` with
``q = [tau**(T-1), ..., tau**0]``.

Binary layout of a serialized record (little-endian)::

    u32 N | u8 T | f64 tau | N x u64 words

A stream file is a plain concatenation of such records.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

import numpy as np

from .errors import ContainerError, DomainError, ShapeError

MAX_STEPS = 64
_HEADER = struct.Struct("<IBd")


def _check_steps(T: int) -> None:
    if not 1 <= int(T) <= MAX_STEPS:
        raise ShapeError(f"T must lie in [1, {MAX_STEPS}], got {T}")


def _check_tau(tau: float) -> None:
    if not np.isfinite(tau) or tau <= 1.0:
        raise DomainError(f"tau must be a finite real > 1, got {tau}")


def temporal_weights(T: int, tau: float) -> np.ndarray:
    """Return ``q = [tau**(T-1), ..., tau**1, 1]``; ``q[-1]`` is exactly 1."""
    _check_steps(T)
    return np.float64(tau) ** np.arange(T - 1, -1, -1, dtype=np.float64)


def full_scale(T: int, tau: float) -> float:
    """Largest representable weighted value, ``sum(q)`` (``2**T - 1`` for tau=2)."""
    if tau == 2.0:
        return float(2**T - 1)
    return float(temporal_weights(T, tau).sum())


def all_ones(T: int) -> np.uint64:
    return np.uint64((1 << T) - 1)


@dataclass(frozen=True)
class SpikeMatrix:
    """Dense binary spike record with time on the last axis.

    ``data`` has shape ``(..., T)``; every leading index is one neuron, so a
    plain ``(N, T)`` matrix and a ``(batch, C, H, W, T)`` tensor are both valid.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim < 1:
            raise ShapeError("spike data needs a trailing time axis")
        _check_steps(data.shape[-1])
        if data.dtype != np.uint8:
            if not np.all((data == 0) | (data == 1)):
                raise DomainError("spike matrix entries must be 0 or 1")
            data = data.astype(np.uint8)
        elif np.any(data > 1):
            raise DomainError("spike matrix entries must be 0 or 1")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def T(self) -> int:
        return self.data.shape[-1]

    @property
    def N(self) -> int:
        return int(np.prod(self.data.shape[:-1], dtype=np.int64))

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    def spike_count(self) -> int:
        return int(self.data.sum(dtype=np.int64))


@dataclass(frozen=True)
class PackedSpikes:
    """One ``uint64`` word per neuron plus the ``(T, tau)`` needed to read it."""

    bits: np.ndarray
    T: int
    tau: float = 2.0

    def __post_init__(self):
        _check_steps(self.T)
        _check_tau(self.tau)
        bits = np.asarray(self.bits)
        if bits.dtype != np.uint64:
            if bits.dtype.kind not in "iu" or np.any(bits < 0):
                raise DomainError("packed words must be non-negative integers")
            bits = bits.astype(np.uint64)
        if self.T < MAX_STEPS and np.any(bits >> np.uint64(self.T)):
            raise DomainError(f"packed words carry bits above position T-1={self.T - 1}")
        bits = bits.copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.bits.shape

    @property
    def N(self) -> int:
        return int(self.bits.size)

    @property
    def nbytes(self) -> int:
        return self.bits.nbytes

    def spike_count(self) -> int:
        return int(np.bitwise_count(self.bits).sum(dtype=np.int64))

    def firing_rate(self) -> float:
        """Fraction of the ``N * T`` spike slots that hold a 1."""
        if self.N == 0:
            return 0.0
        return self.spike_count() / (self.N * self.T)

    def reshape(self, *shape) -> "PackedSpikes":
        return PackedSpikes(self.bits.reshape(*shape), self.T, self.tau)


def pack(spikes: SpikeMatrix | np.ndarray, tau: float = 2.0) -> PackedSpikes:
    """Compress a ``(..., T)`` spike record into one word per neuron."""
    if not isinstance(spikes, SpikeMatrix):
        spikes = SpikeMatrix(np.asarray(spikes))
    T = spikes.T
    shifts = np.arange(T - 1, -1, -1, dtype=np.uint64)
    words = np.bitwise_or.reduce(spikes.data.astype(np.uint64) << shifts, axis=-1)
    return PackedSpikes(np.asarray(words, dtype=np.uint64), T, tau)


def unpack(packed: PackedSpikes) -> SpikeMatrix:
    """Inverse of :func:`pack`; the result has shape ``packed.shape + (T,)``."""
    shifts = np.arange(packed.T - 1, -1, -1, dtype=np.uint64)
    data = (packed.bits[..., None] >> shifts) & np.uint64(1)
    return SpikeMatrix(data.astype(np.uint8))


def evaluate(packed: PackedSpikes) -> np.ndarray:
    """Tau-weighted spike sum per neuron, ``sum_t s_t * tau**(T-t)``.

    For ``tau == 2`` this is the word itself converted to float.
    """
    if packed.tau == 2.0:
        return packed.bits.astype(np.float64)
    tau = np.float64(packed.tau)
    out = np.zeros(packed.shape, dtype=np.float64)
    # Horner from the most significant (earliest) step.
    for shift in range(packed.T - 1, -1, -1):
        bit = (packed.bits >> np.uint64(shift)) & np.uint64(1)
        out = out * tau + bit
    return out


def dumps(packed: PackedSpikes) -> bytes:
    words = np.ascontiguousarray(packed.bits.reshape(-1), dtype="<u8")
    return _HEADER.pack(packed.N, packed.T, packed.tau) + words.tobytes()


def loads(buf: bytes, offset: int = 0) -> tuple[PackedSpikes, int]:
    """Decode one record starting at ``offset``; returns it and the next offset."""
    if len(buf) - offset < _HEADER.size:
        raise ContainerError("truncated packed-spike header")
    n, T, tau = _HEADER.unpack_from(buf, offset)
    offset += _HEADER.size
    end = offset + 8 * n
    if len(buf) < end:
        raise ContainerError(f"truncated packed-spike payload: need {8 * n} bytes")
    words = np.frombuffer(buf, dtype="<u8", count=n, offset=offset).astype(np.uint64)
    try:
        return PackedSpikes(words, T, tau), end
    except (ShapeError, DomainError) as exc:
        raise ContainerError(f"invalid packed-spike record: {exc}") from exc


def write_stream(fh: BinaryIO, records) -> None:
    for rec in records:
        fh.write(dumps(rec))


def read_stream(fh: BinaryIO) -> Iterator[PackedSpikes]:
    buf = fh.read()
    offset = 0
    while offset < len(buf):
        rec, offset = loads(buf, offset)
        yield rec
