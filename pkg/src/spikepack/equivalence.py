"""Property suites comparing the serial SpikePack decoder with the parallel quantizer."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .neurons import NeuronConfig, spikepack_decode_serial, spikepack_quantize_parallel
from .spike_tensor import evaluate, pack, temporal_weights


@dataclass(frozen=True)
class Counterexample:
    suite: str
    tau: float
    T: int
    theta: float
    v_g: float
    got: int
    expected: int


@dataclass
class SuiteResult:
    suite: str
    cases: int
    mismatches: int
    counterexamples: list[Counterexample]


def random_potentials(rng: np.random.Generator, n: int, T: int, tau: float, theta: np.ndarray) -> np.ndarray:
    """Potentials biased towards decision boundaries.

    A third are exact code values times ``theta``, a third sit a few ulps
    either side of one, and the rest are uniform over slightly more than the
    representable range (negative and saturating values included).
    """
    kind = rng.integers(0, 3, n)
    digits = (rng.random((n, T)) < 0.5).astype(np.uint8)
    code = evaluate(pack(digits, tau))
    exact = code * theta
    nudged = exact.copy()
    for _ in range(3):
        step = rng.integers(0, 2, n).astype(bool)
        nudged = np.where(step, np.nextafter(nudged, np.inf), np.nextafter(nudged, -np.inf))
    top = temporal_weights(T, tau).sum()
    uniform = rng.uniform(-0.1 * top, 1.1 * top, n) * theta
    return np.select([kind == 0, kind == 1], [exact, nudged], uniform)


def serial_parallel_suite(cases: int, taus: Sequence[float], t_max: int, seed: int = 0,
                          comparator: str = "at-least", rounding: str = "greedy-floor",
                          keep: int = 20) -> SuiteResult:
    """Randomised serial vs parallel agreement over ``tau`` in ``taus`` and ``T`` in ``1..t_max``."""
    rng = np.random.default_rng(seed)
    tau_idx = rng.integers(0, len(taus), cases)
    Ts = rng.integers(1, t_max + 1, cases)
    thetas = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), cases))
    bad: list[Counterexample] = []
    mismatches = 0
    for ti, tau in enumerate(taus):
        for T in range(1, t_max + 1):
            sel = (tau_idx == ti) & (Ts == T)
            m = int(sel.sum())
            if not m:
                continue
            theta = thetas[sel]
            v = random_potentials(rng, m, T, tau, theta)
            cfg = NeuronConfig(tau, theta, T, comparator, rounding)
            a = spikepack_decode_serial(v, cfg).bits
            b = spikepack_quantize_parallel(v, cfg).bits
            diff = np.flatnonzero(a != b)
            mismatches += len(diff)
            for i in diff[: max(keep - len(bad), 0)]:
                bad.append(Counterexample("serial-parallel", float(tau), T, float(theta[i]), float(v[i]),
                                          int(b[i]), int(a[i])))
    return SuiteResult("serial-parallel", cases, mismatches, bad)


def roundtrip_suite(t_max: int = 12, thetas: Sequence[float] = (1.0,), comparator: str = "at-least",
                    keep: int = 20) -> SuiteResult:
    """Quantize every ``k * theta`` for ``k`` in ``0..2**T - 1`` (``tau = 2``) and expect ``k`` back."""
    bad: list[Counterexample] = []
    cases = mismatches = 0
    for theta in thetas:
        for T in range(1, t_max + 1):
            k = np.arange(2**T, dtype=np.float64)
            v = k * theta
            cfg = NeuronConfig(2.0, theta, T, comparator)
            got = evaluate(spikepack_quantize_parallel(v, cfg))
            diff = np.flatnonzero(got != k)
            cases += len(k)
            mismatches += len(diff)
            for i in diff[: max(keep - len(bad), 0)]:
                bad.append(Counterexample("roundtrip", 2.0, T, float(theta), float(v[i]), int(got[i]), int(k[i])))
    return SuiteResult("roundtrip", cases, mismatches, bad)
