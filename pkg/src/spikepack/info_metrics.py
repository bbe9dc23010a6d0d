"""Mutual-information analysis of SpikePack and LIF neurons, plus workload metrics.

Analytic side: the Gaussian approximation of the global potential, the
SpikePack information ``0.5 * log2(12 * var / theta**2)`` and the per-step
entropy bound for LIF. Empirical side: a Monte-Carlo estimator that simulates
the actual neurons and measures the entropy of their output words (the
output is a deterministic function of the inputs and weights, so that entropy
is the information carried), with Miller-Madow bias correction.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import erfc

from .errors import DomainError
from .neurons import NeuronConfig, lif_update, spikepack_quantize_parallel
from .spike_tensor import PackedSpikes, evaluate, pack, temporal_weights

ThetaRule = Literal["six-sigma", "explicit"]
Model = Literal["spikepack", "lif"]

CHUNK = 20_000


@dataclass(frozen=True)
class MiExperimentConfig:
    N: int = 16
    T: int = 16
    p: float = 0.5
    sigma2: float = 1.0
    tau: float = 2.0
    theta_rule: ThetaRule = "six-sigma"
    theta: float | None = None
    samples: int = 1_000_000
    seed: int = 0
    lif_theta_ratio: float = 0.5
    lif_theta: float | None = None
    lif_tau: float | None = None

    def __post_init__(self):
        if self.N < 1 or self.T < 1:
            raise DomainError("N and T must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("p must lie in [0, 1]")
        if self.sigma2 <= 0:
            raise DomainError("sigma2 must be > 0")
        if self.samples < 1:
            raise DomainError("samples must be >= 1")
        if self.theta_rule not in ("six-sigma", "explicit"):
            raise DomainError(f"unknown theta rule {self.theta_rule!r}")
        if self.theta_rule == "explicit" and (self.theta is None or self.theta <= 0):
            raise DomainError("the explicit theta rule needs theta > 0")


# ------------------------------------------------------------------ analytic side


def q_function(x):
    """Gaussian upper tail probability ``P(Z > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def binary_entropy(prob) -> np.ndarray:
    p = np.asarray(prob, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def analytic_variance_vg(cfg: MiExperimentConfig) -> float:
    """``sigma2 * N * p * (1 - p) * (sum q)**2``."""
    qsum = temporal_weights(cfg.T, cfg.tau).sum()
    return cfg.sigma2 * cfg.N * cfg.p * (1 - cfg.p) * qsum**2


def exact_variance_vg(cfg: MiExperimentConfig) -> float:
    """Second moment of ``w . S q`` over the full weight/input ensemble.

    Unlike :func:`analytic_variance_vg` this keeps the ``p**2`` term that a
    random zero-mean weight contributes: ``sigma2 * N * (p(1-p) sum q**2 + p**2 (sum q)**2)``.
    """
    q = temporal_weights(cfg.T, cfg.tau)
    return cfg.sigma2 * cfg.N * (cfg.p * (1 - cfg.p) * (q**2).sum() + cfg.p**2 * q.sum() ** 2)


def six_sigma_theta(sigma: float, T: int) -> float:
    """Step size that spreads ``2**T`` levels over six standard deviations."""
    return 6.0 * sigma / 2.0**T


def resolve_theta(cfg: MiExperimentConfig) -> float:
    if cfg.theta_rule == "explicit":
        return float(cfg.theta)
    return six_sigma_theta(math.sqrt(analytic_variance_vg(cfg)), cfg.T)


def gaussian_differential_entropy(var: float) -> float:
    return 0.5 * math.log2(2 * math.pi * math.e * var)


def conditional_entropy_quantizer(theta: float) -> float:
    """Entropy assigned to uniform quantization noise, ``log2(theta) - log2(sqrt(12))``."""
    if theta <= 0:
        raise DomainError("theta must be > 0")
    return math.log2(theta) - math.log2(math.sqrt(12.0))


def analytic_mi_spikepack(cfg: MiExperimentConfig, theta: float | None = None) -> float:
    """``0.5 * log2(12 * var_vg / theta**2)`` in bits."""
    theta = resolve_theta(cfg) if theta is None else float(theta)
    if theta <= 0:
        raise DomainError("theta must be > 0")
    return 0.5 * math.log2(12.0 * analytic_variance_vg(cfg) / theta**2)


def lif_sigma(cfg: MiExperimentConfig) -> float:
    """Standard deviation of one step's input current, ``sqrt(sigma2 N p (1-p))``."""
    return math.sqrt(cfg.sigma2 * cfg.N * cfg.p * (1 - cfg.p))


def lif_theta(cfg: MiExperimentConfig) -> float:
    if cfg.lif_theta is not None:
        return float(cfg.lif_theta)
    return cfg.lif_theta_ratio * lif_sigma(cfg)


def analytic_mi_lif_bound(cfg: MiExperimentConfig, theta: float | None = None) -> float:
    """``T * H(Q(theta / sigma'))``: per-step spike entropies assumed independent."""
    theta = lif_theta(cfg) if theta is None else float(theta)
    sigma = lif_sigma(cfg)
    if sigma == 0:
        return 0.0
    return float(cfg.T * binary_entropy(q_function(theta / sigma)))


# ------------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class EntropyEstimate:
    bits: float
    stderr: float
    samples: int
    occupied: int


def entropy_from_counts(counts) -> EntropyEstimate:
    """Plug-in entropy with Miller-Madow correction and its delta-method standard error."""
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    n = float(c.sum())
    if n == 0:
        return EntropyEstimate(0.0, 0.0, 0, 0)
    p = c / n
    logp = np.log2(p)
    h = -float(np.dot(p, logp))
    mm = (len(c) - 1) / (2.0 * n * math.log(2.0))
    var = max(float(np.dot(p, logp**2)) - h * h, 0.0)
    return EntropyEstimate(h + mm, math.sqrt(var / n), int(n), int(len(c)))


@dataclass(frozen=True)
class MiEstimate:
    model: str
    bits: float
    stderr: float
    samples: int
    occupied: int
    theta: float
    flagged: bool = False


def _spikepack_words(rng: np.random.Generator, cfg: MiExperimentConfig, m: int,
                     neuron: NeuronConfig, offset: float) -> np.ndarray:
    S = rng.random((m, cfg.N, cfg.T)) < cfg.p
    w = rng.standard_normal((m, cfg.N)) * math.sqrt(cfg.sigma2)
    packed_in = pack(S.astype(np.uint8), cfg.tau)
    v_g = np.einsum("mn,mn->m", w, evaluate(packed_in))
    return spikepack_quantize_parallel(v_g + offset, neuron).bits


def _lif_words(rng: np.random.Generator, cfg: MiExperimentConfig, m: int, theta: float, tau: float) -> np.ndarray:
    S = (rng.random((m, cfg.N, cfg.T)) < cfg.p).astype(np.float64)
    w = rng.standard_normal((m, cfg.N)) * math.sqrt(cfg.sigma2)
    current = np.einsum("mn,mnt->mt", w, S)
    v = np.zeros(m)
    s = np.zeros(m, dtype=np.uint8)
    out = np.zeros((m, cfg.T), dtype=np.uint8)
    for t in range(cfg.T):
        v, s = lif_update(v, s, current[:, t], tau, theta)
        out[:, t] = s
    return pack(out, 2.0).bits


def spikepack_mc_setup(cfg: MiExperimentConfig) -> tuple[NeuronConfig, float]:
    """Threshold and bias for the simulated SpikePack neuron.

    The six-sigma rule is applied to the exact ensemble standard deviation and
    the bias ``3 sigma`` centres the ``2**T`` levels on the zero-mean potential,
    so the levels span ``[-3 sigma, 3 sigma)`` as the rule intends.
    """
    sigma = math.sqrt(exact_variance_vg(cfg))
    if cfg.theta_rule == "explicit":
        theta = float(cfg.theta)
    else:
        theta = six_sigma_theta(sigma, cfg.T) if sigma > 0 else 1.0
    offset = 3.0 * sigma if cfg.theta_rule == "six-sigma" else 0.0
    return NeuronConfig(cfg.tau, theta, cfg.T), offset


def monte_carlo_mi(cfg: MiExperimentConfig, model: Model = "spikepack", *, tolerance: float | None = None,
                   workers: int = 1) -> MiEstimate:
    """Estimate the input/output information of one neuron by simulation.

    Every sample draws fresh Bernoulli inputs and Gaussian weights. Samples are
    generated in fixed-size chunks, each with its own RNG stream spawned from
    ``cfg.seed``, and the word histogram is summed, so the result does not
    depend on ``workers``.
    """
    if model not in ("spikepack", "lif"):
        raise DomainError(f"unknown model {model!r}")
    if model == "spikepack":
        neuron, offset = spikepack_mc_setup(cfg)
        theta = float(neuron.theta)
        draw = lambda rng, m: _spikepack_words(rng, cfg, m, neuron, offset)  # noqa: E731
    else:
        theta = lif_theta(cfg)
        tau = cfg.tau if cfg.lif_tau is None else cfg.lif_tau
        draw = lambda rng, m: _lif_words(rng, cfg, m, theta, tau)  # noqa: E731

    sizes = [CHUNK] * (cfg.samples // CHUNK)
    if cfg.samples % CHUNK:
        sizes.append(cfg.samples % CHUNK)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def run(i: int) -> tuple[np.ndarray, np.ndarray]:
        words = draw(np.random.default_rng(streams[i]), sizes[i])
        return np.unique(words, return_counts=True)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    keys = np.concatenate([k for k, _ in parts])
    counts = np.concatenate([c for _, c in parts])
    uniq, inv = np.unique(keys, return_inverse=True)
    hist = np.bincount(inv, weights=counts, minlength=len(uniq))
    est = entropy_from_counts(hist)
    flagged = tolerance is not None and est.stderr > tolerance
    if flagged:
        warnings.warn(f"{model} MI standard error {est.stderr:.3g} exceeds tolerance {tolerance:.3g}; "
                      f"increase samples", RuntimeWarning, stacklevel=2)
    return MiEstimate(model, est.bits, est.stderr, est.samples, est.occupied, theta, flagged)


# -------------------------------------------------------------- workload metrics


def sop(firing_rate: float, flops: float, T: int) -> float:
    """Synaptic operations, ``firing_rate * flops * T``."""
    if not 0.0 <= firing_rate <= 1.0:
        raise DomainError("firing rate must lie in [0, 1]")
    if flops < 0:
        raise DomainError("flops must be >= 0")
    return firing_rate * flops * T


def firing_rate(packed: PackedSpikes) -> float:
    """Popcount over all words divided by ``N * T``."""
    return packed.firing_rate()
