"""Simulated-annealing Metropolis sampler for the territorial Ising model.

Spins are +1 (central hub) and -1 (peripheral area). The chain starts from a
given configuration, flips one uniformly chosen unit per iteration and keeps a
running tally of how often each unit sits at +1 after burn-in.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel
from .errors import (DimensionMismatch, IndexOutOfRange, InvalidIteration,
                     NonPositiveTemperature, OutOfRange)
from .indices import ExternalField
from .network import InteractionGraph

HUB = 1
PERIPHERY = -1

SCHEDULE_KINDS = {
    "hyperbolic": _kernel.HYPERBOLIC,
    "logarithmic": _kernel.LOGARITHMIC,
    "fixed": _kernel.FIXED,
}

BLOCK = 1 << 18
MAX_TRACKED_UNITS = 20
MASK64 = (1 << 64) - 1


def as_spins(values, n: int | None = None) -> np.ndarray:
    """Validate and copy a spin vector into an int8 array of +/-1."""
    s = np.asarray(values)
    if s.ndim != 1:
        raise DimensionMismatch("a spin configuration is a 1-D vector")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be exactly -1 or +1")
    if n is not None and s.size != n:
        raise DimensionMismatch(f"configuration of length {s.size}, expected {n}")
    return s.astype(np.int8)


def _field_array(field_, n: int) -> np.ndarray:
    h = field_.h if isinstance(field_, ExternalField) else field_
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise DimensionMismatch(f"field of length {h.size} for {n} units")
    return h


@dataclass(frozen=True)
class AnnealingSchedule:
    kind: str = "hyperbolic"
    t0: float = 100.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; use one of {sorted(SCHEDULE_KINDS)}")
        if not self.t0 > 0:
            raise NonPositiveTemperature(f"t0 must be positive, got {self.t0}")

    def temperature(self, t: int) -> float:
        return temperature_at(self, t)


@dataclass(frozen=True)
class ChainSpec:
    n_iter: int = 600_000
    burn_in_fraction: float = 0.10
    seed: int = 0
    workers: int = 1
    trace_stride: int | None = None  # default: about 1000 trace points

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.burn_in >= self.n_iter:
            raise ValueError("burn-in leaves no iterations to sample")
        if self.workers < 1:
            raise ValueError("workers must be positive")

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.burn_in_fraction * self.n_iter))

    @property
    def stride(self) -> int:
        if self.trace_stride is not None:
            return max(1, int(self.trace_stride))
        return max(1, self.n_iter // 1000)


@dataclass
class ChainResult:
    counts: np.ndarray  # per-unit number of post-burn-in configurations at +1
    samples_used: int
    trace_iterations: np.ndarray
    trace_energies: np.ndarray
    initial_energy: float
    final_energy: float  # tracked incrementally from accepted changes
    final: np.ndarray
    accepted: int
    state_counts: np.ndarray | None = None  # histogram over 2**N packed configurations
    n_iter: int = 0

    @property
    def marginals(self) -> np.ndarray:
        return self.counts / self.samples_used


@dataclass
class MarginalEstimate:
    unit_ids: tuple
    p_hat: np.ndarray
    replicates: np.ndarray  # K x N
    sigma: np.ndarray
    seeds: tuple = field(default=())

    @classmethod
    def from_replicates(cls, unit_ids, replicates, seeds=()) -> "MarginalEstimate":
        reps = np.asarray(replicates, dtype=float)
        if reps.ndim != 2:
            raise DimensionMismatch("replicates must be K x N")
        return cls(tuple(unit_ids), reps.mean(axis=0), reps, reps.std(axis=0), tuple(seeds))

    @property
    def k(self) -> int:
        return self.replicates.shape[0]


def hamiltonian(config, graph: InteractionGraph, field_) -> float:
    """H(s) = -1/2 sum_ij J_ij s_i s_j - sum_i h_i s_i (ordered pairs)."""
    s = np.asarray(config, dtype=float)
    if s.shape != (graph.n,):
        raise DimensionMismatch(f"configuration of length {s.size} for graph of {graph.n} units")
    h = _field_array(field_, graph.n)
    return float(-0.5 * (s @ (graph.matrix @ s)) - h @ s)


def delta_energy(config, i: int, graph: InteractionGraph, field_) -> float:
    """Exact energy change from flipping spin ``i``: 2 s_i (sum_j J_ij s_j + h_i)."""
    if not 0 <= i < graph.n:
        raise IndexOutOfRange(f"unit index {i} outside [0, {graph.n})")
    s = np.asarray(config, dtype=float)
    if s.shape != (graph.n,):
        raise DimensionMismatch(f"configuration of length {s.size} for graph of {graph.n} units")
    h = _field_array(field_, graph.n)
    m = graph.matrix
    lo, hi = m.indptr[i], m.indptr[i + 1]
    local = float(np.dot(m.data[lo:hi], s[m.indices[lo:hi]]))
    return 2.0 * s[i] * (local + h[i])


def acceptance_probability(delta_h: float, temperature: float) -> float:
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    if delta_h <= 0:
        return 1.0
    return math.exp(-delta_h / temperature)


def temperature_at(schedule: AnnealingSchedule, t: int) -> float:
    if t < 1:
        raise InvalidIteration(f"iterations are numbered from 1, got t={t}")
    return float(_kernel.temperature(SCHEDULE_KINDS[schedule.kind], float(schedule.t0), float(t)))


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(seed: int, index: int) -> int:
    """Seed of replicate ``index``, a pure function of (master seed, index)."""
    return splitmix64(splitmix64(seed & MASK64) ^ (index & MASK64))


def run_chain(initial, graph: InteractionGraph, field_, schedule: AnnealingSchedule,
              spec: ChainSpec, track_states: bool = False) -> ChainResult:
    """One annealed Metropolis chain of ``spec.n_iter`` single-site steps.

    With ``track_states`` (only for N <= 20) the result also carries the
    visit histogram of every post-burn-in configuration, indexed by the
    bit pattern ``sum_i [s_i = +1] << i``.
    """
    n = graph.n
    spins = as_spins(initial, n).copy()
    h = _field_array(field_, n)
    if track_states and n > MAX_TRACKED_UNITS:
        raise ValueError(f"state tracking is limited to N <= {MAX_TRACKED_UNITS}")
    indptr, indices, weights = graph.csr_arrays()
    kind = SCHEDULE_KINDS[schedule.kind]
    burn = spec.burn_in
    stride = spec.stride

    e0 = hamiltonian(spins, graph, h)
    energy = np.array([e0])
    status = np.zeros(3, dtype=np.int64)
    if track_states:
        status[_kernel.ST_CODE] = int(np.sum((spins == 1).astype(np.int64) << np.arange(n)))
        hist = np.zeros(1 << n, dtype=np.int64)
    else:
        hist = np.zeros(1, dtype=np.int64)
    n_trace = spec.n_iter // stride
    trace_iter = np.zeros(n_trace + 1, dtype=np.int64)
    trace_energy = np.zeros(n_trace + 1)
    trace_energy[0] = e0
    status[_kernel.ST_TRACE_POS] = 1
    last = np.ones(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)

    rng = np.random.default_rng(spec.seed & MASK64)
    t = 1
    while t <= spec.n_iter:
        size = min(BLOCK, spec.n_iter - t + 1)
        nodes = rng.integers(0, n, size=size, dtype=np.int64) if n else np.zeros(size, np.int64)
        uniforms = rng.random(size)
        if n:
            _kernel.metropolis_block(indptr, indices, weights, h, spins, nodes, uniforms, t,
                                     kind, float(schedule.t0), burn, last, counts, energy,
                                     status, stride, trace_iter, trace_energy,
                                     track_states, hist)
        t += size
    _kernel.finalize_counts(spins, last, counts, burn, spec.n_iter)

    used = int(status[_kernel.ST_TRACE_POS])
    return ChainResult(
        counts=counts,
        samples_used=spec.n_iter - burn,
        trace_iterations=trace_iter[:used],
        trace_energies=trace_energy[:used],
        initial_energy=e0,
        final_energy=float(energy[0]),
        final=spins,
        accepted=int(status[_kernel.ST_ACCEPTED]),
        state_counts=hist if track_states else None,
        n_iter=spec.n_iter,
    )


def run_replicates(initial, graph: InteractionGraph, field_, schedule: AnnealingSchedule,
                   spec: ChainSpec, k: int, unit_ids: Sequence | None = None,
                   seeds: Sequence[int] | None = None, return_chains: bool = False):
    """Run ``k`` independent chains and pool their marginals.

    Replicate ``r`` uses ``replicate_seed(spec.seed, r)`` unless explicit
    ``seeds`` are given, so results do not depend on ``spec.workers``.
    """
    if k < 1:
        raise ValueError("need at least one replicate")
    if seeds is None:
        seeds = [replicate_seed(spec.seed, r) for r in range(k)]
    elif len(seeds) != k:
        raise ValueError(f"{len(seeds)} seeds for {k} replicates")
    ids = tuple(unit_ids) if unit_ids is not None else tuple(range(graph.n))
    if len(ids) != graph.n:
        raise DimensionMismatch(f"{len(ids)} unit ids for {graph.n} units")

    def one(seed):
        rspec = ChainSpec(spec.n_iter, spec.burn_in_fraction, seed, 1, spec.trace_stride)
        return run_chain(initial, graph, field_, schedule, rspec)

    if spec.workers == 1 or k == 1:
        chains = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=min(spec.workers, k)) as pool:
            chains = list(pool.map(one, seeds))
    est = MarginalEstimate.from_replicates(ids, np.vstack([c.marginals for c in chains]), seeds)
    return (est, chains) if return_chains else est


def sample_configurations(marginals, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` configurations with independent Bernoulli(p_hat_i) spins (n x N, int8)."""
    p = marginals.p_hat if isinstance(marginals, MarginalEstimate) else np.asarray(marginals, float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise OutOfRange("marginal probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed & MASK64)
    draws = rng.random((n, p.size)) < p
    return np.where(draws, HUB, PERIPHERY).astype(np.int8)


def resample_replicates(marginals, k: int, n: int, seed: int,
                        unit_ids: Sequence | None = None) -> MarginalEstimate:
    """Replicate estimates from ``k`` batches of ``n`` Bernoulli configurations.

    Each replicate's marginal is the +1 frequency over its ``n`` sampled
    configurations, i.e. Binomial(n, p_i) / n, drawn directly.
    """
    p = marginals.p_hat if isinstance(marginals, MarginalEstimate) else np.asarray(marginals, float)
    if np.any((p < 0) | (p > 1)):
        raise OutOfRange("marginal probabilities must lie in [0, 1]")
    if unit_ids is None:
        unit_ids = marginals.unit_ids if isinstance(marginals, MarginalEstimate) else range(p.size)
    rng = np.random.default_rng(seed & MASK64)
    reps = rng.binomial(n, p, size=(k, p.size)) / n
    return MarginalEstimate.from_replicates(unit_ids, reps)
