"""Coherence checks between simulated and observed configurations."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonPositiveTemperature, OutOfRange, ZeroReferenceEnergy
from .network import InteractionGraph
from .sampler import HUB, PERIPHERY, _field_array, as_spins, hamiltonian, replicate_seed

SPIN_ORDER = (PERIPHERY, HUB)


@dataclass(frozen=True)
class ConfigurationScore:
    energy: float
    energy_ratio: float
    loglik_ratio: float


@dataclass
class ConfigurationScores:
    """Column-wise scores of many configurations against one reference."""

    energy: np.ndarray
    energy_ratio: np.ndarray
    loglik_ratio: np.ndarray
    h_ref: float
    temperature: float

    def __len__(self):
        return self.energy.size

    def __getitem__(self, k) -> ConfigurationScore:
        return ConfigurationScore(float(self.energy[k]), float(self.energy_ratio[k]),
                                  float(self.loglik_ratio[k]))

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    @property
    def energy_drop_log(self) -> np.ndarray:
        """ln(H_ref - H), defined only where the configuration lies below the reference."""
        gap = self.h_ref - self.energy
        out = np.full(gap.shape, np.nan)
        pos = gap > 0
        out[pos] = np.log(gap[pos])
        return out


@dataclass
class MismatchMatrix:
    counts: np.ndarray  # rows: reference (-1, +1); columns: predicted (-1, +1)
    accuracy: float

    @classmethod
    def from_counts(cls, nn, np_, pn, pp) -> "MismatchMatrix":
        counts = np.array([[nn, np_], [pn, pp]], dtype=np.int64)
        total = counts.sum()
        if total == 0:
            raise EmptyInput("mismatch matrix with no units")
        return cls(counts, float(np.trace(counts) / total))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def as_dict(self) -> dict:
        c = self.counts
        return {
            "reference_-1_predicted_-1": int(c[0, 0]),
            "reference_-1_predicted_+1": int(c[0, 1]),
            "reference_+1_predicted_-1": int(c[1, 0]),
            "reference_+1_predicted_+1": int(c[1, 1]),
            "accuracy": self.accuracy,
        }


def energies(configs, graph: InteractionGraph, field_) -> np.ndarray:
    """Hamiltonian of every row of a K x N configuration matrix."""
    s = np.atleast_2d(np.asarray(configs, dtype=float))
    if s.shape[1] != graph.n:
        raise DimensionMismatch(f"configurations of width {s.shape[1]} for {graph.n} units")
    h = _field_array(field_, graph.n)
    js = (graph.matrix @ s.T).T
    return -0.5 * np.einsum("ki,ki->k", s, js) - s @ h


def score_configurations(configs, reference, graph: InteractionGraph, field_,
                         temperature: float = 1.0, allow_zero_reference: bool = False
                         ) -> ConfigurationScores:
    """Energy, H/H_ref and the log-likelihood ratio -(H - H_ref)/T of each configuration.

    The partition function cancels in the likelihood ratio and is never
    evaluated. If H_ref is 0 the ratio is undefined: raise, or with
    ``allow_zero_reference`` report NaN ratios next to the absolute energies.
    """
    if not temperature > 0:
        raise NonPositiveTemperature(f"temperature must be positive, got {temperature}")
    ref = as_spins(reference, graph.n)
    h_ref = hamiltonian(ref, graph, field_)
    e = energies(configs, graph, field_)
    if h_ref == 0.0:
        if not allow_zero_reference:
            raise ZeroReferenceEnergy("reference configuration has zero energy")
        ratio = np.full(e.shape, np.nan)
    else:
        ratio = e / h_ref
    return ConfigurationScores(e, ratio, -(e - h_ref) / temperature, h_ref, float(temperature))


def summary_stats(values) -> dict:
    """Min, quartiles, mean and max, ignoring NaNs."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return {k: None for k in ("min", "q1", "median", "mean", "q3", "max")}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"min": float(v.min()), "q1": float(q1), "median": float(med),
            "mean": float(v.mean()), "q3": float(q3), "max": float(v.max())}


def _xlog2x(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def _bernoulli_entropy(p):
    return -(_xlog2x(p) + _xlog2x(1.0 - p))


def jensen_shannon(p, q) -> float:
    """Mean per-unit Jensen-Shannon divergence of Bernoulli(p_i) vs Bernoulli(q_i), in bits."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch(f"vectors of shape {p.shape} and {q.shape}")
    if p.size == 0:
        raise EmptyInput("empty probability vectors")
    for name, v in (("p", p), ("q", q)):
        if not np.all((v >= 0) & (v <= 1)):
            raise OutOfRange(f"{name} has entries outside [0, 1]")
    m = 0.5 * (p + q)
    jsd = _bernoulli_entropy(m) - 0.5 * (_bernoulli_entropy(p) + _bernoulli_entropy(q))
    return float(np.clip(jsd, 0.0, 1.0).mean())


def predict_classes(p_hat, threshold: float = 0.5) -> tuple[np.ndarray, int]:
    """Spin +1 where p_hat >= threshold; also returns how many sat exactly on it."""
    p = np.asarray(p_hat, dtype=float)
    spins = np.where(p >= threshold, HUB, PERIPHERY).astype(np.int8)
    return spins, int(np.sum(p == threshold))


def mismatch(reference, predicted) -> MismatchMatrix:
    ref = as_spins(reference)
    pred = as_spins(predicted)
    if ref.shape != pred.shape:
        raise DimensionMismatch(f"reference of length {ref.size}, prediction of length {pred.size}")
    counts = [[int(np.sum((ref == a) & (pred == b))) for b in SPIN_ORDER] for a in SPIN_ORDER]
    return MismatchMatrix.from_counts(counts[0][0], counts[0][1], counts[1][0], counts[1][1])


def bootstrap_ci(values, r: int = 200, m: int = 1000, alpha: float = 0.05, seed: int = 0,
                 workers: int = 1) -> dict:
    """Percentile bootstrap interval for the mean.

    Resample ``b`` draws its indices from a generator seeded with
    ``replicate_seed(seed, b)``, so the result does not depend on ``workers``.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("bootstrap of an empty sample")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if r < 1 or m < 1:
        raise ValueError("r and m must be positive")

    def one(b):
        rng = np.random.default_rng(replicate_seed(seed, b))
        return v[rng.integers(0, v.size, size=m)].mean()

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            means = np.array(list(pool.map(one, range(r))))
    else:
        means = np.array([one(b) for b in range(r)])
    lo, hi = np.quantile(means, [alpha / 2, 1 - alpha / 2])
    return {"mean": float(means.mean()), "lower": float(lo), "upper": float(hi),
            "r": int(r), "m": int(m), "alpha": float(alpha)}
