"""Composite indicators: Mazziotta-Pareto aggregation and PCA external field.

Base indicators are standardized to a base-100 / spread-10 scale, collapsed
into one non-compensatory index per thematic group, and the group indices
are then fused into a single field value per unit by weighting every
principal component with its share of explained variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConstantIndicator, DegenerateInput, DimensionMismatch, ZeroMean

POSITIVE = "positive"
NEGATIVE = "negative"

# relative threshold below which a correlation eigenvalue is treated as exactly 0
EIGEN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class IndicatorSpec:
    name: str
    polarity: int = 1
    group: str = "MPI1"

    def __post_init__(self):
        if self.polarity not in (-1, 1) or isinstance(self.polarity, bool):
            raise ValueError(f"polarity of {self.name!r} must be -1 or +1, got {self.polarity!r}")


@dataclass(frozen=True)
class IndicatorTable:
    unit_ids: tuple
    values: np.ndarray
    specs: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("indicator values must be an N x M matrix")
        n, m = values.shape
        if n < 2 or m < 1:
            raise DimensionMismatch(f"need N >= 2 units and M >= 1 indicators, got {values.shape}")
        if len(self.unit_ids) != n:
            raise DimensionMismatch(f"{len(self.unit_ids)} unit ids for {n} rows")
        if len(self.specs) != m:
            raise DimensionMismatch(f"{len(self.specs)} indicator specs for {m} columns")
        if not np.all(np.isfinite(values)):
            raise ValueError("indicator table contains missing or non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "unit_ids", tuple(self.unit_ids))
        object.__setattr__(self, "specs", tuple(self.specs))

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def polarities(self) -> np.ndarray:
        return np.array([s.polarity for s in self.specs], dtype=float)

    def groups(self) -> dict[str, list[int]]:
        """Column indices per group, groups in order of first appearance."""
        out: dict[str, list[int]] = {}
        for j, spec in enumerate(self.specs):
            out.setdefault(spec.group, []).append(j)
        return out


@dataclass(frozen=True)
class CompositeIndexVector:
    unit_ids: tuple
    scores: np.ndarray
    direction: str = POSITIVE
    name: str = ""


@dataclass(frozen=True)
class PcaDecomposition:
    components: np.ndarray  # N x P unit scores
    lambdas: np.ndarray  # explained-variance shares, sum to 1
    sdevs: np.ndarray  # component standard deviations, non-increasing
    loadings: np.ndarray = field(default=None)  # P x P, column k is direction k
    names: tuple = ()

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.lambdas)


@dataclass(frozen=True)
class ExternalField:
    unit_ids: tuple
    h: np.ndarray

    def __len__(self):
        return len(self.h)


def _as_matrix(data) -> tuple[np.ndarray, list]:
    if isinstance(data, IndicatorTable):
        return data.values, data.names
    mat = np.asarray(data, dtype=float)
    if mat.ndim != 2:
        raise DimensionMismatch("expected a 2-D matrix")
    return mat, [f"V{j + 1}" for j in range(mat.shape[1])]


def standardize(table: IndicatorTable) -> np.ndarray:
    """Rescale every indicator to mean 100 and (population) sd 10, sign by polarity."""
    x = table.values
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    for j, s in enumerate(sigma):
        if s == 0.0:
            raise ConstantIndicator(table.specs[j].name)
    return 10.0 * table.polarities * ((x - mu) / sigma) + 100.0


def mpi(standardized, direction: str = POSITIVE, unit_ids: Sequence | None = None,
        name: str = "") -> CompositeIndexVector:
    """Mazziotta-Pareto index of each row of an already standardized matrix.

    The row mean is penalized (positive phenomena) or inflated (negative
    phenomena) by ``S**2 / M`` where ``S`` is the population sd of the row,
    so unbalanced profiles score worse than balanced ones with the same mean.
    """
    z = np.asarray(standardized, dtype=float)
    if z.ndim == 1:
        z = z[None, :]
    if z.shape[1] < 1:
        raise DimensionMismatch("MPI needs at least one indicator")
    if direction not in (POSITIVE, NEGATIVE):
        raise ValueError(f"direction must be {POSITIVE!r} or {NEGATIVE!r}")
    ids = tuple(unit_ids) if unit_ids is not None else tuple(range(z.shape[0]))
    if len(ids) != z.shape[0]:
        raise DimensionMismatch(f"{len(ids)} unit ids for {z.shape[0]} rows")
    m = z.mean(axis=1)
    s = z.std(axis=1)
    zero = np.flatnonzero(m == 0.0)
    if zero.size:
        raise ZeroMean(ids[zero[0]])
    penalty = s * (s / m)
    scores = m - penalty if direction == POSITIVE else m + penalty
    return CompositeIndexVector(ids, scores, direction, name)


def composite_indices(table: IndicatorTable, directions: dict[str, str] | None = None
                      ) -> tuple[list[str], np.ndarray]:
    """One MPI column per indicator group. Returns (group names, N x G matrix)."""
    directions = directions or {}
    z = standardize(table)
    names, cols = [], []
    for group, idx in table.groups().items():
        vec = mpi(z[:, idx], directions.get(group, POSITIVE), table.unit_ids, group)
        names.append(group)
        cols.append(vec.scores)
    return names, np.column_stack(cols)


def correlation_matrix(data) -> np.ndarray:
    """Pearson correlation between columns."""
    x, names = _as_matrix(data)
    xc = x - x.mean(axis=0)
    sd = np.sqrt((xc ** 2).mean(axis=0))
    for j, s in enumerate(sd):
        if s == 0.0:
            raise ConstantIndicator(names[j])
    z = xc / sd
    corr = (z.T @ z) / x.shape[0]
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return np.clip(corr, -1.0, 1.0)


def pca(matrix, names: Sequence[str] | None = None) -> PcaDecomposition:
    """Correlation-based principal components.

    Eigenvalues that are numerically zero (collinear inputs) are set to
    exactly zero together with the matching scores, so such components
    carry no weight downstream. Each direction is signed so that its
    largest-magnitude loading is positive.
    """
    x, default_names = _as_matrix(matrix)
    n, p = x.shape
    if not (n > p >= 1):
        raise DegenerateInput(f"PCA needs N > P >= 1, got N={n}, P={p}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInput("PCA input contains non-finite values")
    sd = x.std(axis=0)
    if np.any(sd == 0.0):
        raise DegenerateInput(f"constant column(s) {np.flatnonzero(sd == 0.0).tolist()}")
    z = (x - x.mean(axis=0)) / sd
    corr = correlation_matrix(x)

    evals, evecs = np.linalg.eigh(corr)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    evals[evals < EIGEN_ZERO_TOL * p] = 0.0

    for k in range(p):
        lead = np.argmax(np.abs(evecs[:, k]))
        if evecs[lead, k] < 0:
            evecs[:, k] = -evecs[:, k]

    scores = z @ evecs
    scores[:, evals == 0.0] = 0.0
    lambdas = evals / evals.sum()
    return PcaDecomposition(
        components=scores,
        lambdas=lambdas,
        sdevs=np.sqrt(evals),
        loadings=evecs,
        names=tuple(names) if names is not None else tuple(default_names),
    )


def weighted_sum(components, weights) -> np.ndarray:
    """Sum of ``weights[k] * components[:, k]`` skipping zero weights."""
    comps = np.asarray(components, dtype=float)
    w = np.asarray(weights, dtype=float)
    if comps.ndim != 2 or comps.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"{w.shape[0]} weights for components of shape {comps.shape}")
    h = np.zeros(comps.shape[0])
    for k in range(w.shape[0]):
        if w[k] != 0.0:
            h = h + w[k] * comps[:, k]
    return h


def external_field(decomp: PcaDecomposition, unit_ids: Sequence | None = None,
                   n_components: int | None = None) -> ExternalField:
    """Field ``h = sum_k lambda_k * pc_k``; optionally keep only the top components.

    Truncation keeps the retained lambdas as they are (no renormalization).
    """
    comps = decomp.components
    lambdas = decomp.lambdas
    if n_components is not None:
        if not 1 <= n_components <= comps.shape[1]:
            raise ValueError(f"n_components must be in [1, {comps.shape[1]}]")
        comps = comps[:, :n_components]
        lambdas = lambdas[:n_components]
    ids = tuple(unit_ids) if unit_ids is not None else tuple(range(comps.shape[0]))
    if len(ids) != comps.shape[0]:
        raise DimensionMismatch(f"{len(ids)} unit ids for {comps.shape[0]} units")
    return ExternalField(ids, weighted_sum(comps, lambdas))


def field_from_table(table: IndicatorTable, directions: dict[str, str] | None = None,
                     n_components: int | None = None):
    """Indicators -> group MPIs -> PCA -> field. Returns (names, mpi matrix, pca, field)."""
    names, indices = composite_indices(table, directions)
    decomp = pca(indices, names)
    return names, indices, decomp, external_field(decomp, table.unit_ids, n_components)
