"""Similarity graph over territorial units and spectral diagnostics of J."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, IndexOutOfRange, InvalidAttribute, TooLarge

ATTRIBUTE_FIELDS = ("altitude", "population_class", "surface_class", "coastal", "urbanization")
# CSV column names for the same fields
ATTRIBUTE_COLUMNS = ("ALT", "POP", "SUP", "CLITO", "DEGURB")
ATTRIBUTE_DOMAINS = {
    "altitude": (1, 2, 3),
    "population_class": (1, 2, 3),
    "surface_class": (1, 2, 3),
    "coastal": (0, 1),
    "urbanization": (1, 2, 3),
}

DENSE_CAP = 5000
SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class AttributeProfile:
    altitude: int
    population_class: int
    surface_class: int
    coastal: int
    urbanization: int

    def validate(self, unit=None) -> "AttributeProfile":
        for name in ATTRIBUTE_FIELDS:
            value = getattr(self, name)
            if value not in ATTRIBUTE_DOMAINS[name] or isinstance(value, bool):
                raise InvalidAttribute(unit, name, value)
        return self

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in ATTRIBUTE_FIELDS)


@dataclass(frozen=True, eq=False)
class InteractionGraph:
    """Symmetric weighted adjacency stored once per unordered pair (i < j)."""

    n: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        w = np.asarray(self.weights, dtype=float)
        if not (rows.shape == cols.shape == w.shape) or rows.ndim != 1:
            raise DimensionMismatch("edge arrays must be 1-D and of equal length")
        if rows.size:
            if np.any(rows >= cols):
                raise ValueError("edges must satisfy i < j (no self-loops, stored once)")
            if rows.min() < 0 or cols.max() >= self.n:
                raise IndexOutOfRange("edge endpoint outside [0, n)")
            if np.any(w < 0):
                raise ValueError("edge weights must be non-negative")
            if np.unique(rows * self.n + cols).size != rows.size:
                raise ValueError("duplicate edge")
        for a in (rows, cols, w):
            a.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple]) -> "InteractionGraph":
        if not edges:
            return cls.empty(n)
        canon = {}
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if i == j:
                raise ValueError(f"self-loop at {i}")
            canon[(min(i, j), max(i, j))] = w
        keys = sorted(canon)
        return cls(n, [k[0] for k in keys], [k[1] for k in keys], [canon[k] for k in keys])

    @classmethod
    def from_dense(cls, matrix) -> "InteractionGraph":
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("adjacency must be square")
        if not np.allclose(a, a.T):
            raise ValueError("adjacency must be symmetric")
        i, j = np.nonzero(np.triu(a, k=1))
        return cls(a.shape[0], i, j, a[i, j])

    @classmethod
    def empty(cls, n: int) -> "InteractionGraph":
        return cls(n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))

    @property
    def n_edges(self) -> int:
        return int(self.rows.size)

    def edges(self):
        return zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist())

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Full symmetric J in CSR form (both triangles)."""
        r = np.concatenate([self.rows, self.cols])
        c = np.concatenate([self.cols, self.rows])
        w = np.concatenate([self.weights, self.weights])
        m = sp.csr_matrix((w, (r, c)), shape=(self.n, self.n))
        m.sort_indices()
        return m

    def csr_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.matrix
        return (m.indptr.astype(np.int64), m.indices.astype(np.int64),
                m.data.astype(np.float64))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def degrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def summary(self) -> dict:
        n_comp, _ = connected_components(self.matrix, directed=False) if self.n else (0, None)
        hist = Counter(self.degrees().tolist())
        return {
            "n": int(self.n),
            "edge_count": self.n_edges,
            "component_count": int(n_comp),
            "degree_histogram": {str(k): hist[k] for k in sorted(hist)},
        }


def build_graph(profiles: Sequence[AttributeProfile], min_match: int = 5,
                unit_ids: Sequence | None = None) -> InteractionGraph:
    """Connect units whose territorial profiles agree on ``min_match`` attributes.

    With the default (all five) the result is a disjoint union of cliques,
    one per distinct profile; units with a unique profile stay isolated.
    """
    n = len(profiles)
    ids = list(unit_ids) if unit_ids is not None else list(range(n))
    for uid, prof in zip(ids, profiles):
        prof.validate(uid)
    if not 1 <= min_match <= len(ATTRIBUTE_FIELDS):
        raise ValueError(f"min_match must be in [1, {len(ATTRIBUTE_FIELDS)}]")
    if n == 0:
        return InteractionGraph.empty(0)

    codes = np.array([p.as_tuple() for p in profiles], dtype=np.int64)
    if min_match == len(ATTRIBUTE_FIELDS):
        _, labels = np.unique(codes, axis=0, return_inverse=True)
        labels = labels.ravel()
        rows, cols = [], []
        for lab in np.unique(labels):
            members = np.flatnonzero(labels == lab)
            if members.size > 1:
                iu, ju = np.triu_indices(members.size, k=1)
                rows.append(members[iu])
                cols.append(members[ju])
        if not rows:
            return InteractionGraph.empty(n)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        order = np.lexsort((c, r))
        return InteractionGraph(n, r[order], c[order], np.ones(r.size))

    rows, cols = [], []
    for i in range(n - 1):
        agree = (codes[i + 1:] == codes[i]).sum(axis=1)
        js = np.flatnonzero(agree >= min_match) + i + 1
        rows.append(np.full(js.size, i))
        cols.append(js)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return InteractionGraph(n, r, c, np.ones(r.size))


def neighbor_sum(graph: InteractionGraph, config, i: int) -> float:
    """Local field from the neighbours: sum_j J_ij s_j."""
    if not 0 <= i < graph.n:
        raise IndexOutOfRange(f"unit index {i} outside [0, {graph.n})")
    s = np.asarray(config, dtype=float)
    if s.shape != (graph.n,):
        raise DimensionMismatch(f"configuration of length {s.size} for graph of {graph.n} units")
    m = graph.matrix
    lo, hi = m.indptr[i], m.indptr[i + 1]
    return float(np.dot(m.data[lo:hi], s[m.indices[lo:hi]]))


def spectrum_summary(graph: InteractionGraph, cap: int = DENSE_CAP, tol: float = SPECTRUM_TOL) -> dict:
    """Extreme eigenvalues of J and whether the quadratic form is indefinite.

    Also reports the sign of det(J) and log10|det(J)| since the raw
    determinant overflows quickly for large graphs.
    """
    if graph.n < 1:
        raise ValueError("spectrum of an empty roster is undefined")
    if graph.n > cap:
        raise TooLarge(graph.n, cap)
    evals = np.linalg.eigvalsh(graph.dense())
    lo, hi = float(evals[0]), float(evals[-1])
    sign, logabs = np.linalg.slogdet(graph.dense())
    return {
        "min_eigenvalue": lo,
        "max_eigenvalue": hi,
        "indefinite": bool(lo < -tol and hi > tol),
        "n_negative": int(np.sum(evals < -tol)),
        "n_positive": int(np.sum(evals > tol)),
        "det_sign": int(sign),
        "log10_abs_det": float(logabs / np.log(10)) if sign != 0 else None,
    }
