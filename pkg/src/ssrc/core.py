"""Domain types shared across the package.

All arrays stored on the types below are made read-only at construction, so
instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

SUM_TOL = 1e-9
CLAMP_TOL = 1e-12
SYM_TOL = 1e-12
PSD_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _clamp_tiny_negatives(a):
    a = np.array(a, dtype=float)
    a[(a < 0) & (a >= -CLAMP_TOL)] = 0.0
    return a


def vectorize(X):
    """Stack the columns of ``X`` into one vector (column-major order)."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {X.shape}")
    return X.reshape(-1, order="F")


def devectorize(c, m, n):
    """Inverse of :func:`vectorize`: rebuild an ``m x n`` matrix."""
    c = np.asarray(c)
    if c.ndim != 1 or c.size != m * n:
        raise DimensionError(f"vector of length {c.size} cannot be reshaped to {m}x{n}")
    return c.reshape((m, n), order="F")


def heaviside_threshold(x, delta):
    """Return 1 where ``x`` strictly exceeds ``delta`` and 0 elsewhere."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    out = (np.asarray(x) > delta).astype(int)
    return int(out) if out.ndim == 0 else out


def project_to_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Uses the sort-and-threshold characterization: the projection is
    ``max(v - theta, 0)`` for the unique ``theta`` making it sum to one.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("expected a nonempty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_to_simplex_on_support(v, support):
    """Project ``v`` onto the simplex restricted to the boolean ``support``.

    Entries outside the support are set to zero.
    """
    v = np.asarray(v, dtype=float)
    support = np.asarray(support, dtype=bool)
    if not support.any():
        raise ValidationError("empty support")
    out = np.zeros_like(v)
    out[support] = project_to_simplex(v[support])
    return out


def random_simplex(rng, n, size=None):
    """Uniform samples from the simplex (flat Dirichlet)."""
    return rng.dirichlet(np.ones(n), size=size)


@dataclass(frozen=True)
class StochasticVector:
    entries: np.ndarray

    def __post_init__(self):
        x = _clamp_tiny_negatives(self.entries)
        if x.ndim != 1 or x.size == 0:
            raise DimensionError(f"expected a nonempty vector, got shape {x.shape}")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ValidationError("stochastic vector has negative or non-finite entries")
        if abs(x.sum() - 1.0) > SUM_TOL:
            raise ValidationError(f"stochastic vector sums to {x.sum():.17g}, not 1")
        object.__setattr__(self, "entries", _frozen(x))

    @property
    def n(self):
        return self.entries.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class StochasticMatrix:
    entries: np.ndarray

    def __post_init__(self):
        A = _clamp_tiny_negatives(self.entries)
        if A.ndim != 2:
            raise DimensionError(f"expected a matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)) or np.any(A < 0):
            raise ValidationError("stochastic matrix has negative or non-finite entries")
        bad = np.nonzero(np.abs(A.sum(axis=0) - 1.0) > SUM_TOL)[0]
        if bad.size:
            raise ValidationError(f"columns {bad.tolist()} do not sum to 1")
        object.__setattr__(self, "entries", _frozen(A))

    @property
    def shape(self):
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True)
class RelationalGraph:
    """Directed graph of permitted influences.

    Edges are 0-based ``(target, source)`` pairs: ``(j, k)`` lets agent ``k``
    influence agent ``j``.
    """

    node_count: int
    edges: frozenset
    names: tuple = ()

    def __init__(self, node_count, edges, names=None):
        node_count = int(node_count)
        if node_count < 1:
            raise ValidationError("graph needs at least one node")
        edge_list = [(int(j), int(k)) for j, k in edges]
        for j, k in edge_list:
            if not (0 <= j < node_count and 0 <= k < node_count):
                raise ValidationError(f"edge ({j}, {k}) out of range for {node_count} nodes")
        edge_set = frozenset(edge_list)
        if len(edge_set) != len(edge_list):
            raise ValidationError("duplicate edges")
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(node_count))
        names = tuple(str(s) for s in names)
        if len(names) != node_count or len(set(names)) != node_count:
            raise ValidationError("node names must be unique, one per node")
        object.__setattr__(self, "node_count", node_count)
        object.__setattr__(self, "edges", edge_set)
        object.__setattr__(self, "names", names)

    @classmethod
    def complete(cls, n, names=None):
        """Every agent may influence every agent, itself included."""
        return cls(n, [(j, k) for j in range(n) for k in range(n)], names)

    @classmethod
    def self_loops(cls, n, names=None):
        return cls(n, [(j, j) for j in range(n)], names)

    @classmethod
    def hub(cls, n, names=None):
        """Agent 0 listens to everyone; every other agent listens to itself and agent 0."""
        edges = {(0, k) for k in range(n)}
        edges |= {(j, j) for j in range(1, n)} | {(j, 0) for j in range(1, n)}
        return cls(n, sorted(edges), names)

    @classmethod
    def ring(cls, n, names=None):
        """Self-loops plus influence from the previous agent on a cycle."""
        edges = {(j, j) for j in range(n)} | {(j, (j - 1) % n) for j in range(n)}
        return cls(n, sorted(edges), names)

    def sources(self, j):
        """Sorted sources permitted to influence target ``j``."""
        return tuple(sorted(k for t, k in self.edges if t == j))

    def adjacency(self):
        A = np.zeros((self.node_count, self.node_count), dtype=bool)
        for j, k in self.edges:
            A[j, k] = True
        return A

    def sorted_edges(self):
        return sorted(self.edges)


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Observed states ``x(0..T)`` with optional per-transition regime labels.

    ``segments`` optionally tags each state with an episode id; a transition
    ``t -> t+1`` is only used when both states share a segment (this is how
    excitation restarts are represented).
    """

    states: np.ndarray
    regime_labels: Optional[tuple] = None
    column_names: tuple = ()
    segments: Optional[np.ndarray] = None
    regime_ids: Optional[np.ndarray] = field(default=None, init=False, compare=False)
    regimes: tuple = field(default=(), init=False, compare=False)

    def __post_init__(self):
        X = np.array(self.states, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] == 0:
            raise DimensionError("states must be a (T+1) x n table with n >= 1")
        n = X.shape[1]
        names = tuple(self.column_names) or tuple(f"x{i + 1}" for i in range(n))
        if len(names) != n:
            raise DimensionError(f"{len(names)} column names for {n} columns")
        object.__setattr__(self, "states", _frozen(X))
        object.__setattr__(self, "column_names", tuple(str(s) for s in names))

        if self.segments is not None:
            seg = np.array(self.segments, dtype=np.int64)
            if seg.shape != (X.shape[0],):
                raise DimensionError("segments must tag every state")
            seg.setflags(write=False)
            object.__setattr__(self, "segments", seg)

        if self.regime_labels is not None:
            labels = tuple(str(s) for s in self.regime_labels)
            if len(labels) != X.shape[0] - 1:
                raise DimensionError(
                    f"{len(labels)} regime labels for {X.shape[0] - 1} transitions"
                )
            regimes = tuple(dict.fromkeys(labels))
            lookup = {r: i for i, r in enumerate(regimes)}
            ids = np.array([lookup[s] for s in labels], dtype=np.int64)
            ids.setflags(write=False)
            object.__setattr__(self, "regime_labels", labels)
            object.__setattr__(self, "regime_ids", ids)
            object.__setattr__(self, "regimes", regimes)

    @property
    def n(self):
        return self.states.shape[1]

    @property
    def num_transitions(self):
        return self.states.shape[0] - 1

    def transition_indices(self, regime=None):
        """Indices ``t`` of usable transitions ``x(t) -> x(t+1)``."""
        T = self.num_transitions
        keep = np.ones(max(T, 0), dtype=bool)
        if self.segments is not None:
            keep &= self.segments[:-1] == self.segments[1:]
        if regime is not None:
            if self.regime_labels is None:
                raise ValidationError("series carries no regime labels")
            if regime not in self.regimes:
                return np.zeros(0, dtype=np.int64)
            keep &= self.regime_ids == self.regimes.index(regime)
        return np.nonzero(keep)[0]


@dataclass(frozen=True)
class NoiseSpec:
    process_cov: np.ndarray
    measurement_cov: np.ndarray
    seed: int = 0

    def __post_init__(self):
        for name in ("process_cov", "measurement_cov"):
            S = np.array(getattr(self, name), dtype=float)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise DimensionError(f"{name} must be square")
            if np.max(np.abs(S - S.T), initial=0.0) > SYM_TOL:
                raise ValidationError(f"{name} is not symmetric")
            if S.size and np.linalg.eigvalsh(S).min() < -PSD_TOL:
                raise ValidationError(f"{name} is not positive semidefinite")
            object.__setattr__(self, name, _frozen(S))
        if self.process_cov.shape != self.measurement_cov.shape:
            raise DimensionError("process and measurement covariances differ in size")
        if int(self.seed) < 0:
            raise ValidationError("seed must be nonnegative")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def isotropic(cls, n, process_std=0.0, measurement_std=0.0, seed=0):
        eye = np.eye(n)
        return cls(process_std**2 * eye, measurement_std**2 * eye, seed)

    @property
    def n(self):
        return self.process_cov.shape[0]


def concentration_index(states: Sequence) -> np.ndarray:
    """Largest single-agent share of each state."""
    return np.max(np.atleast_2d(np.asarray(states, dtype=float)), axis=1)
