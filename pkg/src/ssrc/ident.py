"""Graph-constrained identification of column-stochastic coupling matrices.

A coupling matrix ``W`` maps the reduced embedding of ``x(t)`` to ``x(t+1)``.
Its admissible entries come from the relational graph: target ``j`` may read
reduced coordinate ``m`` when every variable of monomial ``m`` is a permitted
source of ``j``; the constant coordinate is open to every target. ``W`` is
written as a nonnegative combination of single-entry basis matrices, the
weights are fitted through the Gram normal equations stacked with soft
column-sum rows, and each column is finally projected onto the simplex over
its admissible rows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    SUM_TOL,
    RelationalGraph,
    TimeSeriesFrame,
    project_to_simplex_on_support,
    vectorize,
)
from .embedding import MonomialTable, build_monomial_table, embed_reduced
from .errors import (
    CapacityError,
    DimensionError,
    EmptyDictionaryError,
    InsufficientDataError,
    StructureError,
    ValidationError,
)
from .slrsolver import SolverConfig, solve

MAX_DICTIONARY_SIZE = 50_000
DEFAULT_CONSTRAINT_WEIGHT = 1e3
DEFAULT_REGIME = "default"


@dataclass(frozen=True, eq=False)
class StructuredDictionary:
    """Admissible single-entry basis of the coupling matrix.

    Each basis element ``S_k`` has a one at ``(rows[k], cols[k])``; rows are
    targets and columns are reduced-embedding coordinates.
    """

    rows: np.ndarray
    cols: np.ndarray
    graph: RelationalGraph
    table: MonomialTable

    @property
    def size(self):
        return int(self.rows.size)

    @property
    def shape(self):
        return (self.table.n, self.table.reduced_dim)

    def pattern(self):
        """Boolean mask of admissible entries of ``W``."""
        P = np.zeros(self.shape, dtype=bool)
        P[self.rows, self.cols] = True
        return P

    def element(self, k):
        S = np.zeros(self.shape)
        S[self.rows[k], self.cols[k]] = 1.0
        return S

    def combine(self, a):
        """``sum_k a[k] S_k``."""
        W = np.zeros(self.shape)
        np.add.at(W, (self.rows, self.cols), np.asarray(a, dtype=float))
        return W

    def weights_of(self, W):
        """Coefficients of ``W`` in this basis (entries outside the pattern are ignored)."""
        return np.asarray(W, dtype=float)[self.rows, self.cols]


def build_dictionary(graph, table):
    if graph.node_count != table.n:
        raise DimensionError(f"graph has {graph.node_count} nodes, embedding expects {table.n}")
    if not graph.edges:
        raise EmptyDictionaryError("relational graph has no edges")
    adj = graph.adjacency()
    rows, cols = [], []
    for j in range(table.n):
        for m, mono in enumerate(table.monomials):
            if all(adj[j, i] for i in mono):
                rows.append(j)
                cols.append(m)
        rows.append(j)
        cols.append(table.constant_index)
    if len(rows) > MAX_DICTIONARY_SIZE:
        raise CapacityError(f"dictionary size {len(rows)} exceeds {MAX_DICTIONARY_SIZE}")
    r = np.array(rows, dtype=np.int64)
    c = np.array(cols, dtype=np.int64)
    r.setflags(write=False)
    c.setflags(write=False)
    return StructuredDictionary(rows=r, cols=c, graph=graph, table=table)


def full_rows(graph):
    """Targets that listen to every agent.

    On the simplex the embedded coordinates satisfy linear identities (the
    constant equals the sum of the linear terms, and so on), so a row that may
    read every monomial is only determined up to those identities. Column sums
    pin down at most one such row; with two or more the coupling matrix is not
    identifiable from data, even noise-free.
    """
    adj = graph.adjacency()
    return tuple(int(j) for j in np.nonzero(adj.all(axis=1))[0])


def is_identifiable(graph):
    return len(full_rows(graph)) <= 1


def build_data_matrices(series, table, transitions=None):
    """Embedded inputs (``rho x T``) and shifted outputs (``n x T``).

    ``transitions`` selects which ``t -> t+1`` pairs to use; by default every
    usable transition of the series.
    """
    if series.n != table.n:
        raise DimensionError(f"series has {series.n} columns, embedding expects {table.n}")
    if series.states.shape[0] < 2:
        raise InsufficientDataError("need at least two states")
    if transitions is None:
        transitions = series.transition_indices()
    t = np.asarray(transitions, dtype=np.int64)
    if t.size == 0:
        raise InsufficientDataError("no usable transitions")
    X = series.states
    return embed_reduced(X[t], table).T, X[t + 1].T.copy()


def design_matrix(dictionary, X0, X1):
    """Explicit ``G`` with columns ``vec(S_k X0)`` and target ``vec(X1)``.

    Mostly useful for checking; :func:`assemble_constrained_system` forms
    ``G^T G`` without materializing ``G``.
    """
    n = dictionary.table.n
    T = X0.shape[1]
    G = np.zeros((n * T, dictionary.size))
    for k in range(dictionary.size):
        SX = np.zeros((n, T))
        SX[dictionary.rows[k]] = X0[dictionary.cols[k]]
        G[:, k] = vectorize(SX)
    return G, vectorize(X1)


def constraint_matrix(dictionary):
    """``C[m, k] = 1`` when basis element ``k`` sits in column ``m`` of ``W``."""
    C = np.zeros((dictionary.table.reduced_dim, dictionary.size))
    C[dictionary.cols, np.arange(dictionary.size)] = 1.0
    return C


def assemble_constrained_system(dictionary, X0, X1, constraint_weight=DEFAULT_CONSTRAINT_WEIGHT):
    """Stack the Gram normal equations on top of weighted column-sum rows.

    Returns ``M`` of shape ``(q + rho, q)`` and ``b`` of length ``q + rho``.
    """
    X0 = np.asarray(X0, dtype=float)
    X1 = np.asarray(X1, dtype=float)
    n, rho = dictionary.shape
    if X0.shape[0] != rho or X1.shape[0] != n or X0.shape[1] != X1.shape[1]:
        raise DimensionError(f"data shapes {X0.shape} and {X1.shape} do not fit W of shape {(n, rho)}")
    if constraint_weight < 0:
        raise ValidationError("constraint weight must be nonnegative")
    rows, cols = dictionary.rows, dictionary.cols
    # (G^T G)[k, l] = [row_k == row_l] * (X0 X0^T)[col_k, col_l]
    gram = (X0 @ X0.T)[np.ix_(cols, cols)] * (rows[:, None] == rows[None, :])
    rhs = (X0 @ X1.T)[cols, rows]
    C = constraint_matrix(dictionary)
    M = np.vstack([gram, constraint_weight * C])
    b = np.concatenate([rhs, np.full(rho, float(constraint_weight))])
    return M, b


@dataclass(frozen=True, eq=False)
class CouplingModel:
    """Identified coupling for one regime.

    ``W_hat`` is ``n x reduced_dim``, column-stochastic and supported on the
    dictionary pattern of ``graph``.
    """

    order: int
    table: MonomialTable
    weights: np.ndarray
    W_hat: np.ndarray
    graph: RelationalGraph
    regime_id: str = DEFAULT_REGIME
    residual_cov: Optional[np.ndarray] = None
    fit_rmse: float = 0.0
    dictionary: StructuredDictionary = field(default=None, repr=False)

    def __post_init__(self):
        if self.table.p != self.order or self.table.n != self.graph.node_count:
            raise DimensionError("order, embedding and graph disagree")
        W = np.array(self.W_hat, dtype=float)
        if W.shape != (self.table.n, self.table.reduced_dim):
            raise DimensionError(f"W_hat has shape {W.shape}")
        d = self.dictionary or build_dictionary(self.graph, self.table)
        if np.any(W[~d.pattern()] != 0):
            raise StructureError("W_hat has entries outside the graph pattern")
        if np.any(W < 0):
            raise ValidationError("W_hat has negative entries")
        bad = np.nonzero(np.abs(W.sum(axis=0) - 1.0) > SUM_TOL)[0]
        if bad.size:
            raise ValidationError(f"W_hat columns {bad.tolist()} are not stochastic")
        a = np.array(self.weights, dtype=float)
        if a.shape != (d.size,):
            raise DimensionError("weights do not match the dictionary")
        n = self.table.n
        cov = np.zeros((n, n)) if self.residual_cov is None else np.array(self.residual_cov, dtype=float)
        if cov.shape != (n, n):
            raise DimensionError("residual covariance has the wrong shape")
        for arr in (W, a, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "W_hat", W)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "residual_cov", cov)
        object.__setattr__(self, "dictionary", d)
        object.__setattr__(self, "regime_id", str(self.regime_id))
        object.__setattr__(self, "fit_rmse", float(self.fit_rmse))

    @property
    def n(self):
        return self.table.n

    def predict(self, x):
        """One noise-free step for a state or a ``(T, n)`` batch."""
        return embed_reduced(x, self.table) @ self.W_hat.T

    def adjacency(self):
        """Agent-level weights: ``A[j, i]`` sums the entries of row ``j`` over monomials containing ``i``."""
        A = np.zeros((self.n, self.n))
        for m, mono in enumerate(self.table.monomials):
            for i in set(mono):
                A[:, i] += self.W_hat[:, m]
        return A

    @classmethod
    def from_matrix(cls, W, graph, order, regime_id=DEFAULT_REGIME, **kwargs):
        table = build_monomial_table(graph.node_count, order)
        d = build_dictionary(graph, table)
        return cls(order=order, table=table, weights=d.weights_of(W), W_hat=W,
                   graph=graph, regime_id=regime_id, dictionary=d, **kwargs)


def project_columns(W, dictionary):
    """Project every column of ``W`` onto the simplex over its admissible rows."""
    P = dictionary.pattern()
    out = np.zeros_like(W, dtype=float)
    for m in range(W.shape[1]):
        if not P[:, m].any():
            mono = dictionary.table.labels(list(dictionary.graph.names))[m]
            raise StructureError(
                f"no target may read coordinate {mono}; its column cannot be stochastic"
            )
        out[:, m] = project_to_simplex_on_support(W[:, m], P[:, m])
    return out


def _fit(series, dictionary, transitions, solver_cfg, constraint_weight, regime_id):
    table = dictionary.table
    X0, X1 = build_data_matrices(series, table, transitions)
    T = X0.shape[1]
    # normalize so the Gram block is an average over transitions
    scale = 1.0 / np.sqrt(T)
    M, b = assemble_constrained_system(dictionary, X0 * scale, X1 * scale, constraint_weight)
    result = solve(M, b, solver_cfg)
    W = project_columns(dictionary.combine(result.x), dictionary)
    residuals = X1 - W @ X0
    cov = np.cov(residuals, ddof=1) if T >= 2 else np.zeros((table.n, table.n))
    cov = np.atleast_2d(cov)
    return CouplingModel(
        order=table.p,
        table=table,
        weights=dictionary.weights_of(W),
        W_hat=W,
        graph=dictionary.graph,
        regime_id=regime_id,
        residual_cov=cov,
        fit_rmse=float(np.sqrt(np.mean(residuals**2))),
        dictionary=dictionary,
    )


def identify(series, graph, p, solver_cfg=None, constraint_weight=DEFAULT_CONSTRAINT_WEIGHT,
             max_workers=None):
    """Identify one coupling model per regime.

    Returns a dict keyed by regime label; unlabeled series yield a single
    entry under ``"default"``.
    """
    if not isinstance(series, TimeSeriesFrame):
        raise ValidationError("series must be a TimeSeriesFrame")
    if series.states.shape[0] < 2:
        raise InsufficientDataError("need at least two states")
    solver_cfg = solver_cfg or SolverConfig()
    table = build_monomial_table(series.n, p)
    dictionary = build_dictionary(graph, table)

    if series.regime_labels is None:
        jobs = [(DEFAULT_REGIME, series.transition_indices())]
    else:
        jobs = [(r, series.transition_indices(r)) for r in series.regimes]
    for regime, t in jobs:
        if t.size < 2:
            raise InsufficientDataError(f"regime {regime!r} has {t.size} usable transitions, need 2")

    def run(job):
        regime, t = job
        return _fit(series, dictionary, t, solver_cfg, constraint_weight, regime)

    if max_workers and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            models = list(pool.map(run, jobs))
    else:
        models = [run(job) for job in jobs]
    return {m.regime_id: m for m in models}


@dataclass(frozen=True)
class ClosedLoopBlocks:
    """Degree blocks of a coupling matrix.

    ``W_hat @ embed_reduced(x)`` equals
    ``(sum_d blocks[d-1] @ m_d(x) + constant) / (p + 1)`` where ``m_d`` are the
    multiplicity-weighted degree-``d`` monomials.
    """

    blocks: tuple
    constant: np.ndarray
    table: MonomialTable

    def evaluate(self, x):
        t = self.table
        acc = self.constant.copy() if np.ndim(x) == 1 else np.tile(self.constant, (len(x), 1))
        for d, Wd in enumerate(self.blocks, start=1):
            acc = acc + t.monomial_vector(x, d) @ Wd.T
        return acc / (t.p + 1)


def closed_loop_decompose(model):
    t = model.table
    blocks = tuple(model.W_hat[:, t.degree_slice(d)].copy() for d in range(1, t.p + 1))
    return ClosedLoopBlocks(blocks=blocks, constant=model.W_hat[:, t.constant_index].copy(), table=t)
