"""Stochastic tensor embeddings and their monomial compression.

The full order-``p`` embedding of a state ``x`` stacks the Kronecker powers
``x, x⊗x, ..., x^{⊗p}`` and a trailing constant, scaled by ``1/(p+1)``. On
the simplex every Kronecker power sums to one, so the embedding is again a
probability vector. Many tensor coordinates are the same monomial
(``x1*x2`` and ``x2*x1``); the compression matrix sums each such group into a
single reduced coordinate.

Reduced coordinates are ordered by degree, then lexicographically on the
sorted variable indices, with the constant last.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, DimensionError, ValidationError

MAX_FULL_DIM = 10**7


def full_dimension(n, p):
    """Length of the full embedding: ``n + n^2 + ... + n^p + 1``."""
    if n == 1:
        return p + 1
    return n * (n**p - 1) // (n - 1) + 1


def reduced_dimension(n, p):
    """Number of distinct monomials of degree 1..p in ``n`` variables, plus one."""
    return sum(math.comb(n + d - 1, d) for d in range(1, p + 1)) + 1


def kron_power(x, d):
    """``x ⊗ x ⊗ ... ⊗ x`` (``d`` factors)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    x = np.asarray(x, dtype=float)
    out = x
    for _ in range(d - 1):
        out = np.kron(x, out)
    return out


def embed_full(x, p):
    """Full stochastic ``p``-embedding of ``x``, of length ``full_dimension(n, p)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    x = np.asarray(x, dtype=float)
    parts = [kron_power(x, d) for d in range(1, p + 1)]
    parts.append(np.ones(1))
    return np.concatenate(parts) / (p + 1)


@dataclass(frozen=True, eq=False)
class MonomialTable:
    """Bookkeeping between full tensor coordinates and reduced monomials.

    Attributes
    ----------
    n, p : int
        State dimension and embedding order.
    full_dim, reduced_dim : int
        Lengths of the full and reduced embeddings (constant included).
    monomials : tuple of tuple of int
        Sorted 0-based variable indices of each reduced monomial coordinate,
        constant excluded.
    degrees : ndarray
        Degree of each reduced coordinate; the constant has degree 0.
    multiplicities : ndarray of int
        Number of tensor coordinates collapsed into each reduced coordinate
        (1 for the constant).
    group_index : ndarray of int
        Reduced coordinate of every full coordinate.
    """

    n: int
    p: int
    full_dim: int
    reduced_dim: int
    monomials: tuple
    degrees: np.ndarray
    multiplicities: np.ndarray
    group_index: np.ndarray

    @property
    def constant_index(self):
        return self.reduced_dim - 1

    @property
    def coordinate_map(self):
        """Canonical monomial of each full coordinate, constant excluded."""
        return [self.monomials[g] for g in self.group_index[:-1]]

    def degree_slice(self, d):
        """Reduced coordinates of degree ``d``."""
        start = sum(math.comb(self.n + k - 1, k) for k in range(1, d))
        return slice(start, start + math.comb(self.n + d - 1, d))

    @cached_property
    def _index_blocks(self):
        return [
            np.array(self.monomials[self.degree_slice(d)], dtype=np.int64).reshape(-1, d)
            for d in range(1, self.p + 1)
        ]

    def monomial_vector(self, x, d):
        """Multiplicity-weighted degree-``d`` monomials of ``x`` (sums to 1 on the simplex).

        ``x`` may be a single state or a ``(T, n)`` batch.
        """
        x = np.asarray(x, dtype=float)
        idx = self._index_blocks[d - 1]
        return self.multiplicities[self.degree_slice(d)] * np.prod(x[..., idx], axis=-1)

    def labels(self, names=None):
        """Readable names of reduced coordinates, e.g. ``x1*x2`` and ``1``."""
        names = names or [f"x{i + 1}" for i in range(self.n)]
        out = ["*".join(names[i] for i in m) for m in self.monomials]
        return out + ["1"]


def build_monomial_table(n, p):
    if n < 1 or p < 1:
        raise ValidationError("n and p must be positive")
    full_dim = full_dimension(n, p)
    if full_dim > MAX_FULL_DIM:
        raise CapacityError(f"full embedding dimension {full_dim} exceeds {MAX_FULL_DIM}")

    monomials = []
    degrees = []
    multiplicities = []
    for d in range(1, p + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            monomials.append(combo)
            degrees.append(d)
            counts = np.bincount(combo, minlength=n)
            mult = math.factorial(d)
            for c in counts:
                mult //= math.factorial(int(c))
            multiplicities.append(mult)
    lookup = {m: i for i, m in enumerate(monomials)}

    group = np.empty(full_dim, dtype=np.int64)
    pos = 0
    for d in range(1, p + 1):
        # np.kron ordering: first factor varies slowest, like itertools.product
        idx = np.array(list(itertools.product(range(n), repeat=d)), dtype=np.int64)
        idx.sort(axis=1)
        for row in idx:
            group[pos] = lookup[tuple(row.tolist())]
            pos += 1
    group[pos] = len(monomials)

    degrees.append(0)
    multiplicities.append(1)
    deg = np.array(degrees, dtype=np.int64)
    mult = np.array(multiplicities, dtype=np.int64)
    for a in (deg, mult, group):
        a.setflags(write=False)
    return MonomialTable(
        n=n,
        p=p,
        full_dim=full_dim,
        reduced_dim=len(monomials) + 1,
        monomials=tuple(monomials),
        degrees=deg,
        multiplicities=mult,
        group_index=group,
    )


@dataclass(frozen=True, eq=False)
class CompressionMatrix:
    """Sparse 0/1 matrix summing duplicate tensor coordinates."""

    table: MonomialTable
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def nnz(self):
        return self.matrix.nnz

    def __matmul__(self, v):
        return self.matrix @ v

    def toarray(self):
        return self.matrix.toarray()


def build_compression(table):
    cols = np.arange(table.full_dim)
    data = np.ones(table.full_dim)
    R = sp.csr_matrix(
        (data, (table.group_index, cols)), shape=(table.reduced_dim, table.full_dim)
    )
    return CompressionMatrix(table=table, matrix=R)


def embed_reduced(x, table):
    """Reduced embedding computed straight from distinct monomials.

    Accepts a single state of length ``n`` or a ``(T, n)`` batch and returns
    ``(reduced_dim,)`` or ``(T, reduced_dim)`` respectively.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != table.n:
        raise DimensionError(f"state has {x.shape[-1]} entries, table expects {table.n}")
    parts = [table.monomial_vector(x, d) for d in range(1, table.p + 1)]
    parts.append(np.ones(x.shape[:-1] + (1,)))
    return np.concatenate(parts, axis=-1) / (table.p + 1)
