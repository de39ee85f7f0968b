"""Sparse nonnegative least squares with truncated-SVD preconditioning.

The solver projects the system onto its dominant left singular subspace,
starts from the truncated pseudoinverse solution, and then alternates between
ranking coefficients by magnitude and re-solving a nonnegative least-squares
problem restricted to the coefficients above threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import heaviside_threshold
from .errors import DimensionError, RankZeroError, ValidationError


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the sparse solver.

    delta
        Stop once successive iterates differ by at most this much (max norm).
    epsilon
        Threshold applied both to singular values and to coefficient magnitudes.
    max_iters
        Upper bound on support-refinement passes.
    """

    delta: float = 1e-10
    epsilon: float = 1e-10
    max_iters: int = 50

    def __post_init__(self):
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if int(self.max_iters) < 1 or int(self.max_iters) != self.max_iters:
            raise ValidationError("max_iters must be a positive integer")


@dataclass(frozen=True)
class SolverResult:
    x: np.ndarray
    iterations: int
    final_change: float
    support_size: int
    truncation_rank: int
    kkt_residuals: tuple = ()


def kkt_residual(A, y, c):
    """Largest violation of the NNLS optimality conditions at ``c``.

    Covers primal feasibility ``c >= 0``, dual feasibility ``g >= 0`` and
    complementarity ``g * c = 0`` with ``g = A^T (A c - y)``.
    """
    A = np.asarray(A, dtype=float)
    c = np.asarray(c, dtype=float)
    g = A.T @ (A @ c - np.asarray(y, dtype=float))
    return float(max(np.max(-c, initial=0.0), np.max(-g, initial=0.0),
                     np.max(np.abs(g * c), initial=0.0)))


def nnls_restricted(A, y, tol=None, max_iter=None):
    """Lawson-Hanson active-set solution of ``min ||A c - y||`` over ``c >= 0``."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DimensionError(f"incompatible shapes {A.shape} and {y.shape}")
    m, k = A.shape
    if k < 1:
        raise DimensionError("need at least one column")
    if tol is None:
        # gradients of weak directions scale with sigma^2, so any roundoff-sized
        # threshold would stop early on Gram-form systems
        tol = 0.0
    if max_iter is None:
        max_iter = 5 * k + 10

    x = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    skip = np.zeros(k, dtype=bool)
    w = _dual(A, y, x, passive)
    it = 0
    while it < max_iter:
        cand = np.where(passive | skip, -np.inf, w)
        j = int(np.argmax(cand))
        if cand[j] <= tol:
            break
        passive[j] = True
        s = _passive_lstsq(A, y, passive)
        if s[j] <= 0:
            # rounding kept the entering column from growing; bar it until x moves
            passive[j] = False
            skip[j] = True
            continue
        while np.any(s[passive] <= 0) and it < max_iter:
            it += 1
            blocked = np.nonzero(passive & (s <= 0))[0]
            ratios = x[blocked] / (x[blocked] - s[blocked])
            x = x + ratios.min() * (s - x)
            passive[blocked[np.argmin(ratios)]] = False
            passive &= x > 0
            x[~passive] = 0.0
            s = _passive_lstsq(A, y, passive)
        x = s
        skip[:] = False
        it += 1
        w = _dual(A, y, x, passive)
    return np.maximum(x, 0.0)


def _dual(A, y, x, passive):
    """``A^T (y - A x)`` evaluated on columns orthogonalized against the passive set.

    Equal to the plain gradient in exact arithmetic, but the large in-span part
    of each column no longer multiplies the rounding error of the residual, so
    the sign survives for nearly dependent columns.
    """
    r = y - A[:, passive] @ x[passive]
    if not passive.any():
        return A.T @ r
    Q, _ = np.linalg.qr(A[:, passive])
    A_perp = A - Q @ (Q.T @ A)
    r = r - Q @ (Q.T @ r)
    return A_perp.T @ r


def _passive_lstsq(A, y, passive):
    s = np.zeros(A.shape[1])
    if passive.any():
        s[passive] = np.linalg.lstsq(A[:, passive], y, rcond=None)[0]
    return s


def truncated_svd_init(A, y, epsilon):
    """Project onto the singular subspace above ``epsilon``.

    Returns ``(A_hat, y_hat, x0, r)`` where ``A_hat = U_r^T A``,
    ``y_hat = U_r^T y`` and ``x0`` is the rank-``r`` pseudoinverse solution.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DimensionError(f"incompatible shapes {A.shape} and {y.shape}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(heaviside_threshold(s, epsilon)))
    if r == 0:
        raise RankZeroError(f"no singular value exceeds epsilon={epsilon:g}")
    Ur = U[:, :r]
    A_hat = Ur.T @ A
    y_hat = Ur.T @ y
    x0 = Vt[:r].T @ (y_hat / s[:r])
    return A_hat, y_hat, x0, r


def _ranked_support(c, epsilon):
    mags = np.abs(c)
    order = np.argsort(-mags, kind="stable")
    n0 = max(int(np.sum(heaviside_threshold(mags, epsilon))), 1)
    return order, n0


def solve(A, y, cfg=None, initial=None):
    """Sparse nonnegative solution of ``A x ≈ y``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    y : array_like, shape (m,)
    cfg : SolverConfig, optional
    initial : array_like, shape (n,), optional
        Warm start replacing the pseudoinverse initial guess; its support
        seeds the first restricted solve.

    Returns
    -------
    SolverResult
    """
    cfg = cfg or SolverConfig()
    A_hat, y_hat, x0, r = truncated_svd_init(A, y, cfg.epsilon)
    n = A_hat.shape[1]
    if initial is not None:
        x0 = np.array(initial, dtype=float)
        if x0.shape != (n,):
            raise DimensionError("initial guess has the wrong length")

    order, n0 = _ranked_support(x0, cfg.epsilon)
    x = x0
    error = 1.0 + cfg.delta
    K = 1
    kkt = []
    support_size = n0
    while K <= cfg.max_iters and error > cfg.delta:
        cols = order[:n0]
        A0 = A_hat[:, cols]
        c = nnls_restricted(A0, y_hat)
        kkt.append(kkt_residual(A0, y_hat, c))
        x = np.zeros(n)
        x[cols] = c
        error = float(np.max(np.abs(x - x0)))
        x0 = x
        support_size = n0
        order, n0 = _ranked_support(x, cfg.epsilon)
        K += 1
    return SolverResult(
        x=x,
        iterations=K - 1,
        final_change=error,
        support_size=support_size,
        truncation_rank=r,
        kkt_residuals=tuple(kkt),
    )
