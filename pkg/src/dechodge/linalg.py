"""Rank decisions, nullspaces, least-norm solves and mass-weighted bases.

Every dimension claimed elsewhere in the package is an integer produced by
:func:`rank_nullspace` or :func:`range_basis`, so both refuse to answer when
the singular spectrum has no clear gap at the requested tolerance.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AmbiguousRank, Inconsistent

RANK_TOL = 1e-9
GAP_MIN = 10.0
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class RankDecision:
    rank: int
    singular_values: np.ndarray
    tol: float
    gap_ratio: float

    @property
    def ambiguous(self):
        return self.gap_ratio < GAP_MIN

    def to_dict(self):
        return {
            "rank": self.rank,
            "tol": self.tol,
            "gap_ratio": None if np.isinf(self.gap_ratio) else float(self.gap_ratio),
            "largest": float(self.singular_values[0]) if len(self.singular_values) else 0.0,
        }


def _tol(tol):
    return RANK_TOL if tol is None else tol


def _dense(A):
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _decide(s, tol):
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return RankDecision(0, s, tol, np.inf)
    rank = int(np.sum(s > tol * smax))
    if rank == len(s):
        gap = np.inf
    else:
        dropped = s[rank]
        gap = np.inf if dropped == 0.0 else s[rank - 1] / dropped
    return RankDecision(rank, s, tol, gap)


def _check(decision, strict, what):
    if strict and decision.ambiguous:
        raise AmbiguousRank(
            f"{what}: singular-value gap {decision.gap_ratio:.3g} < {GAP_MIN} "
            f"at rank {decision.rank} (tol {decision.tol:g})",
            decision,
        )


def rank_nullspace(A, tol=None, strict=True):
    """Rank and orthonormal nullspace basis of ``A`` (columns of the result).

    ``tol`` is relative to the largest singular value.  With ``strict`` an
    :class:`AmbiguousRank` is raised when the kept/dropped gap is below 10.
    """
    A = _dense(A)
    tol = _tol(tol)
    m, n = A.shape
    if m == 0 or n == 0:
        return RankDecision(0, np.zeros(0), tol, np.inf), np.eye(n)
    _, s, vt = np.linalg.svd(A, full_matrices=m < n)
    decision = _decide(s, tol)
    _check(decision, strict, "rank_nullspace")
    return decision, vt[decision.rank:].T.copy()


def rank(A, tol=None, strict=True):
    A = _dense(A)
    tol = _tol(tol)
    if A.size == 0:
        return RankDecision(0, np.zeros(0), tol, np.inf)
    s = np.linalg.svd(A, compute_uv=False)
    decision = _decide(s, tol)
    _check(decision, strict, "rank")
    return decision


def range_basis(A, tol=None, strict=True):
    """Orthonormal basis (columns) of the column space of ``A``."""
    A = _dense(A)
    tol = _tol(tol)
    m, n = A.shape
    if m == 0 or n == 0:
        return RankDecision(0, np.zeros(0), tol, np.inf), np.zeros((m, 0))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    decision = _decide(s, tol)
    _check(decision, strict, "range_basis")
    return decision, u[:, : decision.rank].copy()


def operator_norm(A):
    """Frobenius norm, used as a cheap upper bound for the spectral norm."""
    if sp.issparse(A):
        return float(spla.norm(A))
    return float(np.linalg.norm(A))


def least_norm_solve(A, b, tol=1e-8):
    """Minimum-Euclidean-norm solution of ``A x = b``.

    Dense complete orthogonal factorization (LAPACK ``gelsy``) below
    ``DENSE_LIMIT`` columns, LSMR above.  Raises :class:`Inconsistent` when
    ``||Ax - b|| > tol * (||A|| ||x|| + ||b||)``.
    """
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if n == 0:
        x = np.zeros(0)
    elif not np.any(b):
        x = np.zeros(n)
    elif n <= DENSE_LIMIT:
        x = sla.lstsq(_dense(A), b, cond=1e-13, lapack_driver="gelsy")[0]
    else:
        x = spla.lsmr(sp.csr_matrix(A), b, atol=1e-15, btol=1e-15, maxiter=20 * n)[0]
    resid = float(np.linalg.norm(A @ x - b))
    bound = tol * (operator_norm(A) * np.linalg.norm(x) + np.linalg.norm(b))
    if resid > bound:
        raise Inconsistent(f"least-norm residual {resid:.3e} exceeds {bound:.3e}")
    return x


def m_orthonormalize(V, weights, tol=1e-10):
    """Orthonormal basis of span(V) in the inner product ``<x, y> = x^T diag(w) y``.

    Linearly dependent columns are dropped; returns ``(basis, n_dropped)``.
    """
    V = _dense(V)
    w = np.sqrt(np.asarray(weights, dtype=float))
    if V.shape[1] == 0:
        return np.zeros((V.shape[0], 0)), 0
    decision, Q = range_basis(w[:, None] * V, tol=tol, strict=False)
    return Q / w[:, None], V.shape[1] - decision.rank


def m_gram(U, V, weights):
    return U.T @ (np.asarray(weights)[:, None] * V)


def intersect_subspaces(U, V, weights, tol=1e-6, strict=True):
    """Basis of the numerical intersection of two M-orthonormal column spans.

    A direction is shared when its principal-angle cosine is at least
    ``1 - tol``.  Returns ``(basis, cosines)``.
    """
    U = _dense(U) if np.size(U) else np.zeros((len(weights), 0))
    V = _dense(V) if np.size(V) else np.zeros((len(weights), 0))
    if U.shape[1] == 0 or V.shape[1] == 0:
        return np.zeros((len(weights), 0)), np.zeros(0)
    left, cos, _ = np.linalg.svd(m_gram(U, V, weights))
    cos = np.clip(cos, 0.0, 1.0)
    keep = int(np.sum(cos >= 1.0 - tol))
    if strict and keep < len(cos) and 1.0 - cos[keep] <= GAP_MIN * tol:
        raise AmbiguousRank(f"principal angle cosine {cos[keep]:.12f} too close to threshold")
    return U @ left[:, :keep], cos
