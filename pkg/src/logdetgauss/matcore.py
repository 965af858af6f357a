"""Positive-definite and block-matrix primitives.

Everything here is a pure function of dense real symmetric ``numpy`` arrays.
Block structure is carried by :class:`PartitionedMatrix`, which keeps the
user-given label order; nothing is ever reordered internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla

SYM_TOL = 1e-12
PD_TOL = 1e-10
JITTER = 1e-12
RANK_TOL = 1e-8


class MathDomainError(ValueError):
    """Input lies outside the mathematical domain of an operation."""


class NotPositiveDefiniteError(MathDomainError):
    pass


# ---------------------------------------------------------------------------
# symmetric matrices
# ---------------------------------------------------------------------------

def as_symmetric(M, tol: float = SYM_TOL) -> np.ndarray:
    """Return ``M`` as a float symmetric array, symmetrizing roundoff.

    Raises ``ValueError`` if ``M`` is not square or the asymmetry exceeds
    ``tol * (1 + max|M_ij|)``.
    """
    M = np.array(M, dtype=float, ndmin=2)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = 1.0 + (np.abs(M).max() if M.size else 0.0)
    if M.size and np.abs(M - M.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def pd_margin(M) -> float:
    """Smallest eigenvalue of the symmetric part of ``M``."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _pd_threshold(M: np.ndarray) -> float:
    return -PD_TOL * (1.0 + np.linalg.norm(M, 2))


def is_pd(M) -> bool:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return True
    return pd_margin(M) > _pd_threshold(M)


def require_pd(M, what: str = "matrix") -> np.ndarray:
    """Validate positive definiteness (within ``PD_TOL``) and return ``M``.

    Matrices whose smallest eigenvalue is a tiny negative inside the
    tolerance band are lifted to a diagonal floor of ``JITTER``.
    """
    M = as_symmetric(M)
    if M.size == 0:
        return M
    lam = pd_margin(M)
    if lam <= _pd_threshold(M):
        raise NotPositiveDefiniteError(
            f"{what} is not positive definite (min eigenvalue {lam:.3e})")
    if lam < JITTER:
        M = M + (JITTER - lam) * np.eye(M.shape[0])
    return M


def logdet(V) -> float:
    """``ln det V`` from the Cholesky pivots.

    Raises :class:`NotPositiveDefiniteError` when ``V`` is not PD.
    """
    V = as_symmetric(V)
    if V.size == 0:
        return 0.0
    try:
        L = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        L = np.linalg.cholesky(require_pd(V))
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def sym_function(M, f, floor: float | None = JITTER) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through ``eigh``.

    Eigenvalues are clamped below at ``floor`` first (skip with ``None``).
    """
    w, U = np.linalg.eigh(as_symmetric(M))
    if floor is not None:
        w = np.maximum(w, floor)
    R = (U * f(w)) @ U.T
    return 0.5 * (R + R.T)


def sqrtm(M) -> np.ndarray:
    return sym_function(M, np.sqrt)


def invsqrtm(M) -> np.ndarray:
    return sym_function(M, lambda w: 1.0 / np.sqrt(w))


def powm(M, p: float) -> np.ndarray:
    return sym_function(M, lambda w: w ** p)


def inv_pd(M) -> np.ndarray:
    """Inverse of a PD matrix via Cholesky."""
    M = require_pd(M)
    if M.size == 0:
        return M
    c = sla.cho_factor(M, lower=True)
    R = sla.cho_solve(c, np.eye(M.shape[0]))
    return 0.5 * (R + R.T)


def numerical_rank(M, rank_tol: float = RANK_TOL) -> int:
    """Rank counting singular values above ``rank_tol`` times the largest."""
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


def direct_sum(*mats) -> np.ndarray:
    mats = [np.atleast_2d(np.asarray(m, dtype=float)) for m in mats if np.size(m)]
    if not mats:
        return np.zeros((0, 0))
    return sla.block_diag(*mats)


# ---------------------------------------------------------------------------
# partitioned matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionedMatrix:
    """A symmetric matrix with an ordered, labelled block partition.

    For three blocks ``(A, B, C)`` the off-diagonal blocks are named as in a
    covariance matrix of ``(x_A, x_B, x_C)``: ``X`` couples A-B, ``Y`` A-C and
    ``Z`` B-C; :meth:`block` fetches any of them by label pair.
    """

    matrix: np.ndarray
    blocks: tuple[tuple[str, int], ...]

    def __post_init__(self):
        M = as_symmetric(self.matrix)
        blocks = tuple((str(lab), int(n)) for lab, n in self.blocks)
        labels = [lab for lab, _ in blocks]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate block labels in {labels}")
        if any(n <= 0 for _, n in blocks):
            raise ValueError("block sizes must be positive")
        if sum(n for _, n in blocks) != M.shape[0]:
            raise ValueError(
                f"block sizes {[n for _, n in blocks]} do not add up to dim {M.shape[0]}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_sizes(cls, matrix, sizes: Sequence[int], labels: Sequence[str] | None = None):
        if labels is None:
            labels = [chr(ord("A") + i) for i in range(len(sizes))]
        return cls(np.asarray(matrix, dtype=float), tuple(zip(labels, sizes)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.blocks)

    def size(self, label: str) -> int:
        return dict(self.blocks)[self._check(label)]

    def _check(self, label: str) -> str:
        if label not in self.labels:
            raise KeyError(f"unknown block label {label!r}; have {self.labels}")
        return label

    def indices(self, labels: Iterable[str] | str) -> np.ndarray:
        """Row indices of the given labels, in partition order."""
        wanted = {labels} if isinstance(labels, str) else set(labels)
        for lab in wanted:
            self._check(lab)
        idx, start = [], 0
        for lab, n in self.blocks:
            if lab in wanted:
                idx.extend(range(start, start + n))
            start += n
        return np.array(idx, dtype=int)

    def complement(self, labels: Iterable[str] | str) -> tuple[str, ...]:
        wanted = {labels} if isinstance(labels, str) else set(labels)
        return tuple(lab for lab in self.labels if lab not in wanted)

    def block(self, rows: Iterable[str] | str, cols: Iterable[str] | str) -> np.ndarray:
        return self.matrix[np.ix_(self.indices(rows), self.indices(cols))]

    def sub(self, labels: Iterable[str] | str) -> np.ndarray:
        """Principal submatrix on ``labels`` as a plain array."""
        i = self.indices(labels)
        return self.matrix[np.ix_(i, i)]

    def with_matrix(self, matrix) -> "PartitionedMatrix":
        return PartitionedMatrix(np.asarray(matrix, dtype=float), self.blocks)


def project_block(V: PartitionedMatrix, labels: Iterable[str] | str) -> PartitionedMatrix:
    """Principal submatrix on ``labels`` keeping the original relative order."""
    wanted = {labels} if isinstance(labels, str) else set(labels)
    for lab in wanted:
        V._check(lab)
    blocks = tuple((lab, n) for lab, n in V.blocks if lab in wanted)
    return PartitionedMatrix(V.sub(wanted), blocks)


def schur(M: np.ndarray, keep: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Index-level Schur complement ``M_kk - M_ko M_oo^{-1} M_ok``."""
    Mkk = M[np.ix_(keep, keep)]
    if len(out) == 0:
        return Mkk.copy()
    Moo = require_pd(M[np.ix_(out, out)], "complemented block")
    Mko = M[np.ix_(keep, out)]
    c = sla.cho_factor(Moo, lower=True)
    S = Mkk - Mko @ sla.cho_solve(c, Mko.T)
    return 0.5 * (S + S.T)


def schur_complement(V: PartitionedMatrix, out_labels: Iterable[str] | str) -> np.ndarray:
    """``V / V_out``: the complement of ``V`` with respect to the ``out_labels`` block.

    The result lives on the remaining labels, in partition order.
    """
    out = V.indices(out_labels)
    keep = V.indices(V.complement(out_labels))
    return schur(V.matrix, keep, out)


def schur_complement_partitioned(V: PartitionedMatrix,
                                 out_labels: Iterable[str] | str) -> PartitionedMatrix:
    rest = V.complement(out_labels)
    blocks = tuple((lab, n) for lab, n in V.blocks if lab in rest)
    return PartitionedMatrix(schur_complement(V, out_labels), blocks)


def _block_inverse(M: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    # Splits off the first block and recurses on its Schur complement.
    if len(sizes) == 1:
        return inv_pd(M)
    k = sizes[0]
    A, X, B = M[:k, :k], M[:k, k:], M[k:, k:]
    Ainv = inv_pd(A)
    S = B - X.T @ Ainv @ X
    Sinv = _block_inverse(0.5 * (S + S.T), sizes[1:])
    AX = Ainv @ X
    off = -AX @ Sinv
    top = Ainv + AX @ Sinv @ AX.T
    R = np.block([[top, off], [off.T, Sinv]])
    return 0.5 * (R + R.T)


def block_inverse(V: PartitionedMatrix) -> PartitionedMatrix:
    """Inverse of a PD partitioned matrix assembled from Schur complements."""
    M = require_pd(V.matrix)
    return V.with_matrix(_block_inverse(M, [n for _, n in V.blocks]))


def woodbury_inverse(S, U, T, W) -> np.ndarray:
    """``(S + U T W)^{-1}`` through the Woodbury identity."""
    S_inv = np.linalg.inv(S)
    inner = W @ S_inv @ U + np.linalg.inv(T)
    return S_inv - S_inv @ U @ np.linalg.solve(inner, W @ S_inv)


# ---------------------------------------------------------------------------
# matrix means
# ---------------------------------------------------------------------------

def _pair(A, B) -> tuple[np.ndarray, np.ndarray]:
    A, B = as_symmetric(A), as_symmetric(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return require_pd(A, "A"), require_pd(B, "B")


def weighted_geometric_mean(A, B, t: float) -> np.ndarray:
    r"""Point at parameter ``t`` on the trace-metric geodesic from A to B.

    .. math:: A \#_t B = A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    A, B = _pair(A, B)
    if t == 0.0:
        return A.copy()
    if t == 1.0:
        return B.copy()
    w, U = np.linalg.eigh(A)
    w = np.maximum(w, JITTER)
    A_h = (U * np.sqrt(w)) @ U.T
    A_ih = (U / np.sqrt(w)) @ U.T
    R = A_h @ powm(A_ih @ B @ A_ih, t) @ A_h
    return 0.5 * (R + R.T)


def geometric_mean(A, B) -> np.ndarray:
    """Matrix geometric mean ``A # B``."""
    return weighted_geometric_mean(A, B, 0.5)


def harmonic_mean(A, B) -> np.ndarray:
    """Matrix harmonic mean ``A ! B = 2 (A^{-1} + B^{-1})^{-1}``."""
    A, B = _pair(A, B)
    return 2.0 * inv_pd(inv_pd(A) + inv_pd(B))
