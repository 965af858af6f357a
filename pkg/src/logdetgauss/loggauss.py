"""Log-det information quantities, classical Gaussian channels and recovery.

All entropic quantities are in nats.  For a tripartite ``V`` over labels
``(A, B, C)`` the blocks are named ``X`` (A-B), ``Y`` (A-C) and ``Z`` (B-C).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .matcore import (
    MathDomainError,
    PartitionedMatrix,
    as_symmetric,
    direct_sum,
    harmonic_mean,
    inv_pd,
    invsqrtm,
    logdet,
    pd_margin,
    project_block,
    require_pd,
    schur_complement,
    schur_complement_partitioned,
)

SATURATION_TOL = 1e-8


def logdet_entropy(V) -> float:
    """``M(V) = 1/2 ln det V``."""
    return 0.5 * logdet(V)


def _labels3(V: PartitionedMatrix, A, B, C):
    for lab in (A, B, C):
        V._check(lab)
    if len({A, B, C}) != 3:
        raise ValueError("A, B and C must be distinct labels")
    return A, B, C


def mutual_information(V: PartitionedMatrix, A: str, B: str) -> float:
    """``I_M(A:B) = M(V_A) + M(V_B) - M(V_AB)``."""
    require_pd(V.sub([A, B]))
    return 0.5 * (logdet(V.sub(A)) + logdet(V.sub(B)) - logdet(V.sub([A, B])))


def conditional_mutual_information(V: PartitionedMatrix, A: str, B: str, C: str) -> float:
    """``I_M(A:B|C)`` from the log-determinants of four principal submatrices.

    The raw signed value is returned; roundoff may make it slightly negative.
    """
    A, B, C = _labels3(V, A, B, C)
    require_pd(V.sub([A, B, C]))
    return 0.5 * (logdet(V.sub([A, C])) + logdet(V.sub([B, C]))
                  - logdet(V.sub([A, B, C])) - logdet(V.sub(C)))


def cmi_via_schur(V: PartitionedMatrix, A: str, B: str, C: str) -> float:
    """Conditional MI as the MI of the Schur complement ``V_ABC / V_C``."""
    A, B, C = _labels3(V, A, B, C)
    W = schur_complement_partitioned(project_block(V, [A, B, C]), C)
    return mutual_information(W, A, B)


def cmi_via_inverse(V: PartitionedMatrix, A: str, B: str, C: str) -> float:
    """Conditional MI as the MI of the inverse covariance on ``AB``."""
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    return mutual_information(P.with_matrix(inv_pd(P.matrix)), A, B)


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianChannel:
    """Classical Gaussian channel ``V -> H V H^T + K``."""

    H: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        K = as_symmetric(self.K)
        if K.shape[0] != H.shape[0]:
            raise ValueError(f"K is {K.shape} but H has {H.shape[0]} output rows")
        if K.size and pd_margin(K) < -1e-10 * (1.0 + np.abs(K).max()):
            raise MathDomainError("channel noise K must be positive semidefinite")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "K", K)

    @property
    def in_dim(self) -> int:
        return self.H.shape[1]

    @property
    def out_dim(self) -> int:
        return self.H.shape[0]


def apply_channel(N: GaussianChannel, V) -> np.ndarray:
    V = as_symmetric(V)
    if V.shape[0] != N.in_dim:
        raise ValueError(f"channel expects input dim {N.in_dim}, got {V.shape[0]}")
    out = N.H @ V @ N.H.T + N.K
    return 0.5 * (out + out.T)


def apply_transpose_channel(N: GaussianChannel, V) -> np.ndarray:
    """Transpose channel on inverse covariances: returns ``H^T (V + K)^{-1} H``.

    ``V`` is a covariance on the channel's output space.
    """
    V = as_symmetric(V)
    if V.shape[0] != N.out_dim:
        raise ValueError(f"transpose channel expects dim {N.out_dim}, got {V.shape[0]}")
    out = N.H.T @ inv_pd(V + N.K) @ N.H
    return 0.5 * (out + out.T)


def pointwise_gaussian_product(V, A) -> np.ndarray:
    """Covariance after multiplying a density pointwise by a Gaussian of covariance ``A``."""
    return inv_pd(inv_pd(V) + inv_pd(A))


def petz_recovery_channel(V_BC: PartitionedMatrix, A_dim: int = 0) -> GaussianChannel:
    """Gaussian Petz recovery ``C -> BC`` tensored with the identity on ``A``.

    ``V_BC`` has two blocks ordered ``(B, C)``.  The channel maps
    ``(A, C)``-shaped covariances to ``(A, B, C)``-shaped ones, where ``A``
    has dimension ``A_dim``.
    """
    if len(V_BC.blocks) != 2:
        raise ValueError("V_BC must have exactly two blocks (B, C)")
    b_lab, c_lab = V_BC.labels
    B, Z, C = V_BC.sub(b_lab), V_BC.block(b_lab, c_lab), V_BC.sub(c_lab)
    Cinv = inv_pd(require_pd(C, "C block"))
    nb, nc, na = B.shape[0], C.shape[0], int(A_dim)
    H = np.zeros((na + nb + nc, na + nc))
    H[:na, :na] = np.eye(na)
    H[na:na + nb, na:] = Z @ Cinv
    H[na + nb:, na:] = np.eye(nc)
    K = np.zeros((na + nb + nc,) * 2)
    K[na:na + nb, na:na + nb] = B - Z @ Cinv @ Z.T
    return GaussianChannel(H, K)


def petz_recovery_composed(V: PartitionedMatrix, A: str, B: str, C: str, sigma_AC) -> np.ndarray:
    """Petz map as pointwise division, transpose channel, pointwise product.

    Reference ``q`` has covariance ``V_A (+) V_BC``; the forward channel
    discards ``B``.  Used as an independent check of
    :func:`petz_recovery_channel`.
    """
    A, B, C = _labels3(V, A, B, C)
    VA, VBC, VC = V.sub(A), V.sub([B, C]), V.sub(C)
    na, nb = VA.shape[0], V.size(B)
    ref = direct_sum(VA, VBC)
    ref_out = direct_sum(VA, VC)
    # divide by the output reference, pull back along the discard map, multiply by ref
    inv_in = inv_pd(sigma_AC) - inv_pd(ref_out)
    P = np.zeros((na + V.size(C), na + nb + V.size(C)))
    P[:na, :na] = np.eye(na)
    P[na:, na + nb:] = np.eye(V.size(C))
    out = inv_pd(inv_pd(ref) + P.T @ inv_in @ P)
    return out


def off_diagonal_blocks(V: PartitionedMatrix, A: str, B: str, C: str):
    """``(A, B, C, X, Y, Z)`` blocks of a tripartite matrix."""
    return (V.sub(A), V.sub(B), V.sub(C),
            V.block(A, B), V.block(A, C), V.block(B, C))


def recovered_extension(V: PartitionedMatrix, A: str, B: str, C: str) -> PartitionedMatrix:
    """``V~``: ``V`` with the A-B block replaced by ``Y C^{-1} Z^T``."""
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    _, _, Cm, _, Y, Z = off_diagonal_blocks(P, A, B, C)
    Cinv = inv_pd(require_pd(Cm, "C block"))
    Xt = Y @ Cinv @ Z.T
    M = np.array(P.matrix)
    ia, ib = P.indices(A), P.indices(B)
    M[np.ix_(ia, ib)] = Xt
    M[np.ix_(ib, ia)] = Xt.T
    return P.with_matrix(M)


def gaussian_relative_entropy(A, B) -> float:
    """``D(p_A || p_B)`` for zero-mean Gaussians with covariances ``A`` and ``B``."""
    A, B = as_symmetric(A), as_symmetric(B)
    if A.shape != B.shape:
        raise ValueError("dimension mismatch")
    n = A.shape[0]
    return 0.5 * (logdet(B) - logdet(A)) + 0.5 * float(np.trace(inv_pd(B) @ require_pd(A))) - 0.5 * n


def gaussian_fidelity_sq(A, B) -> float:
    """Squared fidelity of two equal-mean Gaussians, ``det(A!B) / sqrt(det A det B)``."""
    H = harmonic_mean(A, B)
    return float(np.exp(logdet(H) - 0.5 * (logdet(A) + logdet(B))))


# ---------------------------------------------------------------------------
# saturation
# ---------------------------------------------------------------------------

CONDITION_NAMES = (
    "cmi_zero",
    "schur_equal",
    "inverse_block_diagonal",
    "markov_block",
    "petz_fixed_point",
)


@dataclass(frozen=True)
class SaturationReport:
    """Residuals and verdicts of the five equivalent saturation conditions."""

    cmi_value: float
    residuals: dict
    flags: dict
    recovered_extension: PartitionedMatrix
    scale: float
    tol: float

    @property
    def saturated(self) -> bool:
        return all(self.flags.values())

    @property
    def coherent(self) -> bool:
        return len(set(self.flags.values())) == 1


def check_saturation(V: PartitionedMatrix, A: str, B: str, C: str,
                     tol: float = SATURATION_TOL) -> SaturationReport:
    """Evaluate the five saturation criteria.

    Residuals: (1) CMI; (2) ``||V/V_BC - V_AC/V_C||_F``; (3) norm of the
    A-B block of ``V^{-1}``; (4) ``||X - Y C^{-1} Z^T||_F``; (5) distance
    between ``V`` and the Petz recovery applied to ``V_AC``.  A flag is set
    when its residual is at most ``tol * scale`` with ``scale = ||V||_2``
    (``1/lambda_min`` for the inverse-based residual).
    """
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    M = require_pd(P.matrix)
    scale = float(np.linalg.norm(M, 2))
    cmi = conditional_mutual_information(P, A, B, C)

    r2 = np.linalg.norm(schur_complement(P, [B, C]) -
                        schur_complement(project_block(P, [A, C]), C))
    Pinv = P.with_matrix(inv_pd(M))
    r3 = np.linalg.norm(Pinv.block(A, B))
    _, _, Cm, X, Y, Z = off_diagonal_blocks(P, A, B, C)
    r4 = np.linalg.norm(X - Y @ inv_pd(Cm) @ Z.T)

    # Petz channel acts on the (A, C) marginal and returns (A, B, C) ordering
    N = petz_recovery_channel(project_block(P, [B, C]), A_dim=P.size(A))
    rec = apply_channel(N, P.sub([A, C]))
    order = np.concatenate([P.indices(A), P.indices(B), P.indices(C)])
    r5 = np.linalg.norm(rec - M[np.ix_(order, order)])

    inv_scale = 1.0 / max(pd_margin(M), 1e-300)
    residuals = {
        "cmi_zero": float(cmi),
        "schur_equal": float(r2),
        "inverse_block_diagonal": float(r3),
        "markov_block": float(r4),
        "petz_fixed_point": float(r5),
    }
    thresholds = {
        "cmi_zero": tol,
        "schur_equal": tol * scale,
        "inverse_block_diagonal": tol * inv_scale,
        "markov_block": tol * scale,
        "petz_fixed_point": tol * scale,
    }
    flags = {k: bool(abs(residuals[k]) <= thresholds[k]) for k in CONDITION_NAMES}
    return SaturationReport(float(cmi), residuals, flags,
                            recovered_extension(P, A, B, C), scale, tol)


# ---------------------------------------------------------------------------
# lower bounds
# ---------------------------------------------------------------------------

def mi_lower_bound(V: PartitionedMatrix, A: str, B: str) -> float:
    """``1/2 ||A^{-1/2} X B^{-1/2}||_2^2``, a lower bound on ``I_M(A:B)``."""
    Am = require_pd(V.sub(A), "A block")
    Bm = require_pd(V.sub(B), "B block")
    K = invsqrtm(Am) @ V.block(A, B) @ invsqrtm(Bm)
    return 0.5 * float(np.sum(K * K))


def cmi_lower_bounds(V: PartitionedMatrix, A: str, B: str, C: str) -> tuple[float, float]:
    """Two lower bounds on ``I_M(A:B|C)`` measuring ``X - Y C^{-1} Z^T``.

    ``bound1`` weights the defect with the conditional covariances
    ``V_AC/V_C`` and ``V_BC/V_C``; ``bound2`` with the marginals ``A`` and
    ``B``.  ``CMI >= bound1 >= bound2 >= 0``.
    """
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    require_pd(P.matrix)
    Am, Bm, Cm, X, Y, Z = off_diagonal_blocks(P, A, B, C)
    D = X - Y @ inv_pd(Cm) @ Z.T
    SA = schur_complement(project_block(P, [A, C]), C)
    SB = schur_complement(project_block(P, [B, C]), C)
    bound1 = 0.5 * float(np.trace(inv_pd(SA) @ D @ inv_pd(SB) @ D.T))
    K = invsqrtm(Am) @ D @ invsqrtm(Bm)
    bound2 = 0.5 * float(np.sum(K * K))
    return bound1, bound2


def fidelity_recovery_bound(V: PartitionedMatrix, A: str, B: str, C: str) -> float:
    """``1/2 ln(det V det V~ / det(V ! V~)^2)``, a lower bound on the CMI."""
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    Vt = recovered_extension(P, A, B, C).matrix
    return 0.5 * (logdet(P.matrix) + logdet(Vt)) - logdet(harmonic_mean(P.matrix, Vt))


def schur_monotonicity_margin(V: PartitionedMatrix, A: str, B: str, C: str) -> float:
    """Smallest eigenvalue of ``V_AC/V_C - V_ABC/V_BC`` (non-negative by SSA)."""
    A, B, C = _labels3(V, A, B, C)
    P = project_block(V, [A, B, C])
    D = schur_complement(project_block(P, [A, C]), C) - schur_complement(P, [B, C])
    return pd_margin(D)


def tripartite(V, sizes: Sequence[int], labels: Sequence[str] = ("A", "B", "C")) -> PartitionedMatrix:
    return PartitionedMatrix.from_sizes(V, sizes, labels)
