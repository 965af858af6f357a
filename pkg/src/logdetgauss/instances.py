"""Random and canonical test instances.

Every generator takes a ``numpy.random.Generator`` so suites can derive
independent, reproducible streams from ``(seed, index)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .matcore import PartitionedMatrix, direct_sum, inv_pd
from .symplectic import QCM, symplectic_form, williamson_diagonal


def instance_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(index)]))


def random_pd(n: int, rng: np.random.Generator, floor: float = 0.05) -> np.ndarray:
    """Wishart-like PD matrix with eigenvalues bounded below by ``floor``."""
    G = rng.normal(size=(n, n))
    M = G @ G.T / n + floor * np.eye(n)
    return 0.5 * (M + M.T)


def random_partitioned(sizes: Sequence[int], rng, labels=("A", "B", "C")) -> PartitionedMatrix:
    return PartitionedMatrix.from_sizes(random_pd(sum(sizes), rng), sizes, labels[:len(sizes)])


def random_sizes(rng, n_blocks: int = 3, max_size: int = 4) -> tuple[int, ...]:
    return tuple(int(k) for k in rng.integers(1, max_size + 1, size=n_blocks))


def saturate(V: PartitionedMatrix, A="A", B="B", C="C") -> PartitionedMatrix:
    """Replace the ``A``-``B`` block by ``Y C^{-1} Z^T`` (the recovered extension)."""
    M = V.matrix.copy()
    ia, ib, ic = V.indices(A), V.indices(B), V.indices(C)
    Y = M[np.ix_(ia, ic)]
    Z = M[np.ix_(ib, ic)]
    X = Y @ inv_pd(M[np.ix_(ic, ic)]) @ Z.T
    M[np.ix_(ia, ib)] = X
    M[np.ix_(ib, ia)] = X.T
    return V.with_matrix(M)


def random_saturated(sizes: Sequence[int], rng) -> PartitionedMatrix:
    return saturate(random_partitioned(sizes, rng))


def random_symplectic(modes, rng, scale: float = 0.5) -> np.ndarray:
    """``expm(Omega H)`` for a random symmetric ``H``; symplectic for ``modes``."""
    Om = symplectic_form(modes)
    n = Om.shape[0]
    H = rng.normal(size=(n, n)) * scale
    H = 0.5 * (H + H.T)
    return sla.expm(Om @ H)


def random_qcm(modes, rng, nu_max: float = 3.0, scale: float = 0.5,
               pure_fraction: float = 0.0) -> QCM:
    """``S diag(nu) S^T`` with ``nu`` uniform in ``[1, nu_max]``.

    Each symplectic eigenvalue is set to exactly 1 with probability
    ``pure_fraction``.
    """
    modes = tuple(modes)
    n = sum(k for _, k in modes)
    nu = rng.uniform(1.0, nu_max, size=n)
    nu[rng.random(n) < pure_fraction] = 1.0
    S = random_symplectic(modes, rng, scale)
    return QCM(S @ williamson_diagonal(nu, modes) @ S.T, modes)


def random_pure_qcm(modes, rng, scale: float = 0.5) -> QCM:
    S = random_symplectic(tuple(modes), rng, scale)
    return QCM(S @ S.T, tuple(modes))


def tmsv(r: float, labels=("A", "B")) -> QCM:
    """Two-mode squeezed vacuum; local covariance ``cosh(2r) I``."""
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    V = np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])
    return QCM(V, ((labels[0], 1), (labels[1], 1)))


def thermal(nu, label: str = "A") -> QCM:
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    modes = ((label, len(nu)),)
    return QCM(williamson_diagonal(nu, modes), modes)


def product(*qcms: QCM) -> QCM:
    return QCM(direct_sum(*[q.matrix for q in qcms]), sum((q.modes for q in qcms), ()))


def noisy_tmsv(r: float, noise: float, labels=("A", "B")) -> QCM:
    q = tmsv(r, labels)
    return QCM(q.matrix + noise * np.eye(4), q.modes)

