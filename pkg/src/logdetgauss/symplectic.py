"""Quantum covariance matrices (QCMs) and symplectic linear algebra.

Conventions: vacuum has covariance ``I``; each party's coordinates are laid
out ``(x_1..x_n, p_1..p_n)`` and the global symplectic form is the direct sum
of the per-party forms ``[[0, I], [-I, 0]]``.  Global mode ``k`` counts modes
party by party.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg as sla

from .matcore import (
    MathDomainError,
    PartitionedMatrix,
    as_symmetric,
    direct_sum,
    geometric_mean,
    inv_pd,
    is_pd,
    logdet,
    pd_margin,
    require_pd,
    schur,
)

VALID_TOL = 1e-8
PURE_TOL = 1e-7
RESIDUAL_TOL = 1e-8

Modes = tuple[tuple[str, int], ...]


class InvalidQCMError(MathDomainError):
    pass


def _modes(parties) -> Modes:
    if isinstance(parties, int):
        return (("A", parties),)
    out = tuple((str(lab), int(n)) for lab, n in parties)
    if any(n < 0 for _, n in out):
        raise ValueError("mode counts must be non-negative")
    return out


@dataclass(frozen=True)
class QCM:
    """Covariance matrix of a multi-party bosonic system (``2 * sum(modes)`` square)."""

    matrix: np.ndarray
    modes: Modes = field(default=(("A", 1),))

    def __post_init__(self):
        M = as_symmetric(self.matrix, tol=1e-9)
        modes = _modes(self.modes)
        if M.shape[0] != 2 * sum(n for _, n in modes):
            raise ValueError(
                f"dimension {M.shape[0]} does not match 2 x {sum(n for _, n in modes)} modes")
        labels = [lab for lab, _ in modes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate party labels {labels}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "modes", modes)

    @property
    def n_modes(self) -> int:
        return sum(n for _, n in self.modes)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.modes)

    def partition(self) -> PartitionedMatrix:
        return PartitionedMatrix(self.matrix, tuple((lab, 2 * n) for lab, n in self.modes if n))

    def indices(self, labels) -> np.ndarray:
        return self.partition().indices(labels)

    def reduce(self, labels: Iterable[str] | str) -> "QCM":
        """Marginal on ``labels`` (discarding the rest)."""
        wanted = {labels} if isinstance(labels, str) else set(labels)
        for lab in wanted:
            if lab not in self.labels:
                raise KeyError(f"unknown party {lab!r}; have {self.labels}")
        modes = tuple((lab, n) for lab, n in self.modes if lab in wanted)
        i = self.indices(wanted)
        return QCM(self.matrix[np.ix_(i, i)], modes)

    def grouped(self, groups: dict[str, Sequence[str]]) -> "QCM":
        """Merge parties into new labelled groups, reordering coordinates to stay xxpp."""
        order, modes = [], []
        for new, members in groups.items():
            xs, ps = [], []
            for lab in members:
                x, p = _party_xp(self.modes, lab)
                xs.extend(x)
                ps.extend(p)
            order.extend(xs + ps)
            modes.append((new, len(xs)))
        order = np.array(order, dtype=int)
        if sorted(order) != list(range(self.matrix.shape[0])):
            raise ValueError("groups must cover every party exactly once")
        return QCM(self.matrix[np.ix_(order, order)], tuple(modes))


def _party_xp(modes: Modes, label: str) -> tuple[list[int], list[int]]:
    start = 0
    for lab, n in modes:
        if lab == label:
            return list(range(start, start + n)), list(range(start + n, start + 2 * n))
        start += 2 * n
    raise KeyError(f"unknown party {label!r}")


def mode_coordinates(parties) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate indices of ``x_k`` and ``p_k`` for every global mode ``k``."""
    xs, ps, start = [], [], 0
    for _, n in _modes(parties):
        xs.extend(range(start, start + n))
        ps.extend(range(start + n, start + 2 * n))
        start += 2 * n
    return np.array(xs, dtype=int), np.array(ps, dtype=int)


def symplectic_form(parties) -> np.ndarray:
    """Standard symplectic form for the given party layout."""
    xs, ps = mode_coordinates(parties)
    n = 2 * len(xs)
    Om = np.zeros((n, n))
    Om[xs, ps] = 1.0
    Om[ps, xs] = -1.0
    return Om


def williamson_diagonal(nu, parties) -> np.ndarray:
    """``Delta`` carrying ``nu[k]`` on both quadratures of global mode ``k``."""
    xs, ps = mode_coordinates(parties)
    nu = np.asarray(nu, dtype=float)
    d = np.empty(2 * len(xs))
    d[xs] = nu
    d[ps] = nu
    return np.diag(d)


def _as_qcm(V, parties=None) -> QCM:
    if isinstance(V, QCM):
        return V
    V = np.asarray(V, dtype=float)
    if parties is None:
        parties = (("A", V.shape[0] // 2),)
    return QCM(V, _modes(parties))


def is_symplectic(S, parties, tol: float = RESIDUAL_TOL) -> bool:
    Om = symplectic_form(parties)
    return bool(np.linalg.norm(S @ Om @ S.T - Om) <= tol * max(1.0, np.linalg.norm(S) ** 2))


# ---------------------------------------------------------------------------
# symplectic spectrum
# ---------------------------------------------------------------------------

def symplectic_eigenvalues(V, parties=None) -> np.ndarray:
    """Symplectic eigenvalues, sorted descending.

    They are the moduli of the (purely imaginary) eigenvalues of ``Omega V``,
    each conjugate pair counted once.
    """
    q = _as_qcm(V, parties)
    M = require_pd(q.matrix, "QCM")
    if q.n_modes == 0:
        return np.zeros(0)
    ev = np.abs(np.linalg.eigvals(symplectic_form(q.modes) @ M))
    ev = np.sort(ev)[::-1]
    return 0.5 * (ev[0::2] + ev[1::2])


@dataclass(frozen=True)
class WilliamsonDecomposition:
    """``V = S Delta S^T`` with ``S`` symplectic and ``Delta`` built from ``nu``."""

    S: np.ndarray
    nu: np.ndarray
    modes: Modes
    symplectic_residual: float
    reconstruction_residual: float

    @property
    def delta(self) -> np.ndarray:
        return williamson_diagonal(self.nu, self.modes)

    def reconstruct(self) -> np.ndarray:
        return self.S @ self.delta @ self.S.T


class WilliamsonError(MathDomainError):
    pass


def williamson(V, parties=None, check: bool = True) -> WilliamsonDecomposition:
    """Williamson normal form of a positive definite ``V``.

    Diagonalizes the antisymmetric ``V^{-1/2} Omega V^{-1/2}`` by a real
    orthogonal transformation into canonical 2x2 blocks and assembles ``S``
    from it.  Symplectic eigenvalues are assigned to global modes in
    descending order.
    """
    q = _as_qcm(V, parties)
    M = require_pd(q.matrix, "QCM")
    n = q.n_modes
    if n == 0:
        return WilliamsonDecomposition(np.zeros((0, 0)), np.zeros(0), q.modes, 0.0, 0.0)
    Om = symplectic_form(q.modes)
    w, U = np.linalg.eigh(M)
    V_h = (U * np.sqrt(w)) @ U.T
    V_ih = (U / np.sqrt(w)) @ U.T
    K = V_ih @ Om @ V_ih
    K = 0.5 * (K - K.T)
    T, Z = sla.schur(K, output="real")

    # pair up the 2x2 blocks of the quasi-triangular factor
    pairs, d = [], []
    j = 0
    while j < 2 * n:
        if j + 1 >= 2 * n or abs(T[j + 1, j]) == 0.0 and abs(T[j, j + 1]) == 0.0:
            raise WilliamsonError("degenerate antisymmetric form (zero symplectic eigenvalue)")
        b, c = T[j, j + 1], T[j + 1, j]
        u, v = Z[:, j], Z[:, j + 1]
        if b < 0:
            u, v = v, u
        pairs.append((u, v))
        d.append(np.sqrt(abs(b * c)))
        j += 2
    d = np.array(d)
    nu = 1.0 / d
    order = np.argsort(-nu, kind="stable")
    nu = nu[order]

    xs, ps = mode_coordinates(q.modes)
    O = np.empty((2 * n, 2 * n))
    for k, src in enumerate(order):
        u, v = pairs[src]
        O[:, xs[k]] = u
        O[:, ps[k]] = v
    delta_ih = np.diag(1.0 / np.sqrt(np.diag(williamson_diagonal(nu, q.modes))))
    S = V_h @ O @ delta_ih

    sres = float(np.linalg.norm(S @ Om @ S.T - Om))
    recon = S @ williamson_diagonal(nu, q.modes) @ S.T
    rres = float(np.linalg.norm(recon - M) / max(np.linalg.norm(M), 1e-300))
    if check and (sres > RESIDUAL_TOL * max(1.0, np.linalg.norm(S) ** 2) or rres > RESIDUAL_TOL):
        raise WilliamsonError(
            f"Williamson residuals too large (symplectic {sres:.2e}, reconstruction {rres:.2e})")
    return WilliamsonDecomposition(S, nu, q.modes, sres, rres)


# ---------------------------------------------------------------------------
# validity and purity
# ---------------------------------------------------------------------------

def is_valid_qcm(V, parties=None, tol: float = VALID_TOL) -> tuple[bool, float]:
    """Check ``V >= i Omega``; the residual is ``min(nu) - 1``."""
    q = _as_qcm(V, parties)
    if q.n_modes == 0:
        return True, np.inf
    if not is_pd(q.matrix) or pd_margin(q.matrix) <= 0:
        return False, -np.inf
    nu = symplectic_eigenvalues(q)
    res = float(nu[-1] - 1.0)
    return bool(res >= -tol), res


def is_pure(V, parties=None, tol: float = PURE_TOL) -> tuple[bool, float]:
    """Check purity: every ``nu == 1`` and ``det V == 1``.

    The residual is the larger of ``max|nu - 1|`` and ``|det V - 1|``.
    """
    q = _as_qcm(V, parties)
    if q.n_modes == 0:
        return True, 0.0
    if not is_pd(q.matrix) or pd_margin(q.matrix) <= 0:
        return False, np.inf
    nu = symplectic_eigenvalues(q)
    res = max(float(np.max(np.abs(nu - 1.0))), abs(np.expm1(logdet(q.matrix))))
    return bool(res <= tol), float(res)


def require_valid(V, parties=None, tol: float = VALID_TOL) -> QCM:
    q = _as_qcm(V, parties)
    ok, res = is_valid_qcm(q, tol=tol)
    if not ok:
        raise InvalidQCMError(f"not a valid QCM (min symplectic eigenvalue - 1 = {res:.3e})")
    return q


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------

def gamma_sharp(K, parties=None) -> QCM:
    """Canonical pure QCM ``K # (Omega K^{-1} Omega^T)`` below a valid ``K``."""
    q = _as_qcm(K, parties)
    M = require_pd(q.matrix, "K")
    Om = symplectic_form(q.modes)
    return QCM(geometric_mean(M, Om @ inv_pd(M) @ Om.T), q.modes)


def purify(V, parties=None, env_label: str = "E") -> QCM:
    """Pure QCM on ``(parties..., E)`` whose marginal on the original parties is ``V``.

    Built mode by mode in the Williamson basis from two-mode squeezed thermal
    blocks with coupling ``sqrt(nu^2 - 1) * diag(1, -1)``; the environment has
    as many modes as ``V`` and is left in its Williamson basis.
    """
    q = require_valid(V, parties)
    if env_label in q.labels:
        raise ValueError(f"environment label {env_label!r} already used")
    n = q.n_modes
    wd = williamson(q)
    nu = np.maximum(wd.nu, 1.0)
    # sqrt amplifies roundoff in nu near 1 into a spurious coupling
    nu[nu - 1.0 < 1e-12] = 1.0
    c = np.sqrt(nu ** 2 - 1.0)
    env = ((env_label, n),)
    D_env = williamson_diagonal(nu, env)
    xs, ps = mode_coordinates(q.modes)
    L = np.zeros((2 * n, 2 * n))
    L[xs, np.arange(n)] = c
    L[ps, n + np.arange(n)] = -c
    SL = wd.S @ L
    G = np.block([[q.matrix, SL], [SL.T, D_env]])
    return QCM(G, q.modes + env)


@dataclass(frozen=True)
class FactorOut:
    """``V = S (V_R (+) eta) S^T`` with ``V_R > i Omega`` and ``eta`` pure.

    ``S`` is symplectic for the layout ``(R: n_R modes, P: n_P modes)``;
    ``mixed_modes`` / ``pure_modes`` index the Williamson modes of ``V``.
    """

    V_R: QCM
    eta: QCM
    S: np.ndarray
    nu: np.ndarray
    mixed_modes: np.ndarray
    pure_modes: np.ndarray

    @property
    def layout(self) -> Modes:
        return (("R", self.V_R.n_modes), ("P", self.eta.n_modes))

    def recombine(self) -> np.ndarray:
        return self.S @ direct_sum(self.V_R.matrix, self.eta.matrix) @ self.S.T


def reorder_to_layout(wd: WilliamsonDecomposition, groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Columns of ``wd.S`` rearranged so the Williamson modes in ``groups``
    become consecutive parties of an xxpp layout."""
    xs, ps = mode_coordinates(wd.modes)
    cols = []
    for g in groups:
        g = list(g)
        cols.extend(xs[g].tolist() + ps[g].tolist())
    return wd.S[:, cols]


def factor_out(V, parties=None, tol: float = PURE_TOL) -> FactorOut:
    """Split off the modes whose symplectic eigenvalue lies within ``tol`` of 1.

    Eigenvalues inside the ambiguity band ``(1 - tol, 1 + tol)`` go to the
    pure factor.
    """
    q = require_valid(V, parties, tol=max(tol, VALID_TOL))
    wd = williamson(q)
    mixed = np.flatnonzero(wd.nu > 1.0 + tol)
    pure = np.flatnonzero(wd.nu <= 1.0 + tol)
    S = reorder_to_layout(wd, [mixed, pure])
    V_R = QCM(williamson_diagonal(wd.nu[mixed], (("R", len(mixed)),)), (("R", len(mixed)),))
    eta = QCM(np.eye(2 * len(pure)), (("P", len(pure)),))
    return FactorOut(V_R, eta, S, wd.nu, mixed, pure)


def gaussian_measurement(V, measured: Iterable[str] | str, sigma,
                         parties=None) -> tuple[QCM, np.ndarray]:
    """Measure the ``measured`` parties with a Gaussian POVM of seed ``sigma``.

    Returns the conditional QCM of the remaining parties and the covariance
    of the outcome distribution, ``(V_B + sigma) / 2``.
    """
    q = require_valid(V, parties)
    measured = [measured] if isinstance(measured, str) else list(measured)
    sig = _as_qcm(sigma, tuple((lab, n) for lab, n in q.modes if lab in measured))
    require_valid(sig)
    rest = [lab for lab in q.labels if lab not in measured]
    b = q.indices(measured)
    a = q.indices(rest)
    if sig.matrix.shape[0] != len(b):
        raise ValueError("seed dimension does not match the measured subsystem")
    W = q.matrix.copy()
    W[np.ix_(b, b)] += sig.matrix
    post = schur(W, a, b)
    modes = tuple((lab, n) for lab, n in q.modes if lab in rest)
    return QCM(post, modes), 0.5 * W[np.ix_(b, b)]


def steering_inequality(V, parties=None, labels: Sequence[str] = ("A", "B", "C")) -> float:
    """``M(V_AC) + M(V_BC) - M(V_A) - M(V_B)``; non-negative on valid QCMs."""
    q = require_valid(V, parties)
    a, b, c = labels
    P = q.partition()
    return 0.5 * (logdet(P.sub([a, c])) + logdet(P.sub([b, c]))
                  - logdet(P.sub(a)) - logdet(P.sub(b)))


def partial_transpose(V, party: str, parties=None) -> QCM:
    """Momentum flip ``p -> -p`` on ``party``."""
    q = _as_qcm(V, parties)
    _, ps = _party_xp(q.modes, party)
    lam = np.ones(q.matrix.shape[0])
    lam[ps] = -1.0
    return QCM(q.matrix * np.outer(lam, lam), q.modes)


def ppt_two_mode_separable(V, parties=None, tol: float = VALID_TOL) -> tuple[bool, float]:
    """PPT test for a 1+1-mode QCM (necessary and sufficient at this size).

    Returns the verdict and ``min nu(partial transpose) - 1``.
    """
    q = require_valid(V, parties)
    if len(q.modes) != 2 or any(n != 1 for _, n in q.modes):
        raise ValueError("PPT criterion implemented for two single-mode parties only")
    nu = symplectic_eigenvalues(partial_transpose(q, q.labels[1]))
    margin = float(nu[-1] - 1.0)
    return margin >= -tol, margin


def pure_local_entropy(V, a_labels, parties=None) -> float:
    """``M(V_A)`` of a pure state; equals half its log-det mutual information."""
    q = _as_qcm(V, parties)
    return 0.5 * logdet(q.partition().sub(a_labels))
