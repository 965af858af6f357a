"""Monte Carlo checks of the closed-form Gaussian entropy identities.

Normals come from Box-Muller on PCG64 uniforms, so a stream is fixed by
``(seed, shard)`` alone.  Estimators average exact log-densities and are
therefore unbiased; acceptance uses ``3 * stderr`` bands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .matcore import PartitionedMatrix, logdet, require_pd
from .loggauss import conditional_mutual_information, recovered_extension

LOG_2PI = np.log(2.0 * np.pi)

# stderr is exactly 0 when log p_V - log p_W vanishes identically (saturated
# instances); rounding in the two log-densities still leaves ~1e-15 noise
STDERR_FLOOR = 1e-10

BATCH = 200_000


def box_muller(rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` standard normals from pairs of uniforms."""
    m = (size + 1) // 2
    u1 = 1.0 - rng.random(m)          # (0, 1]
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]


def shard_rng(seed: int, shard: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(shard)])))


class GaussianSampler:
    """Draws from ``N(mean, cov)``; owns its RNG state, so not shareable across threads."""

    def __init__(self, cov, mean=None, seed: int = 0, shard: int = 0):
        self.cov = require_pd(cov, "cov")
        self.dim = self.cov.shape[0]
        self.mean = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=float).reshape(self.dim)
        self.factor = np.linalg.cholesky(self.cov)
        self.seed, self.shard = int(seed), int(shard)
        self._rng = shard_rng(seed, shard)

    def sample(self, n: int) -> np.ndarray:
        """``(n, dim)`` array of draws."""
        if n < 1:
            raise ValueError("n must be at least 1")
        z = box_muller(self._rng, n * self.dim).reshape(n, self.dim)
        return z @ self.factor.T + self.mean


def log_density(x, cov, mean=None) -> np.ndarray | float:
    """Log of the Gaussian density at the rows of ``x``.

    ``cov`` must be positive definite; deterministic kernels (``K = 0``)
    have no density and are rejected.
    """
    cov = require_pd(cov, "cov")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if mean is not None:
        X = X - np.asarray(mean, dtype=float)
    c = np.linalg.cholesky(cov)
    w = sla.solve_triangular(c, X.T, lower=True)
    q = np.einsum("ij,ij->j", w, w)
    d = cov.shape[0]
    out = -0.5 * (d * LOG_2PI + 2.0 * np.sum(np.log(np.diag(c))) + q)
    return float(out[0]) if single else out


def kernel_log_density(x, Hy, K) -> np.ndarray | float:
    """Log of the channel kernel ``N(x, y)`` given ``H y`` and ``K > 0``."""
    return log_density(x, K, Hy)


def gaussian_entropy(cov) -> float:
    """Closed-form differential entropy in nats."""
    cov = require_pd(cov, "cov")
    return 0.5 * logdet(cov) + 0.5 * cov.shape[0] * (LOG_2PI + 1.0)


class _Moments:
    def __init__(self):
        self.n, self.s, self.ss = 0, 0.0, 0.0

    def add(self, v: np.ndarray):
        # shift by the first batch mean to keep the sum of squares well conditioned
        if self.n == 0:
            self.shift = float(np.mean(v))
        d = v - self.shift
        self.n += v.size
        self.s += float(np.sum(d))
        self.ss += float(np.sum(d * d))

    def result(self) -> tuple[float, float]:
        m = self.s / self.n
        var = max(self.ss / self.n - m * m, 0.0) * self.n / max(self.n - 1, 1)
        return self.shift + m, float(np.sqrt(var / self.n))


def _check_n(n):
    if n < 1000:
        raise ValueError("use at least 1000 samples")


def estimate_entropy(sampler: GaussianSampler, n: int) -> tuple[float, float]:
    """``(mean of -log p, stderr)`` over ``n`` fresh draws."""
    _check_n(n)
    mom = _Moments()
    left = n
    while left:
        k = min(BATCH, left)
        x = sampler.sample(k)
        mom.add(-log_density(x, sampler.cov, sampler.mean))
        left -= k
    return mom.result()


def estimate_relative_entropy(sampler: GaussianSampler, cov_b, n: int, mean_b=None) -> tuple[float, float]:
    """``(mean of log p_A - log p_B under A, stderr)``."""
    _check_n(n)
    cov_b = require_pd(cov_b, "cov_b")
    mom = _Moments()
    left = n
    while left:
        k = min(BATCH, left)
        x = sampler.sample(k)
        mom.add(log_density(x, sampler.cov, sampler.mean) - log_density(x, cov_b, mean_b))
        left -= k
    return mom.result()


@dataclass(frozen=True)
class RecoveryCheck:
    cmi: float
    estimate: float
    stderr: float
    n: int
    seed: int

    @property
    def z(self) -> float:
        return abs(self.estimate - self.cmi) / max(self.stderr, STDERR_FLOOR)

    @property
    def passed(self) -> bool:
        return self.z <= 3.0

    def to_dict(self) -> dict:
        return {"cmi": self.cmi, "estimate": self.estimate, "stderr": self.stderr,
                "n": self.n, "seed": self.seed, "z": self.z, "pass": self.passed}


def verify_recovery_identity(V: PartitionedMatrix, n: int = 1_000_000, seed: int = 0,
                             A="A", B="B", C="C") -> RecoveryCheck:
    """Monte Carlo ``D(p_V || p_Vtilde)`` against the closed-form conditional MI."""
    cmi = conditional_mutual_information(V, A, B, C)
    Vt = recovered_extension(V, A, B, C).matrix
    est, se = estimate_relative_entropy(GaussianSampler(V.matrix, seed=seed), Vt, n)
    return RecoveryCheck(float(cmi), float(est), float(se), int(n), int(seed))
