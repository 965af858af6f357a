import math

import numpy as np
import pytest
from scipy import stats

from logdetgauss import mcverify as mc
from logdetgauss.instances import random_partitioned
from logdetgauss.loggauss import gaussian_relative_entropy
from logdetgauss.matcore import PartitionedMatrix

H_STD = 0.5 * (math.log(2 * math.pi) + 1)


def scalar_instance(X):
    M = np.array([[1, X, 0.5], [X, 1, 0.5], [0.5, 0.5, 1.0]])
    return PartitionedMatrix.from_sizes(M, (1, 1, 1), ("A", "B", "C"))


def test_box_muller_is_standard_normal():
    z = mc.box_muller(mc.shard_rng(1), 200_001)
    assert z.shape == (200_001,)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_sampler_covariance():
    s = mc.GaussianSampler(np.eye(3), seed=5)
    x = s.sample(1_000_000)
    assert x.shape == (1_000_000, 3)
    assert np.abs(np.cov(x.T) - np.eye(3)).max() < 0.01


def test_sampler_mean_and_correlation():
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    x = mc.GaussianSampler(cov, mean=[1.0, -2.0], seed=3).sample(400_000)
    assert np.allclose(x.mean(axis=0), [1, -2], atol=0.01)
    assert np.allclose(np.cov(x.T), cov, atol=0.02)


def test_sampler_determinism_and_shards():
    a = mc.GaussianSampler(np.eye(2), seed=9).sample(100)
    b = mc.GaussianSampler(np.eye(2), seed=9).sample(100)
    c = mc.GaussianSampler(np.eye(2), seed=9, shard=1).sample(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampler_rejects_non_pd():
    with pytest.raises(Exception):
        mc.GaussianSampler([[1.0, 2.0], [2.0, 1.0]])


def test_log_density_examples():
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    mean = np.array([0.5, -1.0])
    expected = -0.5 * (2 * math.log(2 * math.pi) + math.log(np.linalg.det(cov)))
    assert mc.log_density(mean, cov, mean) == pytest.approx(expected)
    assert mc.log_density([1.0], [[1.0]]) == pytest.approx(-0.5 * (math.log(2 * math.pi) + 1))


def test_log_density_matches_scipy():
    cov = np.array([[2.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 1.5]])
    x = np.random.default_rng(0).normal(size=(50, 3))
    ref = stats.multivariate_normal(np.zeros(3), cov).logpdf(x)
    assert np.allclose(mc.log_density(x, cov), ref, atol=1e-12)


def test_entropy_estimates():
    est, se = mc.estimate_entropy(mc.GaussianSampler([[1.0]], seed=1), 1_000_000)
    assert abs(est - H_STD) <= 3 * se
    assert H_STD == pytest.approx(1.41894, abs=1e-5)
    est, se = mc.estimate_entropy(mc.GaussianSampler([[math.e ** 2]], seed=2), 1_000_000)
    assert abs(est - (H_STD + 1)) <= 3 * se
    assert mc.gaussian_entropy([[math.e ** 2]]) == pytest.approx(H_STD + 1)


def test_relative_entropy_estimates():
    cov = np.array([[1.5, 0.4], [0.4, 1.0]])
    est, se = mc.estimate_relative_entropy(mc.GaussianSampler(cov, seed=3), cov, 10_000)
    assert est == pytest.approx(0.0, abs=1e-12)
    est, se = mc.estimate_relative_entropy(mc.GaussianSampler([[1.0]], seed=4), [[2.0]], 1_000_000)
    assert abs(est - 0.0965735902799727) <= 3 * se
    r = np.random.default_rng(8)
    G, H = r.normal(size=(2, 2)), r.normal(size=(2, 2))
    A, B = G @ G.T + np.eye(2), H @ H.T + np.eye(2)
    est, se = mc.estimate_relative_entropy(mc.GaussianSampler(A, seed=5), B, 1_000_000)
    assert abs(est - gaussian_relative_entropy(A, B)) <= 3 * se


def test_sample_count_guard():
    with pytest.raises(ValueError):
        mc.estimate_entropy(mc.GaussianSampler([[1.0]]), 10)


def test_recovery_saturated():
    rc = mc.verify_recovery_identity(scalar_instance(0.25), n=100_000, seed=1)
    assert abs(rc.cmi) <= 1e-15
    assert abs(rc.estimate) <= 1e-12
    assert rc.passed


def test_recovery_x0_instance():
    rc = mc.verify_recovery_identity(scalar_instance(0.0), n=1_000_000, seed=2)
    assert rc.cmi == pytest.approx(0.5 * math.log(9 / 8))
    assert abs(rc.z) < 3 and rc.passed
    d = rc.to_dict()
    assert set(d) >= {"cmi", "estimate", "stderr", "n", "seed"}


def test_recovery_random_instance():
    V = random_partitioned((1, 1, 1), np.random.default_rng(77))
    rc = mc.verify_recovery_identity(V, n=1_000_000, seed=3)
    assert rc.passed, rc.to_dict()
