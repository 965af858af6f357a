"""Randomized invariants driven by hypothesis-chosen seeds and shapes."""

import numpy as np
from hypothesis import given, settings, strategies as st

from logdetgauss import loggauss as lg
from logdetgauss.instances import random_partitioned, random_qcm, saturate
from logdetgauss.matcore import (
    PartitionedMatrix,
    geometric_mean,
    logdet,
    schur_complement,
    weighted_geometric_mean,
)
from logdetgauss.symplectic import gamma_sharp, is_pure, purify, steering_inequality, williamson

SETTINGS = settings(max_examples=40, deadline=None)
seeds = st.integers(0, 2 ** 32 - 1)
size = st.integers(1, 3)


@SETTINGS
@given(seeds, size, size, size)
def test_ssa_and_identities(seed, a, b, c):
    V = random_partitioned((a, b, c), np.random.default_rng(seed))
    cmi = lg.conditional_mutual_information(V, "A", "B", "C")
    assert cmi >= -1e-10
    assert abs(cmi - lg.cmi_via_schur(V, "A", "B", "C")) <= 1e-9
    assert abs(cmi - lg.cmi_via_inverse(V, "A", "B", "C")) <= 1e-9
    assert abs(cmi - lg.gaussian_relative_entropy(V.matrix, lg.recovered_extension(V, "A", "B", "C").matrix)) <= 1e-9


@SETTINGS
@given(seeds, size, size, size)
def test_bound_chain(seed, a, b, c):
    V = random_partitioned((a, b, c), np.random.default_rng(seed))
    cmi = lg.conditional_mutual_information(V, "A", "B", "C")
    b1, b2 = lg.cmi_lower_bounds(V, "A", "B", "C")
    f = lg.fidelity_recovery_bound(V, "A", "B", "C")
    assert cmi - b1 >= -1e-9 and b1 - b2 >= -1e-9 and b2 >= 0
    assert cmi - f >= -1e-9 and f >= -1e-9


@SETTINGS
@given(seeds, size, size, size)
def test_saturation_construction(seed, a, b, c):
    V = saturate(random_partitioned((a, b, c), np.random.default_rng(seed)))
    rep = lg.check_saturation(V, "A", "B", "C")
    assert rep.saturated
    assert lg.cmi_lower_bounds(V, "A", "B", "C")[1] <= 1e-20


@SETTINGS
@given(seeds, st.integers(1, 5), st.floats(0.05, 0.95))
def test_weighted_mean_determinant(seed, n, t):
    r = np.random.default_rng(seed)
    G, H = r.normal(size=(n, n)), r.normal(size=(n, n))
    A, B = G @ G.T + np.eye(n), H @ H.T + np.eye(n)
    M = weighted_geometric_mean(A, B, t)
    assert abs(logdet(M) - ((1 - t) * logdet(A) + t * logdet(B))) <= 1e-9 * (1 + abs(logdet(A)) + abs(logdet(B)))
    Gm = geometric_mean(A, B)
    assert np.allclose(Gm @ np.linalg.solve(A, Gm), B, atol=1e-8 * np.linalg.norm(B))


@SETTINGS
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_determinant_factorization(seed, a, b):
    r = np.random.default_rng(seed)
    V = random_partitioned((a, b), r, ("A", "B"))
    assert abs(logdet(V.matrix) - logdet(V.sub("A")) - logdet(schur_complement(V, "A"))) <= 1e-9


@SETTINGS
@given(seeds, st.lists(st.integers(1, 2), min_size=1, max_size=3))
def test_williamson_and_constructions(seed, counts):
    modes = tuple((lab, n) for lab, n in zip("ABC", counts))
    q = random_qcm(modes, np.random.default_rng(seed), scale=0.6)
    wd = williamson(q)
    nrm = np.linalg.norm(q.matrix, 2)
    assert np.linalg.norm(wd.reconstruct() - q.matrix, 2) <= 1e-8 * nrm
    assert abs(logdet(q.matrix) - 2 * np.log(wd.nu).sum()) <= 1e-9 * max(1.0, abs(logdet(q.matrix)))
    G = gamma_sharp(q)
    assert abs(np.linalg.det(G.matrix) - 1) <= 1e-9
    P = purify(q)
    k = q.matrix.shape[0]
    assert np.abs(P.matrix[:k, :k] - q.matrix).max() <= 1e-9 * np.abs(q.matrix).max()
    assert is_pure(P, tol=1e-8)[0]


@SETTINGS
@given(seeds)
def test_steering(seed):
    q = random_qcm((("A", 1), ("B", 1), ("C", 1)), np.random.default_rng(seed), scale=0.8)
    assert steering_inequality(q) >= -1e-9


@SETTINGS
@given(seeds)
def test_label_order_invariance(seed):
    V = random_partitioned((2, 1, 2), np.random.default_rng(seed))
    perm = np.r_[V.indices("C"), V.indices("A"), V.indices("B")]
    W = PartitionedMatrix(V.matrix[np.ix_(perm, perm)], (("C", 2), ("A", 2), ("B", 1)))
    assert abs(lg.conditional_mutual_information(V, "A", "B", "C")
               - lg.conditional_mutual_information(W, "A", "B", "C")) <= 1e-12
