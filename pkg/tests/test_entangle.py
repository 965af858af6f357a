import math

import numpy as np
import pytest

from logdetgauss import entangle as ent
from logdetgauss.instances import noisy_tmsv, product, random_pure_qcm, random_qcm, thermal, tmsv
from logdetgauss.matcore import direct_sum, logdet, pd_margin
from logdetgauss.symplectic import QCM, gamma_sharp, is_pure, is_valid_qcm, ppt_two_mode_separable

AB = (("A", 1), ("B", 1))
FAST = ent.EofConfig(n_starts=3)


def rng(k):
    return np.random.default_rng(4000 + k)


def symmetric_closed_form(V):
    """Log-det EoF of a symmetric two-mode state in standard form.

    ``ln((1 + nu~^2) / (2 nu~))`` with ``nu~`` the smaller partially
    transposed symplectic eigenvalue; zero when ``nu~ >= 1``.
    """
    a, c = V[0, 0], V[0, 2]
    nt = a - abs(c)
    return 0.0 if nt >= 1 else math.log((1 + nt * nt) / (2 * nt))


def feasible_upper_bounds(V, r, count=40):
    """Local entropies of pure QCMs gamma#(W) with i Omega <= W <= V."""
    q = QCM(V, AB)
    out = []
    for _ in range(count):
        v = r.normal(size=4)
        v /= np.linalg.norm(v)
        lam = r.uniform(0.0, 1.0)
        for _ in range(30):
            W = V - lam * np.outer(v, v)
            if is_valid_qcm(W, AB)[0] and pd_margin(W) > 0:
                break
            lam *= 0.5
        G = gamma_sharp(W, q.modes).matrix
        assert pd_margin(V - G) >= -1e-9
        out.append(0.5 * logdet(G[:2, :2]))
    return out


# -- config -------------------------------------------------------------------

def test_config_roundtrip_and_rejection():
    c = ent.EofConfig(n_starts=5, seed=3)
    assert ent.EofConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ValueError):
        ent.EofConfig.from_dict({"barrier_stages": 6, "bogus": 1})
    esc = c.escalated()
    assert esc.n_starts > c.n_starts and esc.seed != c.seed


# -- anchors ------------------------------------------------------------------

@pytest.mark.parametrize("r", [0.25, 0.5, 1.0])
def test_pure_tmsv_anchor(r):
    res = ent.eof_optimize(tmsv(r), config=FAST)
    assert res.value == pytest.approx(math.log(math.cosh(2 * r)), abs=1e-7)
    assert res.value == pytest.approx(res.upper_bound_mi, abs=1e-9)


def test_tmsv_half_value():
    assert ent.eof_optimize(tmsv(0.5), config=FAST).value == pytest.approx(0.43378, abs=1e-5)


def test_pure_random_two_mode():
    q = random_pure_qcm(AB, rng(1), scale=0.7)
    res = ent.eof_optimize(q, config=FAST)
    local = 0.5 * logdet(q.matrix[:2, :2])
    assert res.value == pytest.approx(local, abs=1e-7)
    assert abs(local - res.upper_bound_mi) <= 1e-9


def test_product_states_are_zero():
    q = product(thermal(2.0), thermal(1.3, "B"))
    assert ent.eof_optimize(q, config=FAST).value <= 1e-6
    gamma, value = ent.eof_feasible_ansatz(q)
    assert value == pytest.approx(0.0, abs=1e-12)
    assert is_pure(gamma)[0]
    q = product(random_qcm((("A", 1),), rng(2)), random_qcm((("B", 1),), rng(3)))
    assert ent.eof_optimize(q, config=FAST).value <= 1e-6


def test_ansatz_on_pure_is_identity():
    q = tmsv(0.4)
    gamma, value = ent.eof_feasible_ansatz(q)
    assert np.allclose(gamma.matrix, q.matrix, atol=1e-9)
    assert value == pytest.approx(math.log(math.cosh(0.8)))


@pytest.mark.parametrize("r,noise", [(0.5, 0.1), (0.3, 0.2), (0.8, 0.5)])
def test_noisy_tmsv_closed_form(r, noise):
    q = noisy_tmsv(r, noise)
    res = ent.eof_optimize(q, config=FAST)
    expected = symmetric_closed_form(q.matrix)
    assert res.value == pytest.approx(expected, abs=1e-6)
    assert 0 < res.value < math.log(math.cosh(2 * r))


def test_optimizer_beats_feasible_search():
    for k in range(3):
        q = random_qcm(AB, rng(10 + k), nu_max=1.8, scale=0.6)
        res = ent.eof_optimize(q, config=FAST)
        bounds = feasible_upper_bounds(q.matrix, rng(20 + k))
        assert res.value <= min(bounds) + 1e-9
        assert res.value <= res.ansatz_value + 1e-12


def test_result_invariants():
    q = random_qcm(AB, rng(5), nu_max=1.5, scale=0.7)
    res = ent.eof_optimize(q, config=FAST)
    assert res.feasibility_residual >= -1e-9
    assert res.purity_residual <= 1e-7
    assert 0 <= res.value <= res.upper_bound_mi + 1e-6
    assert res.value <= res.ansatz_value + 1e-12
    assert res.gamma_opt.modes == q.modes


def test_determinism():
    q = random_qcm(AB, rng(6), nu_max=1.5, scale=0.7)
    a = ent.eof_optimize(q, config=FAST)
    b = ent.eof_optimize(q, config=FAST)
    assert a.value == b.value
    assert np.array_equal(a.gamma_opt.matrix, b.gamma_opt.matrix)


def test_faithfulness_small_sample():
    n_ent = 0
    for k in range(8):
        q = random_qcm(AB, rng(30 + k), nu_max=1.6, scale=0.7)
        sep, margin = ppt_two_mode_separable(q)
        if abs(margin) < 1e-2:
            continue
        value = ent.eof_optimize(q, config=FAST).value
        assert (value <= 1e-5) == sep
        n_ent += not sep
    assert n_ent > 0


def test_grouped_parties():
    q = product(tmsv(0.3, ("A", "B")), thermal(1.7, "C"))
    res = ent.eof_optimize(q, ["A", "C"], ["B"], FAST)
    assert res.value == pytest.approx(math.log(math.cosh(0.6)), abs=1e-7)
    assert res.a_labels == ("A", "C")


# -- squashed certificates ----------------------------------------------------

def test_squashed_pure_state():
    q = tmsv(0.4)
    s = ent.squashed_entanglement(q, config=FAST)
    assert s.certificate.extension.n_modes == 2
    assert s.value == pytest.approx(math.log(math.cosh(0.8)), abs=1e-7)
    assert s.certificate.half_cmi == pytest.approx(s.value, abs=1e-7)


def test_squashed_product_state():
    q = product(thermal(2.0), thermal(1.5, "B"))
    s = ent.squashed_entanglement(q, config=FAST)
    assert s.value <= 1e-6
    assert s.gap <= 1e-3


def test_squashed_trend_and_invariants():
    q = noisy_tmsv(0.3, 0.2)
    eof = ent.eof_optimize(q, config=FAST)
    gaps = []
    for t in (0.5, 0.2, 0.05):
        c = ent.squashed_extension(q, eof.gamma_opt, t)
        assert c.marginal_error <= 1e-9
        assert c.sigma_purity_residual <= 1e-6
        assert c.construction_error <= 1e-6
        assert is_valid_qcm(c.extension, tol=1e-7)[0]
        gaps.append(abs(c.half_cmi - eof.value))
    assert gaps[0] > gaps[1] > gaps[2]
    s = ent.squashed_entanglement(q, config=FAST, eof=eof)
    assert s.gap <= 1e-3
    assert s.certificate.half_cmi >= s.value - 1e-9


def test_squashed_rejects_bad_t():
    q = tmsv(0.2)
    with pytest.raises(ValueError):
        ent.squashed_extension(q, q, 0.0)


# -- monogamy, additivity, CMI bound ------------------------------------------

def test_monogamy_product():
    q = product(thermal(1.5), thermal(2.0, "B1"), thermal(1.2, "B2"))
    rep = ent.monogamy_check(q, "A", FAST)
    assert rep["pass"]
    assert rep["lhs"] <= 1e-6 and rep["rhs"] <= 1e-6


def test_monogamy_decoupled_second_party():
    q = product(tmsv(0.35, ("A", "B1")), thermal(1.0, "B2"))
    rep = ent.monogamy_check(q, "A", FAST)
    assert rep["lhs"] == pytest.approx(math.log(math.cosh(0.7)), abs=1e-7)
    assert rep["terms"]["B1"] == pytest.approx(rep["lhs"], abs=1e-7)
    assert abs(rep["slack"]) <= 1e-6
    assert rep["escalated"] and rep["pass"]


def test_monogamy_random():
    q = random_qcm((("A", 1), ("B1", 1), ("B2", 1)), rng(50), nu_max=1.5)
    rep = ent.monogamy_check(q, "A", FAST)
    assert rep["pass"], rep


def test_additivity_pure():
    rep = ent.additivity_check(tmsv(0.3), tmsv(0.6), FAST)
    expected = math.log(math.cosh(0.6)) + math.log(math.cosh(1.2))
    assert rep["joint"] == pytest.approx(expected, abs=1e-7)
    assert abs(rep["difference"]) <= 1e-7 and rep["pass"]


def test_additivity_with_product():
    q = noisy_tmsv(0.4, 0.1)
    rep = ent.additivity_check(q, product(thermal(1.4), thermal(1.1, "B")), FAST)
    assert rep["second"] <= 1e-6
    assert rep["joint"] == pytest.approx(rep["first"], abs=1e-6)
    assert rep["pass"]


def test_cmi_bound_decoupled_c():
    q = product(noisy_tmsv(0.4, 0.1), thermal(1.3, "C"))
    rep = ent.cmi_entanglement_bound(q, ("A", "B", "C"), FAST)
    mi = 0.5 * (logdet(q.matrix[:2, :2]) + logdet(q.matrix[2:4, 2:4]) - logdet(q.matrix[:4, :4]))
    assert rep["half_cmi"] == pytest.approx(0.5 * mi, abs=1e-12)
    assert rep["pass"]


def test_cmi_bound_random():
    q = random_qcm((("A", 1), ("B", 1), ("C", 1)), rng(60), nu_max=1.5, scale=0.7)
    assert ent.cmi_entanglement_bound(q, config=FAST)["pass"]


def test_rejects_invalid_input():
    from logdetgauss.symplectic import InvalidQCMError
    with pytest.raises(InvalidQCMError):
        ent.eof_optimize(QCM(0.5 * np.eye(4), AB))


def test_rejects_two_party_requirement():
    with pytest.raises(ValueError):
        ent.monogamy_check(tmsv(0.2), "A", FAST)
    with pytest.raises(ValueError):
        ent.additivity_check(QCM(direct_sum(np.eye(4), np.eye(2)), AB + (("C", 1),)), tmsv(0.1), FAST)
