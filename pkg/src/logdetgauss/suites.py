"""Seeded randomized property suites.

Each suite turns ``(seed, index)`` into one instance and evaluates a fixed
list of properties on it.  A property yields a *slack*: it holds iff
``slack >= 0``.  Reports aggregate pass/fail counts and the worst slack per
property; aggregation runs in index order, so reports do not depend on the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import entangle as ent
from . import loggauss as lg
from .instances import (
    instance_rng,
    random_partitioned,
    random_pd,
    random_pure_qcm,
    random_qcm,
    random_saturated,
    random_sizes,
)
from .io import REPORT_SCHEMA
from .matcore import (
    PartitionedMatrix,
    logdet,
    pd_margin,
    project_block,
    schur_complement,
    weighted_geometric_mean,
)
from .mcverify import verify_recovery_identity
from .symplectic import (
    QCM,
    gamma_sharp,
    gaussian_measurement,
    is_pure,
    is_valid_qcm,
    ppt_two_mode_separable,
    purify,
    steering_inequality,
    symplectic_eigenvalues,
    symplectic_form,
    williamson,
)

SUITES = ("classical", "quantum", "recovery", "entanglement")
STREAMS = {name: k + 1 for k, name in enumerate(SUITES)}

# faithfulness is undecidable at the 1e-5 value threshold when the PPT margin
# is within ~4.5e-3 of zero (EoF grows quadratically there)
PPT_BAND = 1e-2


@dataclass(frozen=True)
class Check:
    name: str
    slack: float
    skipped: bool = False

    @property
    def passed(self) -> bool:
        return self.skipped or bool(self.slack >= 0)


def _scale(M) -> float:
    return max(1.0, float(np.linalg.norm(M, 2)))


# ---------------------------------------------------------------------------
# classical
# ---------------------------------------------------------------------------

def classical_instance(seed: int, index: int):
    rng = instance_rng(seed, index, STREAMS["classical"])
    sizes = random_sizes(rng, 3, 4)
    V = random_partitioned(sizes, rng)
    W = random_partitioned(sizes, rng)
    return {"V": V, "W": W}


def geodesic_convexity_slack(V: PartitionedMatrix, W: PartitionedMatrix,
                             ts=(0.25, 0.5, 0.75)) -> float:
    """Worst ``(1-t) I(V_AB) + t I(W_AB) - I(V_AB #_t W_AB)`` over ``ts``."""
    Vab, Wab = project_block(V, ["A", "B"]), project_block(W, ["A", "B"])
    iv = lg.mutual_information(Vab, "A", "B")
    iw = lg.mutual_information(Wab, "A", "B")
    worst = np.inf
    for t in ts:
        G = Vab.with_matrix(weighted_geometric_mean(Vab.matrix, Wab.matrix, t))
        worst = min(worst, (1 - t) * iv + t * iw - lg.mutual_information(G, "A", "B"))
    return float(worst)


def classical_checks(inst) -> list[Check]:
    V, W = inst["V"], inst["W"]
    sc = _scale(V.matrix)
    cmi = lg.conditional_mutual_information(V, "A", "B", "C")
    checks = [
        Check("ssa", cmi + 1e-10),
        Check("schur_monotonicity", lg.schur_monotonicity_margin(V, "A", "B", "C") + 1e-9 * sc),
        Check("cmi_via_schur", 1e-9 - abs(cmi - lg.cmi_via_schur(V, "A", "B", "C"))),
        Check("cmi_via_inverse", 1e-9 - abs(cmi - lg.cmi_via_inverse(V, "A", "B", "C"))),
    ]
    checks.append(Check("geodesic_convexity", geodesic_convexity_slack(V, W) + 1e-9))
    b1, b2 = lg.cmi_lower_bounds(V, "A", "B", "C")
    fid = lg.fidelity_recovery_bound(V, "A", "B", "C")
    checks.append(Check("bound_chain", min(cmi - b1, b1 - b2, b2, cmi - fid, fid) + 1e-9))
    A = V.sub("A")
    err = abs(logdet(V.matrix) - logdet(A) - logdet(schur_complement(V, "A")))
    checks.append(Check("det_factorization", 1e-9 - err))
    return checks


# ---------------------------------------------------------------------------
# quantum
# ---------------------------------------------------------------------------

def quantum_instance(seed: int, index: int):
    rng = instance_rng(seed, index, STREAMS["quantum"])
    modes = (("A", 1), ("B", 1), ("C", 1))
    V = random_qcm(modes, rng, nu_max=3.0, scale=0.5, pure_fraction=0.2)
    K = random_pd(2 * int(rng.integers(1, 4)), rng, floor=0.2) * float(rng.uniform(0.5, 3.0))
    sigma = random_pure_qcm((("C", 1),), rng)
    return {"V": V, "K": K, "sigma": sigma}


def gamma_sharp_margins(K) -> tuple[float, float, float]:
    """Margins of ``K > i Omega``, ``K > Omega K^-1 Omega^T``, ``K > gamma#``."""
    n = K.shape[0] // 2
    modes = (("A", n),)
    Om = symplectic_form(modes)
    m1 = float(symplectic_eigenvalues(K, modes)[-1] - 1.0)
    m2 = pd_margin(K - Om @ np.linalg.inv(K) @ Om.T)
    m3 = pd_margin(K - gamma_sharp(K, modes).matrix)
    return m1, m2, m3


def gamma_sharp_agreement(margins, band: float = 1e-7) -> float:
    """0 when the three verdicts agree (or any margin is inside the band)."""
    if any(abs(m) <= band for m in margins):
        return 0.0
    signs = {m > 0 for m in margins}
    return 0.0 if len(signs) == 1 else -min(abs(m) for m in margins)


def quantum_checks(inst) -> list[Check]:
    V, K = inst["V"], inst["K"]
    M = V.matrix
    nrm = float(np.linalg.norm(M, 2))
    wd = williamson(V, check=False)
    checks = [
        Check("williamson_reconstruction", 1e-8 * nrm - wd.reconstruction_residual * nrm),
        Check("williamson_symplectic", 1e-8 - wd.symplectic_residual),
        Check("williamson_det", 1e-9 - abs(np.expm1(logdet(M) - 2 * np.sum(np.log(wd.nu))))),
    ]
    G = gamma_sharp(K, (("A", K.shape[0] // 2),))
    checks.append(Check("gamma_sharp_purity", 1e-9 - abs(np.expm1(logdet(G.matrix)))))
    checks.append(Check("uncertainty_equivalence", gamma_sharp_agreement(gamma_sharp_margins(K))))
    AB = V.reduce(["A", "B"])
    P = purify(AB)
    k = AB.matrix.shape[0]
    checks.append(Check("purification_marginal", 1e-9 - float(np.abs(P.matrix[:k, :k] - AB.matrix).max())))
    checks.append(Check("purification_purity", 1e-8 - is_pure(P)[1]))
    checks.append(Check("steering_inequality", steering_inequality(V) + 1e-9))
    post, _ = gaussian_measurement(V, "C", inst["sigma"].matrix)
    checks.append(Check("measurement_validity", is_valid_qcm(post)[1] + 1e-8))
    return checks


# ---------------------------------------------------------------------------
# recovery
# ---------------------------------------------------------------------------

def recovery_instance(seed: int, index: int):
    rng = instance_rng(seed, index, STREAMS["recovery"])
    sizes = random_sizes(rng, 3, 4)
    saturated = index % 2 == 0
    V = random_saturated(sizes, rng) if saturated else random_partitioned(sizes, rng)
    return {"V": V, "saturated": saturated, "mc_seed": int(rng.integers(2**31))}


def recovery_checks(inst, mc_samples: int = 0) -> list[Check]:
    V = inst["V"]
    cmi = lg.conditional_mutual_information(V, "A", "B", "C")
    Vt = lg.recovered_extension(V, "A", "B", "C")
    checks = [Check("recovery_identity", 1e-9 - abs(cmi - lg.gaussian_relative_entropy(V.matrix, Vt.matrix)))]
    rep = lg.check_saturation(V, "A", "B", "C")
    flags = list(rep.flags.values())
    if inst["saturated"]:
        ok = all(flags) and cmi <= 1e-9
        checks.append(Check("saturation_equivalence", 0.0 if ok else -1.0))
        N = lg.petz_recovery_channel(project_bc(V), V.size("A"))
        out = lg.apply_channel(N, project_ac(V))
        err = float(np.abs(out - ordered_abc(V)).max())
        checks.append(Check("petz_fixed_point", 1e-8 * _scale(V.matrix) - err))
    else:
        checks.append(Check("saturation_equivalence", 0.0 if rep.coherent else -1.0))
        checks.append(Check("petz_fixed_point", 0.0, skipped=True))
    if mc_samples:
        mc = verify_recovery_identity(V, mc_samples, seed=inst["mc_seed"])
        checks.append(Check("monte_carlo_recovery", 3.0 - mc.z))
    else:
        checks.append(Check("monte_carlo_recovery", 0.0, skipped=True))
    return checks


def project_bc(V: PartitionedMatrix) -> PartitionedMatrix:
    i = V.indices(["B", "C"])
    return PartitionedMatrix(V.matrix[np.ix_(i, i)], (("B", V.size("B")), ("C", V.size("C"))))


def project_ac(V: PartitionedMatrix) -> np.ndarray:
    i = V.indices(["A", "C"])
    return V.matrix[np.ix_(i, i)]


def ordered_abc(V: PartitionedMatrix) -> np.ndarray:
    """``V`` in the ``(A, B, C)`` coordinate order produced by the recovery channel."""
    i = V.indices(["A", "B", "C"])
    return V.matrix[np.ix_(i, i)]


# ---------------------------------------------------------------------------
# entanglement
# ---------------------------------------------------------------------------

def entanglement_instance(seed: int, index: int):
    rng = instance_rng(seed, index, STREAMS["entanglement"])
    two = (("A", 1), ("B", 1))
    redraws = 0
    while True:
        V = random_qcm(two, rng, nu_max=2.0, scale=0.5)
        if abs(ppt_two_mode_separable(V)[1]) >= PPT_BAND:
            break
        redraws += 1
    V3 = random_qcm((("A", 1), ("B", 1), ("C", 1)), rng, nu_max=2.0, scale=0.5)
    return {"V": V, "V3": V3, "redraws": redraws}


def entanglement_checks(inst, config: ent.EofConfig | None = None) -> list[Check]:
    cfg = config or ent.EofConfig()
    V = inst["V"]
    r = ent.eof_optimize(V, config=cfg)
    sc = _scale(V.matrix)
    sep, _ = ppt_two_mode_separable(V)
    checks = [
        Check("eof_below_half_mi", r.upper_bound_mi + 1e-6 - r.value),
        Check("eof_seed_dominance", r.ansatz_value + 1e-12 - r.value),
        Check("eof_feasibility", r.feasibility_residual + 1e-8 * sc),
        Check("eof_purity", 1e-7 - r.purity_residual),
        Check("faithfulness", 0.0 if (r.value <= 1e-5) == sep else -abs(r.value - 1e-5)),
    ]
    sq = ent.squashed_entanglement(V, config=cfg, eof=r)
    checks.append(Check("squashed_certificate", 1e-3 - sq.gap))
    b = ent.cmi_entanglement_bound(inst["V3"], config=cfg)
    checks.append(Check("cmi_bounds_eof", b["slack"] + cfg.optimizer_tol))
    return checks


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

INSTANCE = {
    "classical": classical_instance,
    "quantum": quantum_instance,
    "recovery": recovery_instance,
    "entanglement": entanglement_instance,
}


def evaluate(suite: str, seed: int, index: int, options: dict | None = None) -> list[Check]:
    opts = options or {}
    inst = INSTANCE[suite](seed, index)
    if suite == "classical":
        return classical_checks(inst)
    if suite == "quantum":
        return quantum_checks(inst)
    if suite == "recovery":
        mc = opts.get("mc_samples", 100_000) if index < opts.get("mc_count", 5) else 0
        return recovery_checks(inst, mc)
    return entanglement_checks(inst, opts.get("eof_config"))


def worker_count() -> int:
    raw = os.environ.get("LOGDET_GAUSS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_suite(suite: str, seed: int, count: int, options: dict | None = None,
              workers: int | None = None) -> dict:
    """Deterministic SuiteReport for ``count`` instances of ``suite``."""
    if suite not in INSTANCE:
        raise ValueError(f"unknown suite {suite!r}")
    workers = workers or worker_count()

    def one(i):
        return evaluate(suite, seed, i, options)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(count)))
    else:
        results = [one(i) for i in range(count)]

    props: dict[str, dict] = {}
    worst_fail = None
    for i, checks in enumerate(results):
        for c in checks:
            p = props.setdefault(c.name, {"pass": 0, "fail": 0, "skipped": 0,
                                          "worst_slack": None, "worst_instance": None})
            if c.skipped:
                p["skipped"] += 1
                continue
            p["pass" if c.passed else "fail"] += 1
            if p["worst_slack"] is None or c.slack < p["worst_slack"]:
                p["worst_slack"] = float(c.slack)
                p["worst_instance"] = i
            if not c.passed and (worst_fail is None or c.slack < worst_fail["slack"]):
                worst_fail = {"suite": suite, "seed": seed, "index": i,
                              "property": c.name, "slack": float(c.slack)}
    failures = sum(p["fail"] for p in props.values())
    return {
        "schema": REPORT_SCHEMA,
        "suite": suite,
        "seed": seed,
        "count": count,
        "properties": props,
        "failures": failures,
        "passed": failures == 0,
        "worst_failure": worst_fail,
    }


def run_all(seed: int, count: int, options: dict | None = None, workers: int | None = None) -> dict:
    reports = [run_suite(s, seed, count, options, workers) for s in SUITES]
    failures = sum(r["failures"] for r in reports)
    worst = [r["worst_failure"] for r in reports if r["worst_failure"]]
    return {
        "schema": REPORT_SCHEMA,
        "suite": "all",
        "seed": seed,
        "count": count,
        "suites": reports,
        "failures": failures,
        "passed": failures == 0,
        "worst_failure": min(worst, key=lambda w: w["slack"]) if worst else None,
    }


def replay(record: dict, options: dict | None = None) -> list[Check]:
    """Re-evaluate the instance named by a failure record."""
    return evaluate(record["suite"], int(record["seed"]), int(record["index"]), options)


def instance_matrices(suite: str, seed: int, index: int) -> dict:
    """Plain-array view of an instance for replay files."""
    inst = INSTANCE[suite](seed, index)
    out = {}
    for k, v in inst.items():
        if isinstance(v, QCM):
            out[k] = {"modes": [list(m) for m in v.modes], "data": v.matrix}
        elif isinstance(v, PartitionedMatrix):
            out[k] = {"blocks": [list(b) for b in v.blocks], "data": v.matrix}
        elif isinstance(v, np.ndarray):
            out[k] = {"data": v}
    return out
