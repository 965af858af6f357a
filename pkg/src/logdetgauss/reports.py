"""Plain-dict summaries of library results, shaped for JSON output."""

from __future__ import annotations

import numpy as np

from . import entangle as ent
from . import loggauss as lg
from .matcore import PartitionedMatrix, logdet, project_block
from .symplectic import (
    QCM,
    gamma_sharp,
    gaussian_measurement,
    is_pure,
    is_valid_qcm,
    purify,
    williamson,
)


def _modes(q: QCM) -> list:
    return [{"label": lab, "n": n} for lab, n in q.modes]


def info_report(P: PartitionedMatrix, labels=None) -> dict:
    labels = list(labels or P.labels)
    if len(labels) not in (2, 3):
        raise ValueError("info needs two or three block labels")
    P = project_block(P, labels)
    out = {"dim": P.dim, "labels": labels, "M": lg.logdet_entropy(P.matrix),
           "M_blocks": {lab: lg.logdet_entropy(P.sub(lab)) for lab in labels}}
    a, b = labels[0], labels[1]
    if len(labels) == 2:
        out["I_M"] = lg.mutual_information(P, a, b)
        out["mi_lower_bound"] = lg.mi_lower_bound(P, a, b)
        return out
    c = labels[2]
    cmi = lg.conditional_mutual_information(P, a, b, c)
    Vt = lg.recovered_extension(P, a, b, c)
    b1, b2 = lg.cmi_lower_bounds(P, a, b, c)
    out.update({
        "I_M": lg.mutual_information(project_block(P, [a, b]), a, b),
        "CMI": cmi,
        "CMI_via_schur": lg.cmi_via_schur(P, a, b, c),
        "CMI_via_inverse": lg.cmi_via_inverse(P, a, b, c),
        "relative_entropy_of_recovery": lg.gaussian_relative_entropy(P.matrix, Vt.matrix),
        "bound1": b1,
        "bound2": b2,
        "fidelity_bound": lg.fidelity_recovery_bound(P, a, b, c),
    })
    out["identity_residuals"] = {
        "schur": abs(cmi - out["CMI_via_schur"]),
        "inverse": abs(cmi - out["CMI_via_inverse"]),
        "recovery": abs(cmi - out["relative_entropy_of_recovery"]),
    }
    return out


def saturation_report(P: PartitionedMatrix, labels=None, tol: float = lg.SATURATION_TOL):
    a, b, c = list(labels or P.labels)[:3]
    rep = lg.check_saturation(P, a, b, c, tol=tol)
    d = {
        "labels": [a, b, c],
        "cmi": rep.cmi_value,
        "tol": rep.tol,
        "scale": rep.scale,
        "conditions": {name: {"residual": rep.residuals[name], "pass": bool(rep.flags[name])}
                       for name in lg.CONDITION_NAMES},
        "saturated": rep.saturated,
        "coherent": rep.coherent,
    }
    return d, rep


def qcm_validate(q: QCM) -> dict:
    ok, res = is_valid_qcm(q)
    pure, pres = is_pure(q) if ok else (False, float("inf"))
    return {"modes": _modes(q), "valid": ok, "validity_residual": res,
            "pure": pure, "purity_residual": pres}


def qcm_williamson(q: QCM) -> dict:
    wd = williamson(q)
    return {"modes": _modes(q), "nu": wd.nu, "S": wd.S,
            "symplectic_residual": wd.symplectic_residual,
            "reconstruction_residual": wd.reconstruction_residual,
            "logdet": logdet(q.matrix)}


def qcm_purify(q: QCM) -> tuple[dict, QCM]:
    P = purify(q)
    k = q.matrix.shape[0]
    return ({"modes": _modes(P), "purity_residual": is_pure(P)[1],
             "marginal_error": float(np.abs(P.matrix[:k, :k] - q.matrix).max())}, P)


def qcm_gamma_sharp(q: QCM) -> tuple[dict, QCM]:
    G = gamma_sharp(q)
    return ({"modes": _modes(G), "purity_residual": is_pure(G)[1],
             "dominated": bool(np.linalg.eigvalsh(q.matrix - G.matrix).min() >= -1e-9)}, G)


def qcm_measure(q: QCM, measured, sigma) -> tuple[dict, QCM]:
    post, cov = gaussian_measurement(q, measured, sigma)
    ok, res = is_valid_qcm(post)
    return ({"measured": list(measured), "modes": _modes(post), "post_valid": ok,
             "post_validity_residual": res, "outcome_cov": cov}, post)


def eof_report(r: ent.EofResult) -> dict:
    d = r.summary()
    d["gamma_opt"] = {"modes": _modes(r.gamma_opt), "data": r.gamma_opt.matrix}
    return d


def squashed_report(s: ent.SquashedResult) -> dict:
    c = s.certificate
    return {
        "value": s.value,
        "half_cmi": c.half_cmi,
        "gap": s.gap,
        "t": c.t,
        "schedule": list(s.schedule),
        "gaps": list(s.gaps),
        "marginal_error": c.marginal_error,
        "post_measurement_error": c.post_measurement_error,
        "sigma_purity_residual": c.sigma_purity_residual,
        "extension": {"modes": _modes(c.extension), "data": c.extension.matrix},
    }
