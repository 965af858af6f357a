"""``logdetgauss`` command line.

Exit codes: 0 ok, 1 property failure, 2 parse error, 3 math-domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import entangle as ent
from . import reports, suites
from .io import MatrixFile, ParseError, dumps, load_matrix, parse_label_sizes, save_matrix
from .matcore import MathDomainError

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def _emit(args, payload: dict, human=None):
    text = dumps(payload)
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text + "\n")
    if getattr(args, "json", False) or human is None:
        print(text)
    else:
        human(payload)


def _table(payload: dict, prefix: str = ""):
    for k, v in payload.items():
        if isinstance(v, dict):
            _table(v, prefix + k + ".")
        elif isinstance(v, (list, np.ndarray)) and np.size(v) > 8:
            print(f"{prefix + k:<40} [{np.size(v)} values]")
        elif isinstance(v, float):
            print(f"{prefix + k:<40} {v:.12g}")
        else:
            print(f"{prefix + k:<40} {v}")


def _labels(s: str | None):
    return [x.strip() for x in s.split(",")] if s else None


def _load(args) -> MatrixFile:
    sizes = parse_label_sizes(args.sizes) if getattr(args, "sizes", None) else None
    modes = parse_label_sizes(args.modes) if getattr(args, "modes", None) else None
    return load_matrix(args.file, csv=args.csv, blocks=sizes, modes=modes)


def _load_config(path) -> ent.EofConfig:
    if not path:
        return ent.EofConfig()
    try:
        return ent.EofConfig.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ParseError(f"bad config {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_info(args) -> int:
    mf = _load(args)
    labels = _labels(args.blocks)
    P = mf.partitioned(labels)
    _emit(args, reports.info_report(P, labels), _table)
    return EXIT_OK


def cmd_saturation(args) -> int:
    mf = _load(args)
    labels = _labels(args.blocks)
    P = mf.partitioned(labels)
    payload, rep = reports.saturation_report(P, labels, tol=args.tol)
    if args.emit_recovered:
        Vt = rep.recovered_extension
        save_matrix(args.emit_recovered, MatrixFile(Vt.matrix, Vt.blocks))

    def human(p):
        for name, c in p["conditions"].items():
            print(f"{name:<24} {'PASS' if c['pass'] else 'FAIL'}  residual={c['residual']:.3e}")
        print(f"{'cmi':<24} {p['cmi']:.12g}")
        print(f"{'saturated':<24} {p['saturated']}")
    _emit(args, payload, human)
    return EXIT_OK


def cmd_qcm(args) -> int:
    q = _load(args).qcm()
    if args.action == "validate":
        payload = reports.qcm_validate(q)
        _emit(args, payload, _table)
        return EXIT_OK if payload["valid"] else EXIT_FAIL
    if args.action == "williamson":
        payload = reports.qcm_williamson(q)
    elif args.action == "purify":
        payload, P = reports.qcm_purify(q)
        if args.write:
            save_matrix(args.write, MatrixFile(P.matrix, modes=P.modes))
    elif args.action == "gamma-sharp":
        payload, G = reports.qcm_gamma_sharp(q)
        if args.write:
            save_matrix(args.write, MatrixFile(G.matrix, modes=G.modes))
    else:
        if not args.seed_file:
            raise ParseError("measure needs --seed-file")
        sigma = load_matrix(args.seed_file).matrix
        measured = _labels(args.measured) or [q.labels[-1]]
        payload, post = reports.qcm_measure(q, measured, sigma)
        if args.write:
            save_matrix(args.write, MatrixFile(post.matrix, modes=post.modes))
    _emit(args, payload, _table)
    return EXIT_OK


def cmd_entangle(args) -> int:
    cfg = _load_config(args.config)
    q = _load(args).qcm()
    a, b = _labels(args.a), _labels(args.b)
    if args.action == "eof":
        r = ent.eof_optimize(q, a, b, cfg)
        payload = reports.eof_report(r)
    elif args.action == "squashed":
        payload = reports.squashed_report(ent.squashed_entanglement(q, a, b, cfg))
    elif args.action == "monogamy":
        payload = ent.monogamy_check(q, a[0] if a else None, cfg)
    else:
        if not args.other:
            raise ParseError("additivity needs --other")
        w = load_matrix(args.other).qcm()
        payload = ent.additivity_check(q, w, cfg)
    _emit(args, payload, _table)
    if args.action in ("monogamy", "additivity") and not payload["pass"]:
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    options = {"mc_samples": args.mc_samples, "mc_count": args.mc_count,
               "eof_config": _load_config(args.config)}
    start = time.perf_counter()
    if args.replay:
        try:
            record = json.loads(Path(args.replay).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad replay file: {exc}") from exc
        checks = suites.replay(record, options)
        payload = {"replay": {k: record[k] for k in ("suite", "seed", "index", "property")},
                   "checks": {c.name: {"slack": c.slack, "pass": c.passed, "skipped": c.skipped}
                              for c in checks}}
        payload["passed"] = all(c.passed for c in checks)
    elif args.suite == "all":
        payload = suites.run_all(args.seed, args.count, options)
    else:
        payload = suites.run_suite(args.suite, args.seed, args.count, options)
    if args.timing:
        payload["wall_time"] = time.perf_counter() - start
    _emit(args, payload)
    if not payload["passed"]:
        worst = payload.get("worst_failure")
        if worst and args.replay_out:
            record = dict(worst)
            record["instance"] = suites.instance_matrices(worst["suite"], worst["seed"], worst["index"])
            Path(args.replay_out).write_text(dumps(record) + "\n")
            print(f"failing instance written to {args.replay_out}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------------------

def _file_args(p, structure=True):
    p.add_argument("file")
    p.add_argument("--csv", action="store_true", help="read FILE as row-major CSV")
    if structure:
        p.add_argument("--sizes", help="block structure LABEL:SIZE,... (overrides the file)")
        p.add_argument("--modes", help="mode structure LABEL:N,... (overrides the file)")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", help="also write the JSON output here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="logdetgauss", description="Log-det information toolkit for Gaussian covariance matrices.")
    ap.add_argument("--seed", type=int, default=0, help="global seed (used by commands with randomness)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("info", help="entropies, mutual information, CMI and cross-checks")
    _file_args(p)
    p.add_argument("--blocks", help="labels to use, e.g. A,B,C")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("saturation", help="five-way saturation report")
    _file_args(p)
    p.add_argument("--blocks", help="labels A,B,C")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--emit-recovered", metavar="PATH", help="write the recovered extension")
    p.set_defaults(func=cmd_saturation)

    p = sub.add_parser("qcm", help="quantum covariance matrix operations")
    _file_args(p)
    p.add_argument("action", choices=["validate", "williamson", "purify", "gamma-sharp", "measure"])
    p.add_argument("--seed-file", help="measurement seed QCM (measure)")
    p.add_argument("--measured", help="labels of measured parties (default: last party)")
    p.add_argument("--write", metavar="PATH", help="write the resulting QCM as a matrix file")
    p.set_defaults(func=cmd_qcm)

    p = sub.add_parser("entangle", help="entanglement of formation and related checks")
    _file_args(p)
    p.add_argument("action", choices=["eof", "squashed", "monogamy", "additivity"])
    p.add_argument("--other", help="second QCM for additivity")
    p.add_argument("--config", help="optimizer config JSON")
    p.add_argument("-a", "--a", help="A-side labels")
    p.add_argument("-b", "--b", help="B-side labels")
    p.set_defaults(func=cmd_entangle)

    p = sub.add_parser("verify", help="randomized property suites")
    p.add_argument("--suite", choices=list(suites.SUITES) + ["all"], default="all")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int, default=None, dest="suite_seed")
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--mc-count", type=int, default=5, help="recovery instances that get a Monte Carlo check")
    p.add_argument("--config", help="optimizer config JSON (entanglement suite)")
    p.add_argument("--replay", metavar="PATH", help="re-run a failing instance from a replay file")
    p.add_argument("--replay-out", default="verify-failure.json", metavar="PATH")
    p.add_argument("--timing", action="store_true", help="add wall time to the report")
    p.add_argument("--out", help="also write the report here")
    p.set_defaults(func=cmd_verify, json=True)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "verify":
        args.seed = args.suite_seed if args.suite_seed is not None else args.seed
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MathDomainError as exc:
        print(f"math domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (KeyError, ValueError) as exc:
        # label lookups and shape mismatches on user input
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
