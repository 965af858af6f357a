"""Matrix files and deterministic JSON output."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .matcore import PartitionedMatrix, as_symmetric
from .symplectic import QCM

MATRIX_SCHEMA = "logdetgauss.matrix/1"
REPORT_SCHEMA = "logdetgauss.report/1"
LOAD_SYM_TOL = 1e-9


class ParseError(ValueError):
    """Malformed input file or arguments (CLI exit code 2)."""


@dataclass(frozen=True)
class MatrixFile:
    matrix: np.ndarray
    blocks: tuple | None = None    # ((label, size), ...)
    modes: tuple | None = None     # ((label, n), ...)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def partitioned(self, labels=None) -> PartitionedMatrix:
        if self.blocks is not None:
            P = PartitionedMatrix(self.matrix, self.blocks)
        elif self.modes is not None:
            P = QCM(self.matrix, self.modes).partition()
        else:
            raise ParseError("file has neither 'blocks' nor 'modes'")
        if labels:
            missing = [lab for lab in labels if lab not in P.labels]
            if missing:
                raise ParseError(f"unknown block labels {missing}; file has {list(P.labels)}")
        return P

    def qcm(self) -> QCM:
        if self.modes is not None:
            return QCM(self.matrix, self.modes)
        if self.blocks is not None:
            if any(n % 2 for _, n in self.blocks):
                raise ParseError("QCM blocks must have even size")
            return QCM(self.matrix, tuple((lab, n // 2) for lab, n in self.blocks))
        if self.dim % 2:
            raise ParseError("QCM dimension must be even")
        return QCM(self.matrix, (("A", self.dim // 2),))

    def to_dict(self) -> dict:
        d = {"schema": MATRIX_SCHEMA, "dim": self.dim}
        if self.blocks is not None:
            d["blocks"] = [{"label": lab, "size": n} for lab, n in self.blocks]
        if self.modes is not None:
            d["modes"] = [{"label": lab, "n": n} for lab, n in self.modes]
        d["data"] = [float(x) for x in self.matrix.reshape(-1)]
        return d


def _structure(items, key, what):
    if items is None:
        return None
    try:
        return tuple((str(it["label"]), int(it[key])) for it in items)
    except (TypeError, KeyError, ValueError) as exc:
        raise ParseError(f"bad '{what}' entry: {exc}") from exc


def parse_matrix_document(doc) -> MatrixFile:
    if not isinstance(doc, dict):
        raise ParseError("matrix document must be a JSON object")
    if "data" not in doc:
        raise ParseError("missing 'data'")
    try:
        data = np.asarray(doc["data"], dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"'data' is not numeric: {exc}") from exc
    dim = doc.get("dim")
    if dim is None:
        dim = math.isqrt(data.size)
    if not isinstance(dim, int) or dim < 0 or data.size != dim * dim:
        raise ParseError(f"'data' has {data.size} entries, expected dim^2 with dim={dim}")
    if not np.all(np.isfinite(data)):
        raise ParseError("'data' contains non-finite values")
    M = data.reshape(dim, dim)
    try:
        M = as_symmetric(M, tol=LOAD_SYM_TOL)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    blocks = _structure(doc.get("blocks"), "size", "blocks")
    modes = _structure(doc.get("modes"), "n", "modes")
    if blocks is not None and sum(n for _, n in blocks) != dim:
        raise ParseError("block sizes do not add up to dim")
    if modes is not None and 2 * sum(n for _, n in modes) != dim:
        raise ParseError("mode counts do not add up to dim / 2")
    return MatrixFile(np.array(M), blocks, modes)


def parse_csv(text: str) -> np.ndarray:
    rows = [r for r in text.replace(";", "\n").splitlines() if r.strip()]
    try:
        vals = [float(v) for r in rows for v in r.split(",") if v.strip()]
    except ValueError as exc:
        raise ParseError(f"bad CSV value: {exc}") from exc
    n = math.isqrt(len(vals))
    if n * n != len(vals):
        raise ParseError(f"CSV holds {len(vals)} values, not a square count")
    return np.array(vals).reshape(n, n)


def load_matrix(path, csv: bool = False, blocks=None, modes=None) -> MatrixFile:
    """Read a MatrixFile (JSON) or a plain row-major CSV matrix.

    ``blocks`` / ``modes`` override or supply the structure.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if csv:
        M = parse_csv(text)
        doc = {"dim": M.shape[0], "data": M.reshape(-1).tolist()}
    else:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if blocks is not None:
        doc = dict(doc, blocks=[{"label": lab, "size": n} for lab, n in blocks])
        doc.pop("modes", None)
    if modes is not None:
        doc = dict(doc, modes=[{"label": lab, "n": n} for lab, n in modes])
        doc.pop("blocks", None)
    return parse_matrix_document(doc)


def save_matrix(path, mf: MatrixFile):
    Path(path).write_text(dumps(mf.to_dict()) + "\n")


def parse_label_sizes(text: str) -> tuple:
    """``"A:2,B:2"`` -> ``(("A", 2), ("B", 2))``."""
    out = []
    for part in text.split(","):
        lab, sep, n = part.partition(":")
        if not sep:
            raise ParseError(f"expected LABEL:SIZE, got {part!r}")
        try:
            out.append((lab.strip(), int(n)))
        except ValueError as exc:
            raise ParseError(f"bad size in {part!r}") from exc
    return tuple(out)


# ---------------------------------------------------------------------------
# deterministic JSON
# ---------------------------------------------------------------------------

def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if s.lstrip("-").isdigit():
        s += ".0"
    return s


def _encode(obj, indent, level) -> str:
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    colon = ": "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return "null" if obj is None else ("true" if obj else "false")
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k)) + colon + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + (sep + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, None, 0) for v in obj) + "]"
        items = [_encode(v, indent, level + 1) for v in obj]
        return "[" + pad + (sep + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with insertion-ordered keys and 17-significant-digit floats."""
    return _encode(obj, indent, 0)
