"""QKP and MKP instances: community file formats, a canonical JSON format,
random generators, and conversion to :class:`ConstrainedQuadraticProblem`.

Instances store positive values (maximization data); the minimization sign
flip happens only in :func:`to_problem`.  ``opt`` is always stored in the
minimization convention, i.e. negative.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from saim.model import ConstrainedQuadraticProblem

FORMAT_NAME = "saim-instance"
FORMAT_VERSION = 1


class ParseError(ValueError):
    """Malformed instance text.  ``position`` is the offending token index."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = "" if position is None else f" (token {position})"
        super().__init__(message + where)


def _array_eq(a, b) -> bool:
    return np.array_equal(np.asarray(a), np.asarray(b))


@dataclass(frozen=True, eq=False)
class QkpInstance:
    name: str
    W: np.ndarray
    h: np.ndarray
    A: np.ndarray
    b: int
    density: float | None = None
    opt: float | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=np.int64)
        h = np.array(self.h, dtype=np.int64)
        A = np.array(self.A, dtype=np.int64)
        n = h.shape[0]
        if W.shape != (n, n) or A.shape != (n,):
            raise ValueError("inconsistent QKP dimensions")
        if not np.array_equal(W, W.T):
            raise ValueError("QKP pair values must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValueError("QKP pair values must have a zero diagonal")
        if np.any(A < 0) or int(self.b) <= 0:
            raise ValueError("QKP weights must be non-negative and capacity positive")
        for arr in (W, h, A):
            arr.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", int(self.b))

    @property
    def n(self) -> int:
        return self.h.shape[0]

    def __eq__(self, other):
        if not isinstance(other, QkpInstance):
            return NotImplemented
        return (self.name, self.b, self.density, self.opt) == (other.name, other.b, other.density, other.opt) and all(
            _array_eq(x, y) for x, y in ((self.W, other.W), (self.h, other.h), (self.A, other.A))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MkpInstance:
    name: str
    h: np.ndarray
    A: np.ndarray
    B: np.ndarray
    opt: float | None = None

    def __post_init__(self):
        h = np.array(self.h, dtype=np.int64)
        A = np.atleast_2d(np.array(self.A, dtype=np.int64))
        B = np.atleast_1d(np.array(self.B, dtype=np.int64))
        if A.shape != (B.shape[0], h.shape[0]):
            raise ValueError("inconsistent MKP dimensions")
        if np.any(A < 0):
            raise ValueError("MKP weights must be non-negative")
        if np.any(B <= 0):
            raise ValueError("MKP capacities must be positive")
        for arr in (h, A, B):
            arr.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MkpInstance):
            return NotImplemented
        return (self.name, self.opt) == (other.name, other.opt) and all(
            _array_eq(x, y) for x, y in ((self.h, other.h), (self.A, other.A), (self.B, other.B))
        )

    __hash__ = None


Instance = Union[QkpInstance, MkpInstance]


class _Tokens:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def remaining(self) -> int:
        return len(self.tokens) - self.pos

    def number(self, what: str) -> float:
        if self.pos >= len(self.tokens):
            raise ParseError(f"unexpected end of input while reading {what}", self.pos)
        tok = self.tokens[self.pos]
        try:
            value = float(tok)
        except ValueError:
            raise ParseError(f"expected a number for {what}, got {tok!r}", self.pos) from None
        self.pos += 1
        return value

    def integer(self, what: str, minimum: int | None = None) -> int:
        pos = self.pos
        value = self.number(what)
        if value != int(value):
            raise ParseError(f"expected an integer for {what}, got {value}", pos)
        if minimum is not None and value < minimum:
            raise ParseError(f"{what} must be >= {minimum}, got {int(value)}", pos)
        return int(value)

    def integers(self, count: int, what: str, minimum: int | None = None) -> list[int]:
        return [self.integer(what, minimum) for _ in range(count)]


def _opt_from_max(value: float) -> float | None:
    return None if value == 0 else -value


def _opt_to_max(opt: float | None) -> float:
    if opt is None:
        return 0
    out = -opt
    return int(out) if float(out).is_integer() else out


def load_mkp_orlib(text: str) -> list[MkpInstance]:
    """Parse OR-Library MKP text.

    Layout: instance count, then per instance ``n m opt``, ``n`` profits,
    ``m`` rows of ``n`` weights, ``m`` capacities.  A zero ``opt`` means
    unknown.
    """
    toks = _Tokens(text.split())
    if not toks.tokens:
        raise ParseError("empty MKP input", 0)
    count = toks.integer("instance count", 1)
    out = []
    for k in range(count):
        n = toks.integer("n", 1)
        m = toks.integer("m", 1)
        opt = toks.number("optimum")
        h = toks.integers(n, "profit", 0)
        A = [toks.integers(n, "weight", 0) for _ in range(m)]
        B = toks.integers(m, "capacity", 1)
        out.append(MkpInstance(f"mkp_{k + 1}", h, A, B, _opt_from_max(opt)))
    if toks.remaining():
        raise ParseError(f"{toks.remaining()} trailing tokens after {count} instances", toks.pos)
    return out


def dump_mkp_orlib(instances: list[MkpInstance]) -> str:
    lines = [str(len(instances))]
    for inst in instances:
        lines.append(f"{inst.n} {inst.m} {_opt_to_max(inst.opt)}")
        lines.append(" ".join(map(str, inst.h)))
        lines.extend(" ".join(map(str, row)) for row in inst.A)
        lines.append(" ".join(map(str, inst.B)))
    return "\n".join(lines) + "\n"


def load_qkp(text: str) -> QkpInstance:
    """Parse the community QKP layout.

    Name line, ``n``, ``n`` linear values, the strict upper triangle of pair
    values row by row, a constraint-type flag (``0`` for ``<=``), the
    capacity, then ``n`` weights.  Anything after the weights is ignored.
    """
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise ParseError("empty QKP input", 0)
    name = lines[0].strip()
    toks = _Tokens(" ".join(lines[1:]).split())
    n = toks.integer("n", 1)
    h = toks.integers(n, "linear value", 0)
    W = np.zeros((n, n), dtype=np.int64)
    for i in range(n - 1):
        W[i, i + 1:] = toks.integers(n - 1 - i, "pair value", 0)
    pos = toks.pos
    kind = toks.integer("constraint type")
    if kind != 0:
        raise ParseError(f"only '<=' constraints (type 0) are supported, got {kind}", pos)
    b = toks.integer("capacity", 1)
    A = toks.integers(n, "weight", 0)
    return QkpInstance(name, W + W.T, h, A, b)


def dump_qkp(inst: QkpInstance) -> str:
    n = inst.n
    lines = [inst.name, str(n), " ".join(map(str, inst.h))]
    lines.extend(" ".join(map(str, inst.W[i, i + 1:])) for i in range(n - 1))
    lines += ["", "0", str(inst.b), " ".join(map(str, inst.A))]
    return "\n".join(lines) + "\n"


def to_json(inst: Instance) -> str:
    """Canonical self-describing format with an explicit version field."""
    head = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    if isinstance(inst, QkpInstance):
        iu, ju = np.nonzero(np.triu(inst.W, 1))
        body = {
            "kind": "qkp",
            "name": inst.name,
            "n": inst.n,
            "density": inst.density,
            "opt": inst.opt,
            "capacity": inst.b,
            "weights": inst.A.tolist(),
            "values": inst.h.tolist(),
            "pair_values": [[int(i), int(j), int(inst.W[i, j])] for i, j in zip(iu, ju)],
        }
    else:
        body = {
            "kind": "mkp",
            "name": inst.name,
            "n": inst.n,
            "m": inst.m,
            "opt": inst.opt,
            "capacities": inst.B.tolist(),
            "values": inst.h.tolist(),
            "weights": inst.A.tolist(),
        }
    return _format({**head, **body})


def _format(doc: dict) -> str:
    # one JSON value per line; matrix rows one per line
    parts = []
    for key, value in doc.items():
        if key in ("pair_values", "weights") and value and isinstance(value[0], list):
            rows = ",\n  ".join(json.dumps(r) for r in value)
            parts.append(f" {json.dumps(key)}: [\n  {rows}\n ]")
        else:
            parts.append(f" {json.dumps(key)}: {json.dumps(value)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def from_json(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if doc.get("format") != FORMAT_NAME:
        raise ParseError(f"not a {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {doc.get('version')!r}")
    try:
        if doc["kind"] == "qkp":
            n = int(doc["n"])
            W = np.zeros((n, n), dtype=np.int64)
            for i, j, v in doc["pair_values"]:
                W[i, j] = W[j, i] = v
            return QkpInstance(doc["name"], W, doc["values"], doc["weights"], doc["capacity"],
                               density=doc.get("density"), opt=doc.get("opt"))
        if doc["kind"] == "mkp":
            return MkpInstance(doc["name"], doc["values"], doc["weights"], doc["capacities"], opt=doc.get("opt"))
    except (KeyError, TypeError, IndexError) as exc:
        raise ParseError(f"missing or malformed field: {exc}") from None
    raise ParseError(f"unknown instance kind {doc['kind']!r}")


def load_file(path) -> list[Instance]:
    """Load any supported format, sniffing JSON vs. OR-Library vs. QKP text."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return [from_json(text)]
    first = stripped.split(None, 1)[0] if stripped else ""
    try:
        float(first)
    except ValueError:
        return [load_qkp(text)]
    return load_mkp_orlib(text)


def generate_qkp(
    n: int,
    density: float,
    seed: int,
    value_range: tuple[int, int] = (1, 100),
    weight_range: tuple[int, int] = (1, 50),
    name: str | None = None,
) -> QkpInstance:
    """Random QKP in the usual benchmark style.

    Each pair value and each linear value is nonzero with probability
    ``density`` and then uniform in ``value_range``; weights are uniform in
    ``weight_range``; the capacity is uniform between the largest weight
    and the total weight.
    """
    if n < 2:
        raise ValueError("need at least two items")
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1]")
    vlo, vhi = value_range
    wlo, whi = weight_range
    if not (0 < vlo <= vhi) or not (0 < wlo <= whi):
        raise ValueError("value and weight ranges must be positive with lo <= hi")
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < density
    values = rng.integers(vlo, vhi + 1, size=(n, n))
    W = np.triu(np.where(mask, values, 0), 1)
    W = W + W.T
    h = np.where(rng.random(n) < density, rng.integers(vlo, vhi + 1, size=n), 0)
    A = rng.integers(wlo, whi + 1, size=n)
    b = int(rng.integers(A.max(), A.sum() + 1))
    if name is None:
        name = f"qkp_{n}_{int(round(100 * density))}_s{seed}"
    return QkpInstance(name, W, h, A, b, density=float(density))


def generate_mkp(
    n: int,
    m: int,
    seed: int,
    tightness: float = 0.5,
    weight_range: tuple[int, int] = (0, 1000),
    name: str | None = None,
) -> MkpInstance:
    """Random MKP with correlated profits.

    Weights are uniform in ``weight_range``; item ``j`` is worth its mean
    weight plus a uniform bonus in ``[0, 500)``; capacities are
    ``tightness`` times each row's total weight.
    """
    if n < 2 or m < 1:
        raise ValueError("need n >= 2 and m >= 1")
    if not 0 < tightness < 1:
        raise ValueError("tightness must be in (0, 1)")
    wlo, whi = weight_range
    if not 0 <= wlo <= whi or whi == 0:
        raise ValueError("weight range must be non-negative with lo <= hi and hi > 0")
    rng = np.random.default_rng(seed)
    A = rng.integers(wlo, whi + 1, size=(m, n))
    h = np.floor(A.mean(axis=0) + 500 * rng.random(n)).astype(np.int64)
    B = np.maximum(1, np.floor(tightness * A.sum(axis=1))).astype(np.int64)
    if name is None:
        name = f"mkp_{n}_{m}_s{seed}"
    return MkpInstance(name, h, A, B)


def to_problem(inst: Instance) -> ConstrainedQuadraticProblem:
    """Minimization form: ``f = -1/2 x^T W x - h^T x`` subject to ``A x <= b``."""
    if isinstance(inst, QkpInstance):
        return ConstrainedQuadraticProblem(-inst.W.astype(float), -inst.h.astype(float), inst.A[None, :], [inst.b])
    n = inst.n
    return ConstrainedQuadraticProblem(np.zeros((n, n)), -inst.h.astype(float), inst.A, inst.B)


def with_opt(inst: Instance, opt: float | None) -> Instance:
    if isinstance(inst, QkpInstance):
        return QkpInstance(inst.name, inst.W, inst.h, inst.A, inst.b, inst.density, opt)
    return MkpInstance(inst.name, inst.h, inst.A, inst.B, opt)
