"""Line-oriented problem files.

One directive per line, ``#`` starts a comment, numbers in decimal ASCII::

    type quadratic          # or: table
    n 2
    k 3 3                   # levels per coordinate (default grid 0..k-1)
    grid 0 -1 0 2 3         # explicit grid for coordinate 0
    interval 1 0.0 1.0      # continuous coordinate 1, discretized
    lipschitz 4.0           # l-inf Lipschitz constant (needed by intervals)
    eps_prime 0.5
    Q 1 0 0 1               # row-major n x n
    c 0 0
    lambda 0                # sparsity weight
    q 0                     # sparsity exponent in [0, 1)
    alpha -8                # table only: diminishing-returns bound (default -4 max|F|)
    values 0 1 2 ...        # table only: prod(k) values, lexicographic order

Quadratic problems use the sign split of ``Q``; tables use the generic
decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domains import DomainSpec, FiniteGrid, Interval, LatticeMap, reduce_domain
from .errors import DsminError, ParseError
from .lattice import Lattice
from .oracle import (
    DsDecomposition,
    FunctionOracle,
    QuadraticOracle,
    QuadraticSpec,
    TableOracle,
    alpha_default,
    decompose_generic,
    decompose_quadratic,
)

KINDS = ("quadratic", "table")


@dataclass
class Problem:
    kind: str
    mapping: LatticeMap
    spec: QuadraticSpec | None = None
    table: np.ndarray | None = None
    alpha: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def lattice(self) -> Lattice:
        return self.mapping.lattice

    def objective(self) -> FunctionOracle:
        if self.kind == "quadratic":
            return QuadraticOracle(self.spec)
        return TableOracle(self.table.reshape(self.lattice.ks), self.lattice)

    def decomposition(self) -> DsDecomposition:
        if self.kind == "quadratic":
            return decompose_quadratic(self.spec)
        F = self.objective()
        alpha = alpha_default(F) if self.alpha is None else self.alpha
        return decompose_generic(F, alpha, list(self.mapping.grids))


def _floats(tokens, lineno, what):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"{what}: expected numbers, got {' '.join(tokens)!r}", lineno) from None


def _int(token, lineno, what):
    try:
        v = int(token)
    except ValueError:
        raise ParseError(f"{what}: expected an integer, got {token!r}", lineno) from None
    return v


def parse_problem(text: str) -> Problem:
    d: dict = {"grids": {}, "intervals": {}}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()  # case-sensitive: "Q" is the matrix, "q" the exponent
        if key in seen and key not in ("grid", "interval"):
            raise ParseError(f"duplicate directive {key!r} (first on line {seen[key]})", lineno)
        seen.setdefault(key, lineno)
        if key == "type":
            if len(rest) != 1 or rest[0] not in KINDS:
                raise ParseError(f"type must be one of {KINDS}", lineno)
            d["type"] = rest[0]
        elif key == "n":
            if len(rest) != 1:
                raise ParseError("n takes one integer", lineno)
            d["n"] = _int(rest[0], lineno, "n")
            if d["n"] < 1:
                raise ParseError("n must be positive", lineno)
        elif key == "k":
            d["k"] = [_int(t, lineno, "k") for t in rest]
            if not d["k"] or min(d["k"]) < 1:
                raise ParseError("k needs positive level counts", lineno)
            d["k_line"] = lineno
        elif key == "grid":
            if len(rest) < 2:
                raise ParseError("grid needs a coordinate index and at least one value", lineno)
            i = _int(rest[0], lineno, "grid index")
            vals = _floats(rest[1:], lineno, "grid")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ParseError("grid values must be strictly increasing", lineno)
            d["grids"][i] = (vals, lineno)
        elif key == "interval":
            if len(rest) != 3:
                raise ParseError("interval takes: index a b", lineno)
            i = _int(rest[0], lineno, "interval index")
            a, b = _floats(rest[1:], lineno, "interval")
            if not a < b:
                raise ParseError("interval needs a < b", lineno)
            d["intervals"][i] = ((a, b), lineno)
        elif key in ("lipschitz", "eps_prime", "lambda", "q", "alpha"):
            if len(rest) != 1:
                raise ParseError(f"{key} takes one number", lineno)
            d[key] = (_floats(rest, lineno, key)[0], lineno)
        elif key == "Q":
            d["Q"] = (_floats(rest, lineno, "Q"), lineno)
        elif key == "c":
            d["c"] = (_floats(rest, lineno, "c"), lineno)
        elif key == "values":
            d["values"] = (_floats(rest, lineno, "values"), lineno)
        else:
            raise ParseError(f"unknown directive {key!r}", lineno)
    return _build(d)


def _build(d: dict) -> Problem:
    if "type" not in d:
        raise ParseError("missing 'type' directive", 1)
    if "n" not in d:
        raise ParseError("missing 'n' directive", 1)
    n = d["n"]
    ks = d.get("k")
    if ks is not None and len(ks) == 1 and n > 1:
        ks = ks * n
    if ks is not None and len(ks) != n:
        raise ParseError(f"k lists {len(ks)} level counts for n={n}", d["k_line"])
    coords = []
    for i in range(n):
        if i in d["grids"] and i in d["intervals"]:
            raise ParseError(f"coordinate {i} has both a grid and an interval", d["intervals"][i][1])
        if i in d["grids"]:
            vals, ln = d["grids"][i]
            if ks is not None and len(vals) != ks[i]:
                raise ParseError(f"grid {i} has {len(vals)} values but k={ks[i]}", ln)
            coords.append(FiniteGrid(tuple(vals)))
        elif i in d["intervals"]:
            coords.append(Interval(*d["intervals"][i][0]))
        elif ks is not None:
            coords.append(FiniteGrid(tuple(float(j) for j in range(ks[i]))))
        else:
            raise ParseError(f"coordinate {i} has no levels (give 'k', 'grid' or 'interval')", 1)
    extra = set(d["grids"]) | set(d["intervals"])
    if any(i < 0 or i >= n for i in extra):
        bad = min(i for i in extra if i < 0 or i >= n)
        ln = (d["grids"].get(bad) or d["intervals"].get(bad))[1]
        raise ParseError(f"coordinate index {bad} out of range for n={n}", ln)
    get = lambda key, default=None: d[key][0] if key in d else default  # noqa: E731
    try:
        mapping, _ = reduce_domain(DomainSpec(coords, get("lipschitz"), get("eps_prime")))
    except DsminError as exc:
        line = d["lipschitz"][1] if "lipschitz" in d else min(v[1] for v in d["intervals"].values()) if d["intervals"] else 1
        raise ParseError(str(exc), line) from exc

    if d["type"] == "quadratic":
        if "values" in d:
            raise ParseError("'values' is only valid for table problems", d["values"][1])
        Q = np.zeros((n, n))
        if "Q" in d:
            q, ln = d["Q"]
            if len(q) != n * n:
                raise ParseError(f"Q needs {n * n} entries, got {len(q)}", ln)
            Q = np.array(q).reshape(n, n)
        c = np.zeros(n)
        if "c" in d:
            cv, ln = d["c"]
            if len(cv) != n:
                raise ParseError(f"c needs {n} entries, got {len(cv)}", ln)
            c = np.array(cv)
        try:
            spec = QuadraticSpec(Q, c, list(mapping.grids), get("lambda", 0.0), get("q", 0.0))
        except DsminError as exc:
            ln = d["lambda"][1] if "lambda" in d else d["q"][1] if "q" in d else 1
            raise ParseError(str(exc), ln) from exc
        return Problem("quadratic", mapping, spec=spec)

    for key in ("Q", "c", "lambda", "q"):
        if key in d:
            raise ParseError(f"{key!r} is only valid for quadratic problems", d[key][1])
    if "values" not in d:
        raise ParseError("table problems need a 'values' line", 1)
    vals, ln = d["values"]
    size = int(np.prod(mapping.ks))
    if len(vals) != size:
        raise ParseError(f"values needs {size} entries, got {len(vals)}", ln)
    alpha = get("alpha")
    if alpha is not None and alpha > 0:
        raise ParseError("alpha must be non-positive", d["alpha"][1])
    return Problem("table", mapping, table=np.array(vals), alpha=alpha)


def load_problem(path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_problem(text)
