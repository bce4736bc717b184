"""MILP instance data, Benders cut records and a brute-force reference solver.

The instance is the block-structured program

    max  c.x + h.y   s.t.  A x + G y <= b,   x in {0,1}^n,  y >= 0

which is the form the decomposition works on.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionError, ParseError, TooLarge

log = logging.getLogger(__name__)

#: global comparison tolerance for floating point data
TOL = 1e-9

#: enumeration guard for the brute-force oracle
MAX_ORACLE_BINARIES = 20


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    MASTER_STUCK = "MasterStuck"

    def __str__(self) -> str:
        return self.value


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MilpInstance:
    n: int
    p: int
    m: int
    c: np.ndarray
    h: np.ndarray
    A: np.ndarray
    G: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        n, p, m = int(self.n), int(self.p), int(self.m)
        if n < 1 or p < 0 or m < 1:
            raise DimensionError(f"need n >= 1, p >= 0, m >= 1 (got n={n}, p={p}, m={m})")
        G = np.asarray(self.G, dtype=np.float64)
        if p == 0 and G.size == 0:
            G = np.zeros((m, 0))
        arrays = {
            "c": _frozen(self.c, 1, "c"),
            "h": _frozen(self.h, 1, "h") if p else _frozen(np.zeros(0), 1, "h"),
            "A": _frozen(self.A, 2, "A"),
            "G": _frozen(G, 2, "G"),
            "b": _frozen(self.b, 1, "b"),
        }
        if p == 0 and np.asarray(self.h).size:
            raise DimensionError("h must be empty when p = 0")
        expected = {"c": (n,), "h": (p,), "A": (m, n), "G": (m, p), "b": (m,)}
        for key, shape in expected.items():
            if arrays[key].shape != shape:
                raise DimensionError(f"{key} has shape {arrays[key].shape}, expected {shape}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", m)
        for key, arr in arrays.items():
            object.__setattr__(self, key, arr)

    @classmethod
    def from_arrays(cls, c, h, A, G, b) -> "MilpInstance":
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        m, n = A.shape
        h = np.asarray(h, dtype=np.float64).reshape(-1)
        G = np.asarray(G, dtype=np.float64).reshape(m, h.size)
        return cls(n=n, p=h.size, m=m, c=c, h=h, A=A, G=G, b=b)

    def __eq__(self, other):
        if not isinstance(other, MilpInstance):
            return NotImplemented
        return (self.n, self.p, self.m) == (other.n, other.p, other.m) and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in "chAGb"
        )

    __hash__ = None

    def rhs_residual(self, x) -> np.ndarray:
        """b - A x, the right-hand side seen by the continuous variables."""
        return self.b - self.A @ np.asarray(x, dtype=np.float64)

    def x_only_rows(self) -> list[int]:
        """Rows whose G coefficients are all zero."""
        return [i for i in range(self.m) if not np.any(self.G[i])]

    def is_integral(self) -> bool:
        return all(np.array_equal(arr, np.round(arr)) for arr in (self.c, self.h, self.A, self.G, self.b))

    def to_dict(self) -> dict:
        def clean(arr):
            out = arr.tolist()
            return _intify(out)

        G = [[] for _ in range(self.m)] if self.p == 0 else clean(self.G)
        return {
            "n": self.n, "p": self.p, "m": self.m,
            "c": clean(self.c), "h": clean(self.h),
            "A": clean(self.A), "G": G, "b": clean(self.b),
        }


def _intify(obj):
    if isinstance(obj, list):
        return [_intify(v) for v in obj]
    if isinstance(obj, float) and obj.is_integer() and abs(obj) < 2**53:
        return int(obj)
    return obj


_KEYS = ("n", "p", "m", "c", "h", "A", "G", "b")


def parse_instance(text: str) -> MilpInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed instance JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    missing = [k for k in _KEYS if k not in doc]
    if missing:
        raise ParseError(f"instance is missing keys: {', '.join(missing)}")
    for k in ("n", "p", "m"):
        if not isinstance(doc[k], int) or isinstance(doc[k], bool):
            raise ParseError(f"{k} must be an integer")
    n, p, m = doc["n"], doc["p"], doc["m"]
    try:
        A = np.array(doc["A"], dtype=np.float64)
        G = np.array(doc["G"], dtype=np.float64)
        c = np.array(doc["c"], dtype=np.float64)
        h = np.array(doc["h"], dtype=np.float64)
        b = np.array(doc["b"], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        # ragged nesting or non-numeric entries
        raise DimensionError(f"instance arrays are not rectangular numeric data: {exc}") from exc
    if p == 0 and G.size == 0:
        G = np.zeros((m, 0))
    if A.ndim != 2 or G.ndim != 2:
        raise DimensionError("A and G must be matrices")
    return MilpInstance(n=n, p=p, m=m, c=c, h=h, A=A, G=G, b=b)


def load_instance(path) -> MilpInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


def serialize_instance(inst: MilpInstance) -> str:
    return json.dumps(inst.to_dict())


class CutKind(str, enum.Enum):
    OPTIMALITY = "Optimality"
    FEASIBILITY = "Feasibility"


@dataclass(frozen=True, eq=False)
class Cut:
    """A dual extreme point (optimality) or extreme ray (feasibility)."""

    kind: CutKind
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=np.float64).reshape(-1)
        if np.any(vec < -TOL):
            raise ValueError("cut vectors live in the nonnegative orthant")
        if self.kind is CutKind.FEASIBILITY and not np.any(np.abs(vec) > TOL):
            raise ValueError("a feasibility cut needs a nonzero ray")
        vec = np.maximum(vec, 0.0)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    def value(self, inst: MilpInstance, x) -> float:
        """(b - A x) . vector."""
        return float(inst.rhs_residual(x) @ self.vector)

    def same_as(self, other: "Cut", tol: float = TOL) -> bool:
        return (
            self.kind is other.kind
            and self.vector.shape == other.vector.shape
            and bool(np.all(np.abs(self.vector - other.vector) <= tol))
        )


@dataclass
class MasterState:
    """Known extreme points and rays, kept in insertion order."""

    cuts: list[Cut] = field(default_factory=list)

    @property
    def optimality_cuts(self) -> list[Cut]:
        return [c for c in self.cuts if c.kind is CutKind.OPTIMALITY]

    @property
    def feasibility_cuts(self) -> list[Cut]:
        return [c for c in self.cuts if c.kind is CutKind.FEASIBILITY]

    def add(self, cut: Cut) -> bool:
        """Append ``cut`` unless an identical one is stored; returns whether it was added."""
        if any(cut.same_as(old) for old in self.cuts):
            log.info("dropping duplicate %s cut %s", cut.kind.value, cut.vector.tolist())
            return False
        self.cuts.append(cut)
        return True

    def __len__(self):
        return len(self.cuts)


def _check_xy(inst: MilpInstance, x, y):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != (inst.n,):
        raise DimensionError(f"x has length {x.size}, expected {inst.n}")
    if y.shape != (inst.p,):
        raise DimensionError(f"y has length {y.size}, expected {inst.p}")
    return x, y


def evaluate_objective(inst: MilpInstance, x, y) -> float:
    x, y = _check_xy(inst, x, y)
    return float(inst.c @ x + inst.h @ y)


class Violation(NamedTuple):
    kind: str  # "row" for A x + G y <= b, "bound" for y >= 0
    index: int
    amount: float


class FeasibilityCheck(NamedTuple):
    feasible: bool
    violations: list[Violation]

    def __bool__(self):
        return self.feasible


def check_feasible(inst: MilpInstance, x, y, tol: float = TOL) -> FeasibilityCheck:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x, y = _check_xy(inst, x, y)
    excess = inst.A @ x + inst.G @ y - inst.b
    out = [Violation("row", int(i), float(excess[i])) for i in np.flatnonzero(excess > tol)]
    out += [Violation("bound", int(j), float(-y[j])) for j in np.flatnonzero(y < -tol)]
    return FeasibilityCheck(not out, out)


@dataclass
class OracleResult:
    status: Status
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    objective: float | None = None


def binary_points(n: int):
    """All of {0,1}^n in lexicographic order."""
    for bits in itertools.product((0, 1), repeat=n):
        yield np.array(bits, dtype=np.float64)


def brute_force_milp(inst: MilpInstance) -> OracleResult:
    """Enumerate every x and solve the LP over y at each one."""
    if inst.n > MAX_ORACLE_BINARIES:
        raise TooLarge(f"brute force limited to n <= {MAX_ORACLE_BINARIES} (got {inst.n})")
    from .subproblem import solve_primal_lp

    best = OracleResult(Status.INFEASIBLE)
    for x in binary_points(inst.n):
        lp = solve_primal_lp(inst, x)
        if lp.status is Status.UNBOUNDED:
            return OracleResult(Status.UNBOUNDED, x=x)
        if lp.status is not Status.OPTIMAL:
            continue
        value = float(inst.c @ x) + lp.value
        if best.objective is None or value > best.objective + TOL:
            best = OracleResult(Status.OPTIMAL, x=x, y=lp.y, objective=value)
    return best


def rationalize(values: Sequence[float], max_denominator: int = 10**6, tol: float = 1e-9):
    """Common denominator making every value an integer, or None.

    Values are matched against fractions with denominator at most
    ``max_denominator``; a miss beyond ``tol`` means the data is not
    (recognisably) rational.
    """
    from fractions import Fraction

    denom = 1
    for v in values:
        frac = Fraction(float(v)).limit_denominator(max_denominator)
        if abs(float(frac) - v) > tol * max(1.0, abs(v)):
            return None
        denom = math.lcm(denom, frac.denominator)
    return denom
