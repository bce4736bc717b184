"""Fixed-point binary representation of the master's continuous variable t.

Bit layout of the register ``w`` (length ``M``)::

    w[0 .. m_frac+m_plus]      positive block, weights 2^-m_frac .. 2^m_plus
    w[m_frac+m_plus+1 .. M-1]  negative block, weights -2^0 .. -2^m_minus

``denom`` divides every weight. It is 1 for the plain register and lets
the driver put t on a grid of 2^-m_frac / denom when cut values are
rationals with odd denominators.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InfeasibleConstraint
from .model import MilpInstance, Status

log = logging.getLogger(__name__)

#: bound assumed for each y when nothing better is known
DEFAULT_Y_BOUND = 10.0


@dataclass(frozen=True)
class TEncoding:
    m_plus: int
    m_frac: int = 0
    m_minus: int = 0
    denom: int = 1

    def __post_init__(self):
        if min(self.m_plus, self.m_frac, self.m_minus) < 0:
            raise ValueError("bit counts must be nonnegative")
        if self.denom < 1:
            raise ValueError("denom must be a positive integer")

    @property
    def M(self) -> int:
        return self.m_plus + self.m_frac + self.m_minus + 2

    @property
    def n_positive(self) -> int:
        return self.m_plus + self.m_frac + 1

    @property
    def grid(self) -> float:
        """Spacing of representable t values."""
        return 2.0 ** -self.m_frac / self.denom

    @property
    def resolution(self) -> int:
        """Integer 1 / grid; every representable t times this is an integer."""
        return 2**self.m_frac * self.denom

    def raw_weights(self) -> np.ndarray:
        """Register weights before division by ``denom`` (all dyadic)."""
        pos = [2.0**i for i in range(-self.m_frac, self.m_plus + 1)]
        neg = [-(2.0**j) for j in range(self.m_minus + 1)]
        return np.array(pos + neg)

    def weights(self) -> np.ndarray:
        return self.raw_weights() / self.denom


def decode_t(w, enc: TEncoding) -> float:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.size != enc.M:
        raise DimensionError(f"w has {w.size} bits, encoding needs {enc.M}")
    return float(w @ enc.raw_weights()) / enc.denom


def t_range(enc: TEncoding) -> tuple[float, float]:
    t_max = (2.0 ** (enc.m_plus + 1) - 2.0**-enc.m_frac) / enc.denom
    t_min = -(2.0 ** (enc.m_minus + 1) - 1) / enc.denom
    return t_min, t_max


def encode_t(value: float, enc: TEncoding) -> np.ndarray:
    """Greedy bit pattern for a grid value: positive block first, then negative."""
    units = value * enc.resolution
    k = round(units)
    if abs(units - k) > 1e-9 * max(1.0, abs(units)):
        raise ValueError(f"{value} is not on the grid of {enc}")
    t_min, t_max = t_range(enc)
    if not (t_min - 1e-12 <= value <= t_max + 1e-12):
        raise ValueError(f"{value} outside representable range [{t_min}, {t_max}]")
    # in grid units positive bit i weighs 2^i and negative bit j weighs -2^(j + m_frac)
    scale = 2**enc.m_frac
    neg = -(k // scale) if k < 0 else 0
    pos = k + neg * scale
    w = np.zeros(enc.M)
    for i in range(enc.n_positive - 1, -1, -1):
        if pos >= 2**i:
            w[i] = 1.0
            pos -= 2**i
    for j in range(enc.m_minus, -1, -1):
        if neg >= 2**j:
            w[enc.n_positive + j] = 1.0
            neg -= 2**j
    return w


def slack_width(rhs: float, min_lhs: float) -> int:
    """ceil(log2(rhs - min_lhs)), clamped at 0.

    The register then spans l = 0..l_bar with weights 2^l. Use
    :func:`slack_bits` for the register size, which is 0 when the gap is
    not positive.
    """
    gap = rhs - min_lhs
    if gap < -1e-9:
        raise InfeasibleConstraint(f"constraint gap {gap} is negative over the binary box")
    if gap <= 1.0 + 1e-9:
        if 1e-9 < gap < 1.0 - 1e-9:
            log.warning("sub-unit slack gap %g cannot be absorbed exactly by integer slacks", gap)
        return 0
    nearest = round(gap)
    if abs(gap - nearest) <= 1e-9 * gap:
        gap = nearest
    return (math.ceil(gap) - 1).bit_length()


def slack_bits(rhs: float, min_lhs: float) -> int:
    gap = rhs - min_lhs
    if gap <= 1e-9:
        slack_width(rhs, min_lhs)  # raises on a negative gap
        return 0
    return slack_width(rhs, min_lhs) + 1


def encoding_for_range(lo: float, hi: float, m_frac: int = 0, denom: int = 1) -> TEncoding:
    """Smallest register at the given resolution whose range covers [lo, hi]."""
    m_plus = 0
    while (2.0 ** (m_plus + 1) - 2.0**-m_frac) / denom < hi:
        m_plus += 1
    m_minus = 0
    while -(2.0 ** (m_minus + 1) - 1) / denom > lo:
        m_minus += 1
    return TEncoding(m_plus, m_frac, m_minus, denom)


def y_bounds(inst: MilpInstance, default: float = DEFAULT_Y_BOUND) -> np.ndarray:
    """Upper bound per y from rows that involve a single y (e.g. y_j <= x_i)."""
    bounds = np.full(inst.p, np.inf)
    for r in range(inst.m):
        nz = np.flatnonzero(inst.G[r])
        if nz.size == 1 and inst.G[r, nz[0]] > 0:
            j = nz[0]
            worst_rhs = inst.b[r] - np.minimum(inst.A[r], 0).sum()
            bounds[j] = min(bounds[j], max(worst_rhs, 0.0) / inst.G[r, j])
    bounds[np.isinf(bounds)] = default
    return bounds


def t_bounds(inst: MilpInstance, y_bound: float = DEFAULT_Y_BOUND) -> tuple[float, float]:
    """Interval guaranteed to contain z(x) for every feasible x.

    Each side comes from the LP relaxation over x in [0,1]^n when that
    direction is bounded, otherwise from sum |h_j| U_j with U_j from
    :func:`y_bounds` (a guess; the driver checks it at convergence).
    """
    from .subproblem import simplex

    n, p, m = inst.n, inst.p, inst.m
    if p == 0:
        return 0.0, 0.0
    # variables (x, y, row slacks, x-upper slacks)
    A_eq = np.zeros((m + n, n + p + m + n))
    A_eq[:m, :n] = inst.A
    A_eq[:m, n : n + p] = inst.G
    A_eq[:m, n + p : n + p + m] = np.eye(m)
    A_eq[m:, :n] = np.eye(n)
    A_eq[m:, n + p + m :] = np.eye(n)
    b_eq = np.concatenate([inst.b, np.ones(n)])
    cost = np.zeros(n + p + m + n)
    cost[n : n + p] = -inst.h
    hi = simplex(cost, A_eq, b_eq)
    lo = simplex(-cost, A_eq, b_eq)
    U = y_bounds(inst, y_bound)
    if hi.status is Status.OPTIMAL:
        upper = -hi.value
    else:
        # unbounded relaxation: no optimality cut can ever exist, so any value works
        upper = float(np.maximum(inst.h, 0) @ U)
    if lo.status is Status.OPTIMAL:
        lower = lo.value
    else:
        log.info("no LP lower bound on t; using heuristic y bounds %s", U.tolist())
        lower = float(-(np.maximum(-inst.h, 0) @ U))
    return lower, upper


def choose_default_encoding(inst: MilpInstance, y_bound: float = DEFAULT_Y_BOUND) -> TEncoding:
    lo, hi = t_bounds(inst, y_bound)
    m_frac = 0 if inst.is_integral() else 4
    return encoding_for_range(lo - 1.0, hi + 1.0, m_frac=m_frac)
