"""Dual subproblem and primal LP over the continuous variables.

For a fixed binary vector x the Benders subproblem is

    z(x) = min (b - A x).u   s.t.  G^T u >= h,  u >= 0

Both it and its primal partner (max h.y s.t. G y <= b - A x, y >= 0)
are solved with a dense two-phase tableau simplex. Unbounded runs
return the recession direction of the blocking column, which is an
extreme ray of the feasible region.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, NumericalError
from .model import MilpInstance, Status

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
#: degenerate pivots tolerated before switching to Bland's rule
BLAND_AFTER = 50


@dataclass
class LPResult:
    status: Status
    z: np.ndarray | None = None  # optimal basic solution
    value: float | None = None
    ray: np.ndarray | None = None  # improving direction when unbounded
    basis: list[int] | None = None


class _Tableau:
    def __init__(self, A, b, n_cols):
        m = A.shape[0]
        self.T = np.zeros((m + 1, n_cols + 1))
        self.T[:m, : A.shape[1]] = A
        self.T[:m, -1] = b
        self.basis = [-1] * m
        self.degenerate = 0
        self.bland = False

    @property
    def m(self):
        return self.T.shape[0] - 1

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j

    def run(self, allowed: np.ndarray, max_iter: int):
        """Minimize the objective row; returns None when optimal or the blocking column."""
        T = self.T
        for _ in range(max_iter):
            reduced = T[-1, :-1]
            candidates = np.flatnonzero(allowed & (reduced < -PIVOT_TOL))
            if candidates.size == 0:
                return None
            if self.bland:
                j = int(candidates[0])
            else:
                # most negative reduced cost, lowest index on ties
                j = int(candidates[np.argmin(reduced[candidates])])
            col = T[:-1, j]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return j
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            if best <= PIVOT_TOL:
                self.degenerate += 1
                if self.degenerate > BLAND_AFTER and not self.bland:
                    log.debug("switching to Bland's rule after %d degenerate pivots", self.degenerate)
                    self.bland = True
            self.pivot(r, j)
        raise NumericalError(f"simplex did not terminate within {max_iter} pivots")


def simplex(c, A_eq, b_eq) -> LPResult:
    """Minimize c.z subject to A_eq z = b_eq, z >= 0."""
    c = np.asarray(c, dtype=np.float64)
    A = np.array(A_eq, dtype=np.float64).reshape(-1, c.size)
    b = np.array(b_eq, dtype=np.float64).reshape(-1)
    m, n = A.shape
    if b.shape != (m,):
        raise DimensionError("right-hand side length does not match constraint rows")
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    max_iter = 50 * (m + n) + 1000

    # phase 1: one artificial per row
    tab = _Tableau(np.hstack([A, np.eye(m)]), b, n + m)
    tab.basis = list(range(n, n + m))
    tab.T[-1, :n] = -A.sum(axis=0)
    tab.T[-1, -1] = -b.sum()
    everything = np.ones(n + m, dtype=bool)
    if tab.run(everything, max_iter) is not None:
        raise NumericalError("phase 1 reported unbounded, which cannot happen")
    if -tab.T[-1, -1] > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult(Status.INFEASIBLE)

    # drive artificials out of the basis; rows that cannot pivot are redundant
    r = 0
    while r < tab.m:
        if tab.basis[r] >= n:
            row = tab.T[r, :n]
            nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
            if nz.size:
                tab.pivot(r, int(nz[0]))
            else:
                tab.T = np.delete(tab.T, r, axis=0)
                del tab.basis[r]
                continue
        r += 1

    # phase 2
    T = np.delete(tab.T, np.s_[n : n + m], axis=1)
    tab.T = T
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(tab.basis):
        if c[j] != 0.0:
            T[-1] -= c[j] * T[i]
    tab.degenerate = 0
    tab.bland = False
    blocking = tab.run(np.ones(n, dtype=bool), max_iter)

    z = np.zeros(n)
    for i, j in enumerate(tab.basis):
        z[j] = T[i, -1]
    z = np.maximum(z, 0.0)
    if blocking is not None:
        ray = np.zeros(n)
        ray[blocking] = 1.0
        for i, j in enumerate(tab.basis):
            ray[j] = -T[i, blocking]
        ray[np.abs(ray) <= PIVOT_TOL] = 0.0
        return LPResult(Status.UNBOUNDED, z=z, ray=ray, basis=list(tab.basis))
    return LPResult(Status.OPTIMAL, z=z, value=float(c @ z), basis=list(tab.basis))


# -- dual subproblem ---------------------------------------------------------


@dataclass
class DualOptimal:
    u: np.ndarray
    z: float


@dataclass
class DualUnbounded:
    r: np.ndarray

    @property
    def z(self):
        return -np.inf


@dataclass
class DualInfeasible:
    pass


DualOutcome = Union[DualOptimal, DualUnbounded, DualInfeasible]


def _binary_x(inst: MilpInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape != (inst.n,):
        raise DimensionError(f"x has length {x.size}, expected {inst.n}")
    return x


def _normalize_ray(r: np.ndarray) -> np.ndarray:
    r = np.where(np.abs(r) <= PIVOT_TOL, 0.0, r)
    return r / np.abs(r).max()


def solve_dual(inst: MilpInstance, x) -> DualOutcome:
    d = inst.rhs_residual(_binary_x(inst, x))
    m, p = inst.m, inst.p
    # G^T u - s = h with surplus s >= 0
    A_eq = np.hstack([inst.G.T, -np.eye(p)])
    res = simplex(np.concatenate([d, np.zeros(p)]), A_eq, inst.h)
    if res.status is Status.INFEASIBLE:
        return DualInfeasible()
    if res.status is Status.UNBOUNDED:
        return DualUnbounded(_normalize_ray(res.ray[:m]))
    u = res.z[:m]
    return DualOptimal(u=u, z=float(d @ u))


@dataclass
class PrimalResult:
    status: Status
    y: np.ndarray | None = None
    value: float | None = None


def solve_primal_lp(inst: MilpInstance, x) -> PrimalResult:
    d = inst.rhs_residual(_binary_x(inst, x))
    m, p = inst.m, inst.p
    res = simplex(np.concatenate([-inst.h, np.zeros(m)]), np.hstack([inst.G, np.eye(m)]), d)
    if res.status is Status.OPTIMAL:
        y = res.z[:p]
        return PrimalResult(Status.OPTIMAL, y=y, value=float(inst.h @ y))
    return PrimalResult(res.status)


def farkas_ray(inst: MilpInstance, x) -> np.ndarray | None:
    """A ray r >= 0 with G^T r >= 0 and (b - A x).r < 0, if one exists.

    Such an r certifies that no y >= 0 satisfies G y <= b - A x. It is
    needed when the dual polyhedron is empty, so the dual simplex has no
    vertex to start from. The normalisation sum(r) <= 1 makes the search
    bounded; nonzero vertices of the slice are extreme rays of the cone.
    """
    d = inst.rhs_residual(_binary_x(inst, x))
    m, p = inst.m, inst.p
    A_eq = np.zeros((p + 1, m + p + 1))
    A_eq[:p, :m] = inst.G.T
    A_eq[:p, m : m + p] = -np.eye(p)
    A_eq[p, :m] = 1.0
    A_eq[p, -1] = 1.0
    b_eq = np.zeros(p + 1)
    b_eq[p] = 1.0
    res = simplex(np.concatenate([d, np.zeros(p + 1)]), A_eq, b_eq)
    if res.status is not Status.OPTIMAL or res.value >= -FEAS_TOL:
        return None
    return _normalize_ray(res.z[:m])
