"""Benders loop: QUBO master solves alternating with dual LP subproblems.

Each iteration compiles the master (max c.x + t under the stored cuts)
into a QUBO, samples it, decodes (x, t_upper), then solves the dual LP
at x. An optimal dual gives t_lower = z(x) and possibly an optimality
cut; an unbounded dual gives a feasibility cut from its ray. The loop
stops once |t_upper - t_lower| < epsilon.

Two adjustments keep the binary master exact:

* the t grid is refined whenever an optimality cut has a denominator
  the current grid cannot represent, so ``min_k cut_k(x)`` is always a
  grid point and x is never mis-ranked by rounding;
* the t range is widened when the negative block is too short to admit
  some x the cuts still allow.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .encoding import TEncoding, choose_default_encoding, encoding_for_range, t_bounds, t_range
from .errors import ConfigError, InfeasibleConstraint, NumericalError
from .model import (
    MAX_ORACLE_BINARIES,
    Cut,
    CutKind,
    MasterState,
    MilpInstance,
    Status,
    binary_points,
    check_feasible,
    evaluate_objective,
)
from .qubo import PenaltyConfig, auto_penalty, build_master_qubo, cut_denominator, verify_sample
from .samplers import MAX_EXHAUSTIVE_BITS, SamplerParams, sample
from .subproblem import DualInfeasible, DualOptimal, DualUnbounded, farkas_ray, solve_dual, solve_primal_lp

log = logging.getLogger(__name__)


class CutAdded(str, enum.Enum):
    EXTREME_POINT = "ExtremePoint"
    EXTREME_RAY = "ExtremeRay"
    NONE = "None"


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float = 1e-6
    max_iters: int = 50
    encoding: TEncoding | None = None  # None: derived from the instance
    penalties: PenaltyConfig = field(default_factory=PenaltyConfig)
    sampler: SamplerParams = field(default_factory=SamplerParams)
    inject_x_rows: bool = False
    refine_grid: bool = True
    # the grid may become at most 2^this finer than the starting one
    max_refine_bits: int = 8

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.max_refine_bits < 0:
            raise ConfigError("max_refine_bits must be nonnegative")


@dataclass
class IterationRecord:
    iter: int
    x: list
    t_upper: float
    t_lower: float
    cut_added: CutAdded
    qubo_size: int
    sampler_energy: float
    master_feasible: bool
    penalty_used: float
    note: str = ""

    def to_json(self) -> dict:
        return {
            "iter": self.iter,
            "x": [int(v) for v in self.x],
            "t_upper": _json_num(self.t_upper),
            "t_lower": _json_num(self.t_lower),
            "cut_added": self.cut_added.value,
            "qubo_size": self.qubo_size,
            "sampler_energy": _json_num(self.sampler_energy),
            "master_feasible": self.master_feasible,
            "penalty_used": _json_num(self.penalty_used),
            "note": self.note,
        }


@dataclass
class SolveReport:
    status: Status
    x_star: np.ndarray | None = None
    y_star: np.ndarray | None = None
    objective: float | None = None
    trace: list[IterationRecord] = field(default_factory=list)
    certified: bool = True
    encoding: TEncoding | None = None

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "x_star": None if self.x_star is None else [int(v) for v in self.x_star],
            "y_star": None if self.y_star is None else [_json_num(v) for v in self.y_star],
            "objective": _json_num(self.objective),
            "iterations": self.iterations,
            "certified": self.certified,
        }


def _json_num(v):
    """JSON-friendly number: None for -inf/+inf/None, int when integral."""
    if v is None or not math.isfinite(v):
        return None
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return int(v)
    return round(v, 12)


def bounds_gap(t_upper: float, t_lower: float) -> float:
    if math.isinf(t_upper) or math.isinf(t_lower):
        return math.inf
    return abs(t_upper - t_lower)


def write_trace(report: SolveReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in report.trace:
            fh.write(json.dumps(rec.to_json()) + "\n")
        fh.write(json.dumps(report.summary()) + "\n")


class _Stop(Exception):
    def __init__(self, status: Status, note: str):
        super().__init__(note)
        self.status = status
        self.note = note


def _two_adic(k: int) -> int:
    return (k & -k).bit_length() - 1


class _Solver:
    def __init__(self, inst: MilpInstance, cfg: SolveConfig):
        self.inst = inst
        self.cfg = cfg
        self.params = cfg.sampler
        self.state = MasterState()
        self.multiplier = 1.0
        self.stalls = 0
        self.certified = True
        self.exact_master = False
        self.trace: list[IterationRecord] = []
        self.incumbent: tuple[float, np.ndarray] | None = None
        self.lo, self.hi = t_bounds(inst)
        if cfg.encoding is None:
            self.base = choose_default_encoding(inst)
        else:
            self.base = cfg.encoding
            t_min, t_max = t_range(self.base)
            if t_max < self.hi:
                log.warning("t register tops out at %g below the bound %g on z(x)", t_max, self.hi)
                self.certified = False
        self.enc = self.base
        # interval of t values the register must cover
        self.span = (self.lo - 1.0, self.hi + 1.0) if cfg.encoding is None else t_range(self.base)
        if cfg.inject_x_rows:
            for r in inst.x_only_rows():
                vec = np.zeros(inst.m)
                vec[r] = 1.0
                self.state.add(Cut(CutKind.FEASIBILITY, vec))
        self._points = None

    # -- encoding management ----------------------------------------------

    def _refine_grid(self):
        if not self.cfg.refine_grid:
            return
        base = self.base.resolution
        limit = base * 2**self.cfg.max_refine_bits
        R = base
        for cut in self.state.optimality_cuts:
            den = cut_denominator(self.inst, cut)
            if den is None or math.lcm(R, den) > limit or not self._fits(math.lcm(R, den)):
                if self.certified:
                    log.warning("optimality cut needs a grid finer than allowed; result will not be certified")
                self.certified = False
                continue
            R = math.lcm(R, den)
        if R == self.enc.resolution:
            return
        f = _two_adic(R)
        self.enc = encoding_for_range(*self.span, m_frac=f, denom=R >> f)
        log.info("t grid refined to %s", self.enc)

    def _fits(self, resolution: int) -> bool:
        """Would a grid of 1/resolution keep the exhaustive search within its limit?"""
        if self.params.backend != "exhaustive":
            return True
        f = _two_adic(resolution)
        enc = encoding_for_range(*self.span, m_frac=f, denom=resolution >> f)
        return self.inst.n + enc.M <= MAX_EXHAUSTIVE_BITS

    def _widen_down(self, value: float):
        lo, hi = self.span
        self.span = (min(lo, value - 1.0), hi)
        self.enc = encoding_for_range(*self.span, self.enc.m_frac, self.enc.denom)
        log.info("t range widened to %s", self.enc)

    # -- enumeration helpers (n small) --------------------------------------

    def _cut_values(self):
        """(fcut-feasible mask, min optimality-cut value) for every x, or None if n is large."""
        inst = self.inst
        if inst.n > MAX_ORACLE_BINARIES:
            return None
        if self._points is None:
            self._points = np.array(list(binary_points(inst.n)))
        D = inst.b[None, :] - self._points @ inst.A.T
        ok = np.ones(len(D), dtype=bool)
        v = np.full(len(D), np.inf)
        for cut in self.state.cuts:
            vals = D @ cut.vector
            if cut.kind is CutKind.FEASIBILITY:
                ok &= vals >= -1e-9
            else:
                v = np.minimum(v, vals)
        return ok, v

    def _diagnose_master(self) -> str:
        """Why did the master produce no cut-satisfying sample?"""
        cv = self._cut_values()
        if cv is None:
            return "penalty"
        ok, v = cv
        if not ok.any():
            return "infeasible"
        need = float(v[ok].max())
        t_min, _ = t_range(self.enc)
        if need < t_min - 1e-9:
            self._widen_down(need)
            return "widened"
        return "penalty"

    def _excluded_better(self, value: float) -> float | None:
        """Lowest cut value of an x the t range shuts out that might beat ``value``."""
        cv = self._cut_values()
        t_min, _ = t_range(self.enc)
        if cv is None:
            if np.maximum(self.inst.c, 0).sum() + t_min > value + self.cfg.epsilon:
                self.certified = False
            return None
        ok, v = cv
        upper = self._points @ self.inst.c + v
        shut = ok & (v < t_min - 1e-9) & (upper > value + self.cfg.epsilon)
        return float(v[shut].min()) if shut.any() else None

    # -- master --------------------------------------------------------------

    def _penalty_value(self) -> float:
        pen = self.cfg.penalties
        if pen.mode == "auto":
            base = auto_penalty(self.inst, self.state, self.enc)
        else:
            base = float(np.atleast_1d(pen.fixed_value)[0])
        return base * self.multiplier

    def _solve_master(self):
        pen = self.cfg.penalties
        escalations = 0
        while True:
            try:
                qubo, layout = build_master_qubo(self.inst, self.state, self.enc, pen, self.multiplier)
            except InfeasibleConstraint:
                verdict = self._diagnose_master()
                if verdict == "widened":
                    continue
                raise _Stop(Status.INFEASIBLE, "no x satisfies the feasibility cuts")
            groups = [range(b.start, b.stop) for b in layout.slack_blocks]
            res = sample(qubo, self.params, groups)
            ver = verify_sample(res.bits, layout, self.inst, self.state, self.enc)
            if ver.feasible:
                # only an exact master optimum certifies the stopping point
                self.exact_master = self.params.backend == "exhaustive"
                return qubo, layout, res, ver
            verdict = self._diagnose_master()
            if verdict == "infeasible":
                raise _Stop(Status.INFEASIBLE, "no x satisfies the feasibility cuts")
            if verdict == "widened":
                continue
            if escalations >= pen.max_escalations:
                self._record_failure(qubo, res, ver)
                raise _Stop(Status.MASTER_STUCK, "master sample violates cuts after penalty escalation")
            escalations += 1
            self.multiplier *= pen.escalation_factor
            log.info("master sample violates %d cuts; penalty multiplier now %g", len(ver.violated), self.multiplier)

    def _record_failure(self, qubo, res, ver):
        self.trace.append(
            IterationRecord(
                iter=len(self.trace) + 1,
                x=ver.x.tolist(),
                t_upper=ver.t,
                t_lower=-math.inf,
                cut_added=CutAdded.NONE,
                qubo_size=qubo.N,
                sampler_energy=res.energy,
                master_feasible=False,
                penalty_used=self._penalty_value(),
                note="verification failed",
            )
        )

    # -- main loop -----------------------------------------------------------

    def _stall(self, notes: list[str]):
        self.stalls += 1
        if self.stalls == 1:
            self.multiplier *= self.cfg.penalties.escalation_factor
            notes.append("stall: penalty escalated")
            return
        if self.params.backend != "exhaustive" and self._last_core_size <= MAX_EXHAUSTIVE_BITS:
            self.params = replace(self.params, backend="exhaustive")
            notes.append("stall: switched to exhaustive")
            return
        raise _Stop(Status.MASTER_STUCK, "master repeats a point without producing a new cut")

    def _iterate(self, it: int):
        inst, eps = self.inst, self.cfg.epsilon
        self._refine_grid()
        qubo, layout, res, ver = self._solve_master()
        self._last_core_size = inst.n + self.enc.M
        x, t_upper = ver.x, ver.t
        first = it == 1
        notes: list[str] = []
        cut_kind = CutAdded.NONE
        added = False
        t_lower = -math.inf
        sub = solve_dual(inst, x)
        if isinstance(sub, DualInfeasible):
            primal = solve_primal_lp(inst, x)
            if primal.status is Status.UNBOUNDED:
                self._append(it, x, t_upper, t_lower, cut_kind, qubo, res, "primal unbounded")
                raise _Stop(Status.UNBOUNDED, "dual polyhedron is empty and the LP at x is unbounded")
            ray = farkas_ray(inst, x)
            if ray is None:
                raise NumericalError("empty dual polyhedron but no infeasibility certificate at x")
            added = self.state.add(Cut(CutKind.FEASIBILITY, ray))
            cut_kind = CutAdded.EXTREME_RAY
            notes.append("dual infeasible; Farkas ray")
        elif isinstance(sub, DualUnbounded):
            added = self.state.add(Cut(CutKind.FEASIBILITY, sub.r))
            cut_kind = CutAdded.EXTREME_RAY
        else:
            t_lower = sub.z
            value = float(inst.c @ x) + sub.z
            if self.incumbent is None or value > self.incumbent[0] + 1e-9:
                self.incumbent = (value, x.copy())
            if sub.z < t_upper - eps and not first:
                added = self.state.add(Cut(CutKind.OPTIMALITY, sub.u))
                cut_kind = CutAdded.EXTREME_POINT
        if cut_kind is not CutAdded.NONE and not added:
            notes.append("duplicate cut dropped")
            cut_kind = CutAdded.NONE

        stop = None
        if isinstance(sub, DualOptimal):
            if bounds_gap(t_upper, t_lower) < eps:
                stop = "converged"
            elif sub.z >= t_upper - eps:
                stop = "safeguard"
        if stop:
            shut = self._excluded_better(float(inst.c @ x) + sub.z)
            if shut is not None:
                self._widen_down(shut)
                notes.append("t range widened")
                stop = None
            else:
                notes.append(stop)
        elif not added and not first:
            self._stall(notes)
        self._append(it, x, t_upper, t_lower, cut_kind, qubo, res, "; ".join(notes))
        return x if stop else None

    def _append(self, it, x, t_upper, t_lower, cut_kind, qubo, res, note):
        self.trace.append(
            IterationRecord(
                iter=it,
                x=x.tolist(),
                t_upper=t_upper,
                t_lower=t_lower,
                cut_added=cut_kind,
                qubo_size=qubo.N,
                sampler_energy=res.energy,
                master_feasible=True,
                penalty_used=self._penalty_value(),
                note=note,
            )
        )

    def _report(self, status: Status, x=None) -> SolveReport:
        certified = self.certified and self.exact_master
        rep = SolveReport(status, trace=self.trace, certified=certified, encoding=self.enc)
        if x is None:
            return rep
        rep.x_star = np.asarray(x, dtype=np.float64)
        lp = solve_primal_lp(self.inst, rep.x_star)
        if lp.status is Status.OPTIMAL:
            rep.y_star = lp.y
            rep.objective = evaluate_objective(self.inst, rep.x_star, lp.y)
        return rep

    def run(self) -> SolveReport:
        for it in range(1, self.cfg.max_iters + 1):
            try:
                x = self._iterate(it)
            except _Stop as stop:
                log.info("stopping: %s", stop.note)
                if stop.status is Status.UNBOUNDED:
                    return self._report(stop.status, self.trace[-1].x)
                if stop.status is Status.MASTER_STUCK and self.incumbent is not None:
                    return self._report(stop.status, self.incumbent[1])
                return self._report(stop.status)
            if x is not None:
                rep = self._report(Status.OPTIMAL, x)
                if rep.y_star is None or not check_feasible(self.inst, rep.x_star, rep.y_star, 1e-6):
                    raise NumericalError("converged point fails validation")
                return rep
        log.info("iteration limit %d reached", self.cfg.max_iters)
        return self._report(Status.ITERATION_LIMIT, None if self.incumbent is None else self.incumbent[1])


def run(inst: MilpInstance, cfg: SolveConfig | None = None) -> SolveReport:
    """Solve ``inst`` with the hybrid Benders loop."""
    return _Solver(inst, cfg or SolveConfig()).run()
