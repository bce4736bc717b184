"""Compile the binarized Benders master problem into a QUBO.

The master over binary x and the t-register w is

    max  c.x + t(w)
    s.t. t(w) + (u_k^T A) x <= b.u_k      for every known extreme point u_k
         (r_j^T A) x <= b.r_j             for every known extreme ray r_j

Each cut becomes a squared-residual penalty with a binary slack register
of power-of-two weights, and the objective is negated so that a QUBO
minimizer is a master maximizer.

Cut residuals are kept in integer units: a cut whose coefficients are
rationals with denominator D is multiplied by a factor sigma so that
every coefficient, including the t-register weights, becomes an integer.
The slack register then counts in steps of 1/sigma of the cut's natural
units, so every feasible residual can be zeroed exactly. With integral
duals and ``m_frac = 0`` the factor is 1 and this is the textbook form.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, NamedTuple, Sequence

import numpy as np

from .encoding import TEncoding, decode_t, slack_bits, t_range
from .errors import ConfigError, DimensionError
from .model import Cut, CutKind, MasterState, MilpInstance, rationalize

log = logging.getLogger(__name__)

VERIFY_TOL = 1e-6
# a cut needing a finer integer unit than resolution * this is rounded instead
MAX_CUT_REFINEMENT = 2**12


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Symmetric QUBO with a constant term.

    ``energy(bits) = bits.Q.bits + offset``. ``scale`` is the factor
    between energy and the master's penalized objective (1 unless the
    t-register uses a non-dyadic grid).
    """

    Q: np.ndarray
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        Q = np.array(self.Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise ValueError("Q has non-finite entries")
        if not np.array_equal(Q, Q.T):
            Q = (Q + Q.T) / 2
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)

    @property
    def N(self) -> int:
        return self.Q.shape[0]


def qubo_energy(qubo: QuboMatrix, bits) -> float:
    b = np.asarray(bits, dtype=np.float64).reshape(-1)
    if b.size != qubo.N:
        raise DimensionError(f"bit vector has length {b.size}, QUBO has {qubo.N} variables")
    return float(b @ qubo.Q @ b) + qubo.offset


# -- layout ------------------------------------------------------------------


class Block(NamedTuple):
    name: str  # "x", "w" or "slack"
    start: int
    size: int
    cut: int | None = None  # cut index for slack blocks

    @property
    def stop(self):
        return self.start + self.size


@dataclass
class VariableLayout:
    n: int
    M: int
    blocks: list[Block] = field(default_factory=list)

    @classmethod
    def build(cls, n: int, M: int, slack_sizes: Sequence[int]) -> "VariableLayout":
        blocks = [Block("x", 0, n), Block("w", n, M)]
        pos = n + M
        for k, size in enumerate(slack_sizes):
            blocks.append(Block("slack", pos, size, k))
            pos += size
        return cls(n, M, blocks)

    @property
    def N(self) -> int:
        return self.blocks[-1].stop

    @property
    def x_slice(self) -> slice:
        return slice(0, self.n)

    @property
    def w_slice(self) -> slice:
        return slice(self.n, self.n + self.M)

    @property
    def slack_blocks(self) -> list[Block]:
        return [b for b in self.blocks if b.name == "slack"]

    def decode(self, bits):
        bits = np.asarray(bits, dtype=np.float64).reshape(-1)
        if bits.size != self.N:
            raise DimensionError(f"expected {self.N} bits, got {bits.size}")
        return bits[self.x_slice].copy(), bits[self.w_slice].copy()

    def encode(self, x, w, slacks: Sequence[Sequence[int]] | None = None) -> np.ndarray:
        bits = np.zeros(self.N)
        bits[self.x_slice] = x
        bits[self.w_slice] = w
        for blk, s in zip(self.slack_blocks, slacks or ()):
            bits[blk.start : blk.stop] = s
        return bits

    def names(self) -> list[str]:
        out = [f"x[{i}]" for i in range(self.n)] + [f"w[{i}]" for i in range(self.M)]
        for blk in self.slack_blocks:
            out += [f"s[{blk.cut}][{l}]" for l in range(blk.size)]
        return out


# -- penalties ---------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyConfig:
    mode: str = "auto"  # "auto" or "fixed"
    fixed_value: float | Sequence[float] = 1.0
    escalation_factor: float = 10.0
    max_escalations: int = 3

    def __post_init__(self):
        if self.mode not in ("auto", "fixed"):
            raise ConfigError(f"unknown penalty mode {self.mode!r}")
        if np.any(np.asarray(self.fixed_value, dtype=float) <= 0):
            raise ConfigError("penalty values must be positive")
        if self.escalation_factor <= 1:
            raise ConfigError("escalation_factor must exceed 1")
        if self.max_escalations < 0:
            raise ConfigError("max_escalations must be nonnegative")


def auto_penalty(inst: MilpInstance, state: MasterState, enc: TEncoding) -> float:
    """2 * (objective range over the box) / grid^2.

    A residual off by one grid step then costs more than the whole
    spread of c.x + t, so the minimizer never trades feasibility for
    objective.
    """
    t_min, t_max = t_range(enc)
    spread = float(np.abs(inst.c).sum()) + (t_max - t_min)
    return 2.0 * spread / enc.grid**2


@dataclass
class QuadraticTerms:
    linear: dict = field(default_factory=dict)
    quadratic: dict = field(default_factory=dict)
    constant: float = 0.0


def penalize_inequality(
    coeffs: Mapping[Hashable, float],
    rhs: float,
    P: float,
    slack_width: int,
    slack_name: Hashable = "s",
) -> QuadraticTerms:
    """Expand P * (coeffs.bits + sum_l 2^l s_l - rhs)^2.

    Slack bits are named ``(slack_name, l)``. With ``slack_width = 0``
    the penalty enforces equality.
    """
    terms = [(k, float(v)) for k, v in coeffs.items() if v != 0]
    terms += [((slack_name, l), 2.0**l) for l in range(slack_width)]
    out = QuadraticTerms(constant=P * rhs * rhs)
    for i, (ka, a) in enumerate(terms):
        # z^2 = z for binaries, so the square of each term is linear
        out.linear[ka] = out.linear.get(ka, 0.0) + P * (a * a - 2.0 * rhs * a)
        for kb, bb in terms[i + 1 :]:
            key = (ka, kb)
            out.quadratic[key] = out.quadratic.get(key, 0.0) + 2.0 * P * a * bb
    return out


def _cut_form(inst: MilpInstance, cut: Cut):
    """(x coefficients, rhs) of the cut written as lhs(x) <= rhs."""
    return cut.vector @ inst.A, float(inst.b @ cut.vector)


def cut_denominator(inst: MilpInstance, cut: Cut) -> int | None:
    """Smallest D making D*coefficients and D*rhs integral, if rational."""
    coef, rhs = _cut_form(inst, cut)
    return rationalize([rhs, *coef])


def cut_scale(inst: MilpInstance, cut: Cut, enc: TEncoding) -> int:
    """Integer factor turning the cut's residual into integer units."""
    base = enc.resolution if cut.kind is CutKind.OPTIMALITY else 1
    den = cut_denominator(inst, cut)
    if den is None:
        log.warning("cut coefficients are not recognisably rational; residuals may not vanish exactly")
        return base
    sigma = math.lcm(base, den)
    if sigma > base * MAX_CUT_REFINEMENT:
        log.warning("cut denominator %d too large; residuals are rounded to the register grid", den)
        return base
    return sigma


def _snap(values: np.ndarray) -> np.ndarray:
    near = np.round(values)
    close = np.abs(values - near) <= 1e-7 * np.maximum(1.0, np.abs(values))
    return np.where(close, near, values)


class _Builder:
    def __init__(self, N):
        self.Q = np.zeros((N, N))
        self.offset = 0.0

    def add(self, terms: QuadraticTerms, index):
        for k, v in terms.linear.items():
            i = index(k)
            self.Q[i, i] += v
        for (ka, kb), v in terms.quadratic.items():
            i, j = index(ka), index(kb)
            if i == j:
                self.Q[i, i] += v
            else:
                self.Q[i, j] += v / 2
                self.Q[j, i] += v / 2
        self.offset += terms.constant


def _penalty_values(pen: PenaltyConfig, base: float, n_cuts: int) -> list[float]:
    if pen.mode == "auto":
        return [base] * n_cuts
    vals = np.atleast_1d(np.asarray(pen.fixed_value, dtype=float))
    if vals.size == 1:
        return [float(vals[0])] * n_cuts
    if vals.size < n_cuts:
        raise ConfigError(f"{vals.size} penalty values given for {n_cuts} cuts")
    return [float(v) for v in vals[:n_cuts]]


def build_master_qubo(
    inst: MilpInstance,
    state: MasterState,
    enc: TEncoding,
    pen: PenaltyConfig = PenaltyConfig(),
    multiplier: float = 1.0,
) -> tuple[QuboMatrix, VariableLayout]:
    """QUBO whose minimizers are maximizers of the binarized master.

    ``multiplier`` scales every penalty (used for escalation).
    """
    n, M = inst.n, enc.M
    raw_w = enc.raw_weights()
    g = enc.grid
    P = [multiplier * v for v in _penalty_values(pen, auto_penalty(inst, state, enc), len(state))]

    forms = []
    for cut in state.cuts:
        sigma = cut_scale(inst, cut, enc)
        coef, rhs = _cut_form(inst, cut)
        x_coef = _snap(sigma * coef)
        rhs_u = float(_snap(np.array([sigma * rhs]))[0])
        if cut.kind is CutKind.OPTIMALITY:
            w_coef = _snap(sigma * raw_w / enc.denom)
        else:
            w_coef = np.zeros(M)
        min_lhs = float(np.minimum(x_coef, 0).sum() + np.minimum(w_coef, 0).sum())
        forms.append((x_coef, w_coef, rhs_u, slack_bits(rhs_u, min_lhs)))

    layout = VariableLayout.build(n, M, [f[3] for f in forms])
    build = _Builder(layout.N)
    scale = float(enc.denom)

    # objective: minimize -scale * (c.x + t)
    for i in range(n):
        build.Q[i, i] -= scale * inst.c[i]
    for i in range(M):
        build.Q[n + i, n + i] -= raw_w[i]

    def index(key):
        kind, i = key
        if kind == "x":
            return i
        if kind == "w":
            return n + i
        return slack_start[kind[1]] + i

    slack_start = {blk.cut: blk.start for blk in layout.slack_blocks}
    for k, ((x_coef, w_coef, rhs_u, _), P_k) in enumerate(zip(forms, P)):
        # energy per squared residual unit, identical for all cuts under auto penalties
        kappa = scale * P_k * g * g
        coeffs = {("x", i): v for i, v in enumerate(x_coef)}
        coeffs.update({("w", i): v for i, v in enumerate(w_coef)})
        blk = layout.slack_blocks[k]
        build.add(penalize_inequality(coeffs, rhs_u, kappa, blk.size, ("s", k)), index)

    return QuboMatrix(build.Q, build.offset, scale), layout


# -- verification ------------------------------------------------------------


@dataclass
class VerifyResult:
    feasible: bool
    violated: list[tuple[int, float]]
    x: np.ndarray
    t: float


def verify_sample(bits, layout: VariableLayout, inst: MilpInstance, state: MasterState, enc: TEncoding) -> VerifyResult:
    """Check the decoded (x, t) against every stored cut; slack bits are ignored."""
    x, w = layout.decode(bits)
    t = decode_t(w, enc)
    violated = []
    for k, cut in enumerate(state.cuts):
        val = cut.value(inst, x)
        excess = t - val if cut.kind is CutKind.OPTIMALITY else -val
        if excess > VERIFY_TOL:
            violated.append((k, excess))
    return VerifyResult(not violated, violated, x, t)


# -- text dump ---------------------------------------------------------------


def fmt_number(v: float) -> str:
    v = float(v)
    if v == 0:
        return "0"
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def format_qubo(qubo: QuboMatrix) -> str:
    """``N offset`` header, then ``i j value`` per nonzero upper-triangle coefficient."""
    Q = qubo.Q
    lines = [f"{qubo.N} {fmt_number(qubo.offset)}"]
    for i in range(qubo.N):
        for j in range(i, qubo.N):
            v = Q[i, i] if i == j else Q[i, j] + Q[j, i]
            if v != 0:
                lines.append(f"{i} {j} {fmt_number(v)}")
    return "\n".join(lines) + "\n"


def parse_qubo(text: str) -> QuboMatrix:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    N, offset = int(rows[0][0]), float(rows[0][1])
    Q = np.zeros((N, N))
    for i, j, v in rows[1:]:
        i, j, v = int(i), int(j), float(v)
        if i == j:
            Q[i, i] += v
        else:
            Q[i, j] += v / 2
            Q[j, i] += v / 2
    return QuboMatrix(Q, offset)


def format_legend(layout: VariableLayout, enc: TEncoding) -> str:
    weights = enc.weights()
    lines = []
    for idx, name in enumerate(layout.names()):
        extra = ""
        if layout.n <= idx < layout.n + layout.M:
            extra = f" weight={fmt_number(weights[idx - layout.n])}"
        lines.append(f"{idx} {name}{extra}")
    return "\n".join(lines) + "\n"
