"""QUBO minimization backends standing in for an annealer.

Every backend has the signature ``sample(qubo, params, groups=None) ->
SampleResult``. ``groups`` optionally lists index blocks (slack
registers) that the exhaustive solver may minimize in closed form; other
backends ignore it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, TooLarge
from .qubo import QuboMatrix, qubo_energy

#: largest enumerated core
MAX_EXHAUSTIVE_BITS = 24
#: largest slack register minimized through its lower envelope
MAX_GROUP_BITS = 20
# doubles of pre-drawn randomness per annealing batch
_BATCH_DOUBLES = 1 << 22


@dataclass(frozen=True)
class SamplerParams:
    backend: str = "exhaustive"
    seed: int = 0
    num_reads: int = 100
    sweeps: int = 2000
    beta_min: float = 0.01
    beta_max: float = 20.0

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown sampler backend {self.backend!r}")
        if self.num_reads < 1 or self.sweeps < 1:
            raise ConfigError("num_reads and sweeps must be at least 1")
        if not 0 < self.beta_min < self.beta_max:
            raise ConfigError("need 0 < beta_min < beta_max")


@dataclass
class SampleResult:
    bits: np.ndarray
    energy: float
    reads: int
    best_rank: int = 0


def _state_bits(codes: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(codes, dtype=np.int64)[..., None] >> shifts) & 1).astype(np.float64)


def _rank_one(block: np.ndarray):
    """Factor block = outer(v, a) with v scaled to 1 at its first nonzero row."""
    rows = np.flatnonzero(np.any(block != 0, axis=1))
    if rows.size == 0:
        return np.zeros(block.shape[0]), np.zeros(block.shape[1])
    a = block[rows[0]].copy()
    j = int(np.argmax(np.abs(a)))
    v = block[:, j] / a[j]
    if not np.allclose(np.outer(v, a), block, rtol=1e-12, atol=1e-12 * np.abs(block).max()):
        return None
    return v, a


def _envelope(E: np.ndarray, V: np.ndarray):
    """Lower envelope of lines E[s] + lam * V[s]; returns (slope, icpt, brk, rank)."""
    order = np.lexsort((np.arange(E.size), E, -V))  # slope desc, intercept asc, rank asc
    hull: list[int] = []
    for s in order:
        if hull and V[hull[-1]] == V[s]:
            continue  # same slope, worse or equal intercept
        while len(hull) >= 2:
            l1, l2 = hull[-2], hull[-1]
            x12 = (E[l2] - E[l1]) / (V[l1] - V[l2])
            x1s = (E[s] - E[l1]) / (V[l1] - V[s])
            if x1s <= x12:
                hull.pop()
            else:
                break
        hull.append(int(s))
    idx = np.array(hull, dtype=np.int64)
    slope, icpt = V[idx].astype(np.float64), E[idx].astype(np.float64)
    brk = np.full(idx.size, -np.inf)
    if idx.size > 1:
        brk[1:] = (icpt[1:] - icpt[:-1]) / (slope[:-1] - slope[1:])
    return slope, icpt, brk, idx


def solve_exhaustive(qubo: QuboMatrix, groups: Sequence[Sequence[int]] | None = None) -> SampleResult:
    """Global minimizer, ties broken towards the lexicographically smallest bitstring.

    Without ``groups`` all 2^N states are enumerated. A group whose
    coupling to the remaining (core) bits has rank one contributes
    ``min_s E_s + lambda V_s`` with ``lambda`` linear in the core bits,
    so it is minimized exactly through the lower envelope of those lines
    while only the core is enumerated. Groups must not couple to each
    other; a group that is not rank-one coupled joins the core.
    """
    Q = qubo.Q
    N = qubo.N
    groups = [np.asarray(g, dtype=np.int64) for g in (groups or ()) if len(g)]
    if groups:
        flat = np.concatenate(groups)
        if np.unique(flat).size != flat.size or flat.min() < 0 or flat.max() >= N:
            raise ValueError("groups must be disjoint index sets within the QUBO")
        for i, gi in enumerate(groups):
            for gj in groups[i + 1 :]:
                if np.any(Q[np.ix_(gi, gj)] != 0):
                    raise ValueError("groups must not be coupled to each other")

    core_mask = np.ones(N, dtype=bool)
    kept = []
    for g in groups:
        core_mask[g] = False
    for g in groups:
        core = np.flatnonzero(core_mask)
        fac = _rank_one(Q[np.ix_(g, core)])
        if fac is None or g.size > MAX_GROUP_BITS:
            core_mask[g] = True
        else:
            kept.append(g)
    core = np.flatnonzero(core_mask)
    if core.size > MAX_EXHAUSTIVE_BITS:
        raise TooLarge(f"exhaustive search limited to {MAX_EXHAUSTIVE_BITS} enumerated bits (got {core.size})")

    a_rows, slopes, icpts, brks, ranks, ptr = [], [], [], [], [], [0]
    for g in kept:
        v, a = _rank_one(Q[np.ix_(g, core)])
        states = _state_bits(np.arange(1 << g.size), g.size)
        E = np.einsum("ij,jk,ik->i", states, Q[np.ix_(g, g)], states)
        V = 2.0 * (states @ v)
        slope, icpt, brk, rank = _envelope(E, V)
        a_rows.append(a)
        slopes.append(slope)
        icpts.append(icpt)
        brks.append(brk)
        ranks.append(rank)
        ptr.append(ptr[-1] + slope.size)
    cat = lambda parts, dt: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dt)  # noqa: E731
    a_mat = np.array(a_rows, dtype=np.float64).reshape(len(kept), core.size)
    code, lines, _ = kernels.enumerate_min(
        np.ascontiguousarray(Q[np.ix_(core, core)]),
        a_mat,
        cat(slopes, np.float64),
        cat(icpts, np.float64),
        cat(brks, np.float64),
        cat(ranks, np.int64),
        np.array(ptr, dtype=np.int64),
    )
    bits = np.zeros(N)
    bits[core] = _state_bits(np.array(code), core.size)
    all_ranks = cat(ranks, np.int64)
    for g, line in zip(kept, lines):
        bits[g] = _state_bits(np.array(all_ranks[line]), g.size)
    return SampleResult(bits=bits, energy=qubo_energy(qubo, bits), reads=1)


def beta_schedule(params: SamplerParams) -> np.ndarray:
    return np.geomspace(params.beta_min, params.beta_max, params.sweeps)


def solve_sa(qubo: QuboMatrix, params: SamplerParams | None = None) -> SampleResult:
    """Best of ``num_reads`` independent single-flip Metropolis anneals.

    Read r draws its initial state and acceptance uniforms from
    ``default_rng([seed, r])``, so results do not depend on batching or
    on which kernel runs them.
    """
    params = params or SamplerParams(backend="sa")
    N = qubo.N
    betas = beta_schedule(params)
    per_read = params.sweeps * N
    batch = max(1, _BATCH_DOUBLES // max(per_read, 1))
    best_bits, best_e = None, np.inf
    for start in range(0, params.num_reads, batch):
        reads = range(start, min(params.num_reads, start + batch))
        init = np.empty((len(reads), N), dtype=np.int8)
        uni = np.empty((len(reads), params.sweeps, N))
        for k, r in enumerate(reads):
            rng = np.random.default_rng([params.seed, r])
            init[k] = rng.integers(0, 2, N, dtype=np.int8)
            uni[k] = rng.random((params.sweeps, N))
        states, _ = kernels.anneal(qubo.Q, betas, init, uni)
        for row in states:
            e = qubo_energy(qubo, row)
            if e < best_e:
                best_bits, best_e = row.astype(np.float64), e
    return SampleResult(bits=best_bits, energy=best_e, reads=params.num_reads)


BACKENDS: dict[str, Callable] = {
    "exhaustive": lambda qubo, params, groups=None: solve_exhaustive(qubo, groups),
    "sa": lambda qubo, params, groups=None: solve_sa(qubo, params),
}


def register_backend(name: str, fn: Callable) -> None:
    """Add a backend ``fn(qubo, params, groups=None) -> SampleResult``."""
    BACKENDS[name] = fn


def sample(qubo: QuboMatrix, params: SamplerParams, groups=None) -> SampleResult:
    return BACKENDS[params.backend](qubo, params, groups)
