"""NumPy implementations of the sampler kernels.

Semantics match the compiled ``_kernels`` module bit for bit on exact
(integer or dyadic) data: the same random numbers are consumed in the
same order and the same acceptance test is applied.
"""

import numpy as np

# states per vectorized chunk in enumerate_min
_CHUNK = 1 << 15


def anneal(Q, betas, states, uniforms):
    """Single-flip Metropolis sweeps for a batch of independent reads.

    Q        (N, N) symmetric float64
    betas    (S,) inverse temperature per sweep
    states   (R, N) int8 initial states
    uniforms (R, S, N) float64 in [0, 1), one per proposed flip

    Returns (best_states, best_energies) per read, energies tracked
    incrementally from the initial state.
    """
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    b = np.array(states, dtype=np.float64)
    R, N = b.shape
    diag = np.diag(Q).copy()
    field = b @ Q
    energy = np.einsum("ri,ri->r", field, b)
    best = b.copy()
    best_e = energy.copy()
    for s, beta in enumerate(betas):
        u = uniforms[:, s, :]
        for i in range(N):
            delta = 1.0 - 2.0 * b[:, i]
            dE = 2.0 * delta * field[:, i] + diag[i]
            with np.errstate(over="ignore"):
                accept = (dE <= 0.0) | (u[:, i] < np.exp(-beta * dE))
            if not accept.any():
                continue
            rows = np.flatnonzero(accept)
            b[rows, i] = 1.0 - b[rows, i]
            field[rows] += delta[rows, None] * Q[i]
            energy[rows] += dE[rows]
            improved = rows[energy[rows] < best_e[rows]]
            if improved.size:
                best[improved] = b[improved]
                best_e[improved] = energy[improved]
    return best.astype(np.int8), best_e


def _code_bits(codes, K):
    shifts = np.arange(K - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.float64)


def _envelope_eval(lam, slope, icpt, brk, rank):
    """Per-group minimum over lines; returns (values, chosen line index)."""
    idx = np.searchsorted(brk, lam, side="right") - 1
    idx = np.maximum(idx, 0)
    # exactly on a breakpoint both neighbours are optimal: take the lex-smaller state
    on = (idx > 0) & (brk[idx] == lam)
    prev = idx - 1
    swap = on & (rank[prev] < rank[idx])
    idx = np.where(swap, prev, idx)
    return icpt[idx] + slope[idx] * lam, idx


def enumerate_min(Qc, a, slope, icpt, brk, rank, ptr):
    """Exact minimum of a core QUBO plus rank-one-coupled groups.

    Core states are enumerated exhaustively; group g contributes
    min_l (icpt[l] + slope[l] * lambda_g) over its envelope lines
    ``ptr[g]:ptr[g+1]`` where ``lambda_g = a[g] . core_bits``.
    Ties resolve to the lexicographically smallest core code, then the
    smallest group ranks.

    Returns (core_code, chosen line per group, energy without offset).
    """
    Qc = np.asarray(Qc, dtype=np.float64)
    K = Qc.shape[0]
    n_groups = len(ptr) - 1
    total = 1 << K
    best_code, best_lines, best_e = -1, None, np.inf
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        B = _code_bits(codes, K)
        e = np.einsum("ij,jk,ik->i", B, Qc, B)
        lines = np.zeros((codes.size, n_groups), dtype=np.int64)
        if n_groups:
            lam = B @ a.T
            for g in range(n_groups):
                lo, hi = ptr[g], ptr[g + 1]
                val, idx = _envelope_eval(lam[:, g], slope[lo:hi], icpt[lo:hi], brk[lo:hi], rank[lo:hi])
                e += val
                lines[:, g] = idx + lo
        k = int(np.argmin(e))
        cand = e[k]
        tol = 1e-9 * max(1.0, abs(best_e) if np.isfinite(best_e) else 1.0)
        if cand < best_e - tol:
            # earliest code within tolerance of the chunk minimum
            tol = 1e-9 * max(1.0, abs(cand))
            k = int(np.flatnonzero(e <= cand + tol)[0])
            best_code, best_lines, best_e = int(codes[k]), lines[k].copy(), float(e[k])
    return best_code, best_lines, best_e


def enumerate_all(Q):
    """Energies of every state of a small QUBO in lexicographic order (test helper)."""
    Q = np.asarray(Q, dtype=np.float64)
    K = Q.shape[0]
    B = _code_bits(np.arange(1 << K, dtype=np.int64), K)
    return np.einsum("ij,jk,ik->i", B, Q, B)
