# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampler kernels; see ``_fallback`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


def anneal(Q, betas, states, uniforms):
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef const double[::1] bt = np.ascontiguousarray(betas, dtype=np.float64)
    cdef const double[:, :, ::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const cnp.int8_t[:, ::1] init = np.ascontiguousarray(states, dtype=np.int8)
    cdef Py_ssize_t R = init.shape[0], N = init.shape[1], S = bt.shape[0]
    best_np = np.array(init, dtype=np.int8, copy=True)
    best_e_np = np.zeros(R, dtype=np.float64)
    cdef cnp.int8_t[:, ::1] best = best_np
    cdef double[::1] best_e = best_e_np
    cdef double[::1] field = np.zeros(N, dtype=np.float64)
    cdef double[::1] b = np.zeros(N, dtype=np.float64)
    cdef Py_ssize_t r, s, i, j
    cdef double energy, delta, dE, beta

    for r in range(R):
        for i in range(N):
            b[i] = init[r, i]
        energy = 0.0
        for i in range(N):
            field[i] = 0.0
        # same summation order as b @ Q in the fallback
        for j in range(N):
            if b[j] != 0.0:
                for i in range(N):
                    field[i] += q[j, i]
        for i in range(N):
            energy += field[i] * b[i]
        best_e[r] = energy
        for s in range(S):
            beta = bt[s]
            for i in range(N):
                delta = 1.0 - 2.0 * b[i]
                dE = 2.0 * delta * field[i] + q[i, i]
                if dE <= 0.0 or u[r, s, i] < exp(-beta * dE):
                    b[i] = 1.0 - b[i]
                    for j in range(N):
                        field[j] += delta * q[i, j]
                    energy += dE
                    if energy < best_e[r]:
                        best_e[r] = energy
                        for j in range(N):
                            best[r, j] = <cnp.int8_t>b[j]
    return best_np, best_e_np


cdef inline double _env(double lam, const double[::1] slope, const double[::1] icpt,
                        const double[::1] brk, const long[::1] rank,
                        Py_ssize_t lo, Py_ssize_t hi, long* chosen) nogil:
    # last line whose breakpoint is <= lam
    cdef Py_ssize_t left = lo, right = hi - 1, mid
    while left < right:
        mid = (left + right + 1) // 2
        if brk[mid] <= lam:
            left = mid
        else:
            right = mid - 1
    if left > lo and brk[left] == lam and rank[left - 1] < rank[left]:
        left -= 1
    chosen[0] = left
    return icpt[left] + slope[left] * lam


def enumerate_min(Qc, a, slope, icpt, brk, rank, ptr):
    cdef const double[:, ::1] q = np.ascontiguousarray(Qc, dtype=np.float64)
    cdef Py_ssize_t K = q.shape[0]
    cdef Py_ssize_t G = len(ptr) - 1
    cdef const double[:, ::1] av = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(G, K))
    cdef const double[::1] sl = np.ascontiguousarray(slope, dtype=np.float64)
    cdef const double[::1] ic = np.ascontiguousarray(icpt, dtype=np.float64)
    cdef const double[::1] bk = np.ascontiguousarray(brk, dtype=np.float64)
    cdef const long[::1] rk = np.ascontiguousarray(rank, dtype=np.int64)
    cdef const long[::1] pt = np.ascontiguousarray(ptr, dtype=np.int64)

    cdef double[::1] field = np.zeros(K, dtype=np.float64)
    cdef double[::1] b = np.zeros(K, dtype=np.float64)
    cdef double[::1] lam = np.zeros(G, dtype=np.float64)
    cur_np = np.zeros(G, dtype=np.int64)
    best_np = np.zeros(G, dtype=np.int64)
    cdef long[::1] cur = cur_np
    cdef long[::1] best_lines = best_np

    cdef unsigned long long total = (<unsigned long long>1) << K
    cdef unsigned long long it, code = 0, best_code = 0
    cdef Py_ssize_t k, j, g, pos
    cdef double core_e = 0.0, e, best_e, delta, tol
    cdef long ch
    cdef bint better

    with nogil:
        # all-zero state
        e = 0.0
        for g in range(G):
            e += _env(0.0, sl, ic, bk, rk, pt[g], pt[g + 1], &ch)
            cur[g] = ch
            best_lines[g] = ch
        best_e = e
        best_code = 0
        it = 1
        while it < total:
            # Gray code: flip the position of the lowest set bit of it
            k = 0
            while not ((it >> k) & 1):
                k += 1
            pos = K - 1 - k
            delta = 1.0 - 2.0 * b[pos]
            core_e += 2.0 * delta * field[pos] + q[pos, pos]
            b[pos] = 1.0 - b[pos]
            for j in range(K):
                field[j] += delta * q[pos, j]
            code ^= (<unsigned long long>1) << k
            e = core_e
            for g in range(G):
                lam[g] += delta * av[g, pos]
                e += _env(lam[g], sl, ic, bk, rk, pt[g], pt[g + 1], &ch)
                cur[g] = ch
            tol = 1e-9 * (fabs(best_e) if fabs(best_e) > 1.0 else 1.0)
            better = False
            if e < best_e - tol:
                better = True
            elif e <= best_e + tol:
                if code < best_code:
                    better = True
                elif code == best_code:
                    for g in range(G):
                        if rk[cur[g]] != rk[best_lines[g]]:
                            better = rk[cur[g]] < rk[best_lines[g]]
                            break
            if better:
                best_e = e
                best_code = code
                for g in range(G):
                    best_lines[g] = cur[g]
            it += 1
    return int(best_code), best_np, float(best_e)


def enumerate_all(Q):
    from ._fallback import enumerate_all as _impl
    return _impl(Q)
