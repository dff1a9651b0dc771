"""Compiled random-walk inner loops.

All kernels consume pre-drawn random numbers so that the numpy generator
remains the single source of randomness.  ``out`` receives the state after
every ``thin`` proposals; the kernels return the number of accepted moves.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def coordinate_walk(D, rows, cols, rowcap, colcap, free_i, free_j, scale, u, z, thin, out):
    nfree = free_i.shape[0]
    accepted = 0
    t = 0
    for s in range(out.shape[0]):
        for _ in range(thin):
            k = int(u[t] * nfree)
            if k >= nfree:
                k = nfree - 1
            d = z[t] * scale[k]
            t += 1
            i = free_i[k]
            j = free_j[k]
            v = D[i, j] + d
            if v < 0.0:
                continue
            if d > 0.0 and (rows[i] + d > rowcap[i] or cols[j] + d > colcap[j]):
                continue
            D[i, j] = v
            rows[i] += d
            cols[j] += d
            accepted += 1
        out[s] = D
    return accepted


@numba.njit(cache=True)
def four_index_walk(D, zero_diag, scale, u, z, thin, out):
    n = D.shape[0]
    accepted = 0
    t = 0
    for s in range(out.shape[0]):
        for _ in range(thin):
            i1 = min(int(u[t, 0] * n), n - 1)
            j1 = min(int(u[t, 1] * n), n - 1)
            i2 = min(int(u[t, 2] * n), n - 1)
            j2 = min(int(u[t, 3] * n), n - 1)
            d = z[t] * scale
            t += 1
            if i1 == i2 or j1 == j2:
                continue  # the four updates cancel
            if zero_diag and (i1 == j1 or i2 == j2 or i1 == j2 or i2 == j1):
                continue  # would move a diagonal entry off zero
            a = D[i1, j1] - d
            b = D[i2, j2] - d
            c = D[i1, j2] + d
            e = D[i2, j1] + d
            if a < 0.0 or b < 0.0 or c < 0.0 or e < 0.0:
                continue
            D[i1, j1] = a
            D[i2, j2] = b
            D[i1, j2] = c
            D[i2, j1] = e
            accepted += 1
        out[s] = D
    return accepted


@numba.njit(cache=True)
def full_walk(D, rowcap, colcap, free, scale, z, thin, out):
    n = D.shape[0]
    accepted = 0
    t = 0
    P = np.empty_like(D)
    for s in range(out.shape[0]):
        for _ in range(thin):
            ok = True
            for i in range(n):
                rs = 0.0
                for j in range(n):
                    v = D[i, j]
                    if free[i, j]:
                        v += z[t, i, j] * scale[i, j]
                    if v < 0.0:
                        ok = False
                    P[i, j] = v
                    rs += v
                if rs > rowcap[i]:
                    ok = False
            t += 1
            if not ok:
                continue
            for j in range(n):
                cs = 0.0
                for i in range(n):
                    cs += P[i, j]
                if cs > colcap[j]:
                    ok = False
                    break
            if ok:
                D[:, :] = P
                accepted += 1
        out[s] = D
    return accepted


@numba.njit(cache=True)
def permutation_loads(F, perms):
    """``out[m, e] = sum_i F[e, i, perms[m, i]]``."""
    E = F.shape[0]
    m, n = perms.shape
    out = np.zeros((m, E))
    for k in range(m):
        for e in range(E):
            acc = 0.0
            for i in range(n):
                acc += F[e, i, perms[k, i]]
            out[k, e] = acc
    return out


@numba.njit(cache=True)
def enumerate_max_loads(F, caps, perm, count, zero_diag, out, valid):
    """Max over edges of ``sum_i F[e, i, perm[i]] / caps[e]`` for ``count`` successive permutations.

    ``perm`` advances in lexicographic order and is left at the next
    unvisited permutation.  Returns the number of permutations visited.
    """
    n = perm.shape[0]
    E = F.shape[0]
    for k in range(count):
        ok = True
        if zero_diag:
            for i in range(n):
                if perm[i] == i:
                    ok = False
                    break
        valid[k] = ok
        if ok:
            best = -np.inf
            for e in range(E):
                acc = 0.0
                for i in range(n):
                    acc += F[e, i, perm[i]]
                acc /= caps[e]
                if acc > best:
                    best = acc
            out[k] = best
        i = n - 2
        while i >= 0 and perm[i] >= perm[i + 1]:
            i -= 1
        if i < 0:
            return k + 1
        j = n - 1
        while perm[j] <= perm[i]:
            j -= 1
        perm[i], perm[j] = perm[j], perm[i]
        lo, hi = i + 1, n - 1
        while lo < hi:
            perm[lo], perm[hi] = perm[hi], perm[lo]
            lo += 1
            hi -= 1
    return count
