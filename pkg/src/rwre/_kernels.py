"""Compiled inner loops for the linearly edge-reinforced walk.

Sites are packed into a single int64 key, ``bits = 63 // d`` bits per axis,
so a walk of ``n`` steps needs ``n < 2**(bits - 1)``.
"""

import numba as nb
import numpy as np
from numba import types
from numba.typed import Dict


def key_bits(dim: int) -> int:
    return 63 // dim


def max_steps(dim: int) -> int:
    return (1 << (key_bits(dim) - 1)) - 1


@nb.njit(nogil=True, cache=True)
def _pick(alphas, counts, row, total, u):
    target = u * total
    acc = 0.0
    nd = alphas.shape[0]
    for i in range(nd):
        acc += alphas[i] + counts[row, i]
        if target < acc:
            return i
    return nd - 1


@nb.njit(nogil=True, cache=True)
def reinforced_directions(alphas, dim, uniforms, bits):
    """Direction indices of one reinforced walk driven by ``uniforms``.

    At a site with directed exit counts ``N_i`` the walk leaves along ``i``
    with probability ``(alpha_i + N_i) / sum_k (alpha_k + N_k)``.
    """
    n = uniforms.shape[0]
    nd = alphas.shape[0]
    gamma = alphas.sum()
    out = np.empty(n, np.int8)
    table = Dict.empty(types.int64, types.int64)
    counts = np.zeros((n + 1, nd))
    totals = np.zeros(n + 1)
    pos = np.zeros(dim, np.int64)
    off = np.int64(1) << (bits - 1)
    nsites = 0
    for t in range(n):
        key = np.int64(0)
        for j in range(dim):
            key |= (pos[j] + off) << (bits * j)
        if key in table:
            row = table[key]
        else:
            row = nsites
            table[key] = row
            nsites += 1
        k = _pick(alphas, counts, row, gamma + totals[row], uniforms[t])
        counts[row, k] += 1.0
        totals[row] += 1.0
        out[t] = k
        if k < dim:
            pos[k] += 1
        else:
            pos[k - dim] -= 1
    return out


@nb.njit(nogil=True, cache=True)
def reinforced_displacement(alphas, dim, uniforms, bits):
    dirs = reinforced_directions(alphas, dim, uniforms, bits)
    pos = np.zeros(dim, np.int64)
    for k in dirs:
        if k < dim:
            pos[k] += 1
        else:
            pos[k - dim] -= 1
    return pos


@nb.njit(nogil=True, cache=True)
def reinforced_short_batch(alphas, dim, uniforms):
    """Many short walks at once (one row of ``uniforms`` per walk).

    Visited sites are found by linear scan, which beats hashing for the
    handful of steps this is meant for.
    """
    runs, n = uniforms.shape
    nd = alphas.shape[0]
    gamma = alphas.sum()
    out = np.empty((runs, n), np.int8)
    sites = np.zeros((n + 1, dim), np.int64)
    counts = np.zeros((n + 1, nd))
    totals = np.zeros(n + 1)
    pos = np.zeros(dim, np.int64)
    for r in range(runs):
        counts[:] = 0.0
        totals[:] = 0.0
        pos[:] = 0
        nsites = 0
        for t in range(n):
            row = -1
            for s in range(nsites):
                same = True
                for j in range(dim):
                    if sites[s, j] != pos[j]:
                        same = False
                        break
                if same:
                    row = s
                    break
            if row < 0:
                row = nsites
                sites[row] = pos
                nsites += 1
            k = _pick(alphas, counts, row, gamma + totals[row], uniforms[r, t])
            counts[row, k] += 1.0
            totals[row] += 1.0
            out[r, t] = k
            if k < dim:
                pos[k] += 1
            else:
                pos[k - dim] -= 1
    return out
