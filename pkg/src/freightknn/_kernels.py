"""Compiled inner loops for the neighbor scan and the solution function.

Arithmetic here mirrors the scalar code in :mod:`freightknn.knn` operation for
operation so that both paths produce bit-identical distances and estimates.
"""

import math

import numpy as np
from numba import njit

MODE_PROPORTIONAL = 0
MODE_INVERSE = 1


@njit(cache=True, nogil=True)
def scan_neighbors(hav_col, hav_del, probe_t, pool_t, probe_l, pool_l, w, k,
                   cutoff, exclude, out_idx, out_d, out_n, out_pool):
    """Keep the k smallest (distance, column) pairs per probe row.

    Pool columns must be in ascending id order; a later column only displaces
    a kept neighbor when strictly nearer, which breaks ties by lower id.
    """
    m, n = hav_col.shape
    w0, w1, w2, w3 = w[0], w[1], w[2], w[3]
    for i in range(m):
        cnt = 0
        eligible = 0
        ti = probe_t[i]
        li = probe_l[i]
        ci = cutoff[i]
        xi = exclude[i]
        for j in range(n):
            if pool_t[j] > ci or j == xi:
                continue
            eligible += 1
            dt = pool_t[j] - ti
            dl = pool_l[j] - li
            d = math.sqrt(w0 * hav_col[i, j] + w1 * hav_del[i, j] + w2 * (dt * dt) + w3 * (dl * dl))
            if cnt < k:
                pos = cnt
                cnt += 1
            elif d < out_d[i, k - 1]:
                pos = k - 1
            else:
                continue
            while pos > 0 and out_d[i, pos - 1] > d:
                out_d[i, pos] = out_d[i, pos - 1]
                out_idx[i, pos] = out_idx[i, pos - 1]
                pos -= 1
            out_d[i, pos] = d
            out_idx[i, pos] = j
        out_n[i] = cnt
        out_pool[i] = eligible


@njit(cache=True, nogil=True)
def _scaled_cost(j, pool_nc, pool_cost, pool_l, load):
    # normalized cost times the probe load; a neighbor with the probe's own
    # load contributes its recorded cost so duplicates reproduce it exactly
    if pool_l[j] == load:
        return pool_cost[j]
    return pool_nc[j] * load


@njit(cache=True, nogil=True)
def solve(out_idx, out_d, out_n, pool_nc, pool_cost, pool_l, probe_l, mode, eps, est, exact):
    m = out_idx.shape[0]
    for i in range(m):
        cnt = out_n[i]
        if cnt == 0:
            est[i] = np.nan
            exact[i] = False
            continue
        s = 0.0
        c = 0
        for r in range(cnt):
            if out_d[i, r] <= eps:
                s += _scaled_cost(out_idx[i, r], pool_nc, pool_cost, pool_l, probe_l[i])
                c += 1
        if c > 0:
            est[i] = s / c
            exact[i] = True
            continue
        exact[i] = False
        tot = 0.0
        acc = 0.0
        if mode == MODE_PROPORTIONAL:
            for r in range(cnt):
                tot += out_d[i, r]
            for r in range(cnt):
                acc += (out_d[i, r] / tot) * _scaled_cost(out_idx[i, r], pool_nc, pool_cost,
                                                          pool_l, probe_l[i])
        else:
            for r in range(cnt):
                tot += 1.0 / out_d[i, r]
            for r in range(cnt):
                acc += ((1.0 / out_d[i, r]) / tot) * _scaled_cost(out_idx[i, r], pool_nc,
                                                                  pool_cost, pool_l, probe_l[i])
        est[i] = acc
