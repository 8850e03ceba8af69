"""Compiled hot loops for the batched joint tests.

One call per invocation: the L inner products <t_l, c> (BLAS through
numba's np.dot, matching the numpy path bit for bit), the scalar
threshold per region, a binary search in that region's sorted array and
the prefix marking.  Threshold arithmetic mirrors eps_threshold /
delta_threshold operation for operation so the marked sets match the
per-region code paths.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def mark_sphere_prefixes(T, c, tau, norm_c, dist_sorted, dist_order, out):
    count, n = dist_sorted.shape
    tc = np.dot(T, c)
    for l in range(count):
        if norm_c == 0.0:
            threshold = np.inf if tau > 0.0 else -np.inf
        else:
            threshold = (tau - tc[l]) / norm_c
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if dist_sorted[l, mid] < threshold:
                lo = mid + 1
            else:
                hi = mid
        for p in range(lo):
            out[dist_order[l, p]] = True


@njit(cache=True)
def mark_dome_prefixes(T, c, tau, norm_c, neg_inner_sorted, inner_order, out):
    count, n = neg_inner_sorted.shape
    if tau > norm_c or norm_c <= 0.0:
        return
    tc = np.dot(T, c)
    sq = norm_c * norm_c
    tail = np.sqrt(max(sq - tau * tau, 0.0))
    for l in range(count):
        if not (tc[l] < tau):
            continue
        head = np.sqrt(max(sq - tc[l] * tc[l], 0.0))
        threshold = (tc[l] * tau + head * tail) / sq
        if threshold > 1.0:
            threshold = 1.0
        target = -threshold
        lo, hi = 0, n
        while lo < hi:
            mid = (lo + hi) // 2
            if neg_inner_sorted[l, mid] < target:
                lo = mid + 1
            else:
                hi = mid
        for p in range(lo):
            out[inner_order[l, p]] = True
