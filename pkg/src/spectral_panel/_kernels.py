"""Compiled inner loops for the greedy classification pass."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def greedy_pass(coords, lam, max_groups):
    """One sequential pass; stops early once more than ``max_groups`` groups exist.

    Returns ``(labels, m)`` with 0-based labels. When the pass stops early,
    ``m == max_groups + 1`` and ``labels`` is only partially filled.
    """
    n, r = coords.shape
    cap = min(n, max_groups + 1)
    sums = np.zeros((cap, r))
    counts = np.zeros(cap, dtype=np.int64)
    labels = np.full(n, -1, dtype=np.int64)
    sums[0, :] = coords[0, :]
    counts[0] = 1
    labels[0] = 0
    m = 1
    for i in range(1, n):
        chosen = -1
        for g in range(m):
            inv = 1.0 / counts[g]
            acc = 0.0
            for k in range(r):
                diff = coords[i, k] - sums[g, k] * inv
                acc += diff * diff
            if math.sqrt(acc) <= lam:
                chosen = g
                break
        if chosen < 0:
            if m == max_groups:
                return labels, m + 1
            chosen = m
            m += 1
        labels[i] = chosen
        counts[chosen] += 1
        for k in range(r):
            sums[chosen, k] += coords[i, k]
    return labels, m


@njit(cache=True, nogil=True)
def first_feasible(coords, candidates, max_groups):
    """Index of the first candidate threshold giving at most ``max_groups`` groups, or -1."""
    for j in range(candidates.shape[0]):
        _, m = greedy_pass(coords, candidates[j], max_groups)
        if m <= max_groups:
            return j
    return -1
