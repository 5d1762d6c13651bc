"""Numba kernels for the randomised Tukey HSD permutation loop.

Every (permutation, topic) pair owns a splitmix64 stream seeded from
``(master, permutation index, topic key)``, so the permuted ranges do not
depend on how permutations are split across threads.
"""

from __future__ import annotations

import numba
import numpy as np

# TBB is tried first by default and warns on old installs.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK32 = np.uint64(0xFFFFFFFF)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)

CHUNK = 4096


@numba.njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@numba.njit(cache=True)
def stream_seed(master, k, topic_key):
    return _mix(_mix(master + np.uint64(k) * _GOLDEN) + topic_key)


@numba.njit(cache=True)
def _shuffle_accumulate(row, buf, sums, seed):
    # Fisher-Yates on a copy of the row; two 32-bit draws per splitmix64 output.
    n = row.shape[0]
    for i in range(n):
        buf[i] = row[i]
    state = seed
    have = False
    spare = np.uint64(0)
    for i in range(n - 1, 0, -1):
        if have:
            r = spare
            have = False
        else:
            state += _GOLDEN
            z = _mix(state)
            r = z & _MASK32
            spare = z >> _S32
            have = True
        j = np.int64((r * np.uint64(i + 1)) >> _S32)
        tmp = buf[i]
        buf[i] = buf[j]
        buf[j] = tmp
    for i in range(n):
        sums[i] += buf[i]


@numba.njit(cache=True)
def _range_one(x, keys, master, k, buf, sums):
    m, n = x.shape
    for i in range(n):
        sums[i] = 0.0
    for t in range(m):
        _shuffle_accumulate(x[t], buf, sums, stream_seed(master, k, keys[t]))
    hi = sums[0]
    lo = sums[0]
    for i in range(1, n):
        if sums[i] > hi:
            hi = sums[i]
        if sums[i] < lo:
            lo = sums[i]
    return hi - lo


@numba.njit(cache=True, parallel=True)
def permuted_ranges(x, keys, master, start, count):
    """Range of permuted column sums for permutations ``start .. start+count-1``.

    ``x`` must already be in canonical row order; sums are accumulated row by
    row in that order.
    """
    m, n = x.shape
    out = np.empty(count, dtype=np.float64)
    nchunks = (count + CHUNK - 1) // CHUNK
    for c in numba.prange(nchunks):
        buf = np.empty(n, dtype=np.float64)
        sums = np.empty(n, dtype=np.float64)
        lo = c * CHUNK
        hi = min(count, lo + CHUNK)
        for k in range(lo, hi):
            out[k] = _range_one(x, keys, master, start + k, buf, sums)
    return out


@numba.njit(cache=True)
def permuted_row(row, seed):
    """Single shuffled copy of ``row`` (used by the pure-Python cross-check)."""
    buf = np.empty(row.shape[0], dtype=np.float64)
    sums = np.zeros(row.shape[0], dtype=np.float64)
    _shuffle_accumulate(row, buf, sums, seed)
    return sums
