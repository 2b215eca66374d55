# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled linearizability search kernel for histories of at most 64 ops."""

from libc.stdint cimport uint64_t


def search(int n, preds, complete_mask, step, init):
    if n > 64:
        raise ValueError("compiled kernel handles at most 64 operations")
    cdef uint64_t cpreds[64]
    cdef uint64_t cm = <uint64_t>complete_mask
    cdef int i
    for i in range(n):
        cpreds[i] = <uint64_t>preds[i]
    cdef set failed = set()
    cdef dict cache = {}
    cdef list order = []
    if _go(0, init, n, cpreds, cm, step, failed, cache, order):
        return order
    return None


cdef bint _go(uint64_t mask, object state, int n, uint64_t* preds, uint64_t cm, object step,
              set failed, dict cache, list order) except -1:
    if (mask & cm) == cm:
        return True
    key = (mask, state)
    if key in failed:
        return False
    cdef int i
    cdef uint64_t bit
    for i in range(n):
        bit = (<uint64_t>1) << i
        if (mask & bit) or (preds[i] & ~mask):
            continue
        ck = (state, i)
        ns = cache.get(ck, cache)
        if ns is cache:
            ns = step(state, i)
            cache[ck] = ns
        if ns is None:
            continue
        order.append(i)
        if _go(mask | bit, ns[0], n, preds, cm, step, failed, cache, order):
            return True
        order.pop()
    failed.add(key)
    return False
