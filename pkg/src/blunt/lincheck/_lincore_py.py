"""Pure-Python linearizability search kernel."""

from __future__ import annotations


def search(n, preds, complete_mask, step, init):
    """Depth-first search for an order of ops extending the empty prefix.

    ``step(state, i)`` returns the next spec state, or ``None`` when op i's
    recorded return disagrees.  Returns the op order or None.  Failed
    (linearized-set, state) pairs are memoized.
    """
    failed = set()
    cache = {}
    order = []
    full = (1 << n) - 1

    def go(mask, state):
        if mask & complete_mask == complete_mask:
            return True
        key = (mask, state)
        if key in failed:
            return False
        for i in range(n):
            bit = 1 << i
            if mask & bit or preds[i] & ~mask & full:
                continue
            ck = (state, i)
            if ck in cache:
                ns = cache[ck]
            else:
                ns = cache[ck] = step(state, i)
            if ns is None:
                continue
            order.append(i)
            if go(mask | bit, ns[0]):
                return True
            order.pop()
        failed.add(key)
        return False

    return list(order) if go(0, init) else None
