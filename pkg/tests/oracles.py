"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import sys
from fractions import Fraction

from blunt.core import K_ORAND, K_PRAND, System
from blunt.values import BOT


def naive_expectimax(program, bindings, bad, n=None, limit=2_000_000) -> Fraction:
    """Plain game-tree value: the adversary maximises over every enabled
    step and every in-flight message, random steps average uniformly, and
    nothing is pruned, fused or reordered.  Memoized on configurations."""
    system = System(program, bindings, n=n, log=False)
    memo: dict = {}

    def value(cfg) -> Fraction:
        got = memo.get(cfg)
        if got is not None:
            return got
        if len(memo) > limit:
            raise RuntimeError("oracle state space too large")
        best = None
        for pid in range(system.n):
            nxt = system.next_step(cfg, pid)
            if nxt is None:
                continue
            if nxt[0] in (K_PRAND, K_ORAND):
                dom = nxt[2]
                v = sum((value(system.step(cfg, pid, r)[0]) for r in dom), Fraction(0)) / len(dom)
            else:
                v = value(system.step(cfg, pid)[0])
            best = v if best is None or v > best else best
        for c in set(cfg.net):
            v = value(system.deliver(cfg, c)[0])
            best = v if best is None or v > best else best
        if best is None:
            best = Fraction(int(bad(dict(cfg.outcome))))
        memo[cfg] = best
        return best

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 100_000))
    try:
        return value(system.initial())
    finally:
        sys.setrecursionlimit(old)


def brute_linearizable(ops, spec) -> bool:
    """Try every subset of pending ops and every permutation."""
    from itertools import combinations, permutations

    complete = [o for o in ops if o.ret is not None]
    pending = [o for o in ops if o.ret is None]
    for r in range(len(pending) + 1):
        for extra in combinations(pending, r):
            chosen = complete + list(extra)
            for perm in permutations(chosen):
                pos = {o.inv: i for i, o in enumerate(perm)}
                if any(a.ret is not None and a.ret < b.call and pos[a.inv] > pos[b.inv]
                       for a in chosen for b in chosen):
                    continue
                state = spec.initial_state()
                ok = True
                for o in perm:
                    state, got = spec.apply(state, o.method, o.arg, o.proc)
                    if o.ret is not None and got != o.value:
                        ok = False
                        break
                if ok:
                    return True
    return False
