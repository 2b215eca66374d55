"""Timestamp-ordered linearization of ABD executions."""

from __future__ import annotations

from typing import Mapping, Optional

from .history import LinEntry, Linearization, operations


class NotComplete(ValueError):
    pass


def abd_canonical_linearization(node, spec, writes: str = "write") -> Linearization:
    """Logically-completed invocations sorted by timestamp.

    An invocation is logically completed when its timestamp is at most that
    of some returned invocation.  A write precedes the reads carrying its
    timestamp; reads with equal timestamps keep their call order.  ``node``
    needs ``history`` and ``stamps`` (inv -> timestamp) for every invocation.
    """
    stamps = dict(node.stamps)
    ops = operations(node.history)
    missing = [o.inv for o in ops if o.inv not in stamps]
    if missing:
        raise NotComplete(f"invocations without a timestamp: {missing}")
    returned = [tuple(stamps[o.inv]) for o in ops if o.ret is not None]
    top = max(returned) if returned else None
    chosen = [o for o in ops if top is not None and tuple(stamps[o.inv]) <= top]
    chosen.sort(key=lambda o: (tuple(stamps[o.inv]), 0 if o.method == writes else 1, o.call))
    state = spec.initial_state()
    entries = []
    for o in chosen:
        state, r = spec.apply(state, o.method, o.arg, o.proc)
        entries.append(LinEntry(o.inv, o.method, o.arg, r))
    return Linearization(tuple(entries))


def canonical_prefix_check(tree, spec, pm: Mapping[str, str], linearize=abd_canonical_linearization) -> dict:
    """Check a per-node linearization (the canonical one by default) on
    every pair of complete nodes where one extends the other: the earlier
    one must be a prefix, and each must linearize its own history.  Returns
    counts and the first failure."""
    from .history import is_linearization_of
    from .strong import completion_test

    complete = completion_test(pm)
    canon: dict = {}
    seen = set()
    pairs = 0
    nodes = 0
    stack = [(0, None)]
    while stack:
        nid, above = stack.pop()
        if (nid, above) in seen:
            continue
        seen.add((nid, above))
        node = tree.nodes[nid]
        here = above
        if complete(node):
            lin = canon.get(nid)
            if lin is None:
                lin = canon[nid] = linearize(node, spec)
                nodes += 1
                if not is_linearization_of(lin, node.history, spec):
                    return {"ok": False, "pairs": pairs, "nodes": nodes, "failure": {"node": nid, "reason": "not a linearization"}}
            if above is not None:
                pairs += 1
                if not canon[above].is_prefix_of(lin):
                    return {"ok": False, "pairs": pairs, "nodes": nodes,
                            "failure": {"node": nid, "ancestor": above, "reason": "prefix violated"}}
            here = nid
        stack.extend((c, here) for c in node.children)
    return {"ok": True, "pairs": pairs, "nodes": nodes, "failure": None}
