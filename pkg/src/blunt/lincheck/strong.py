"""Strong and tail strong linearizability of execution trees.

A prefix-preserving linearization function is searched for top-down: a
node may keep its parent's linearization or extend it, and every child must
then succeed from the chosen one.  Results are memoized on (node, chosen
linearization), which also makes the search valid on trees that share
identical subtrees.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..objects.base import CALL_LABEL
from ..values import to_json
from .history import LinEntry, Linearization, operations
from .linear import check_linearizable
from .trees import ExecutionTree, TreeNode, TreeTooLarge


@dataclass
class StrongVerdict:
    ok: bool
    mapping: dict = field(default_factory=dict, repr=False)   # node id -> Linearization
    witness: Optional[dict] = None
    explored: int = 0

    def __bool__(self) -> bool:
        return self.ok


def _actions_json(history) -> list:
    return [to_json(tuple(a)) for a in history]


class _Context:
    """Per-node data derived once: operations, precedence, and invocations."""

    def __init__(self, node: TreeNode):
        self.ops = operations(node.history)
        self.by_inv = {o.inv: o for o in self.ops}
        self.complete = frozenset(o.inv for o in self.ops if o.ret is not None)


class _Search:
    def __init__(self, tree: ExecutionTree, spec, complete=None, budget: int = 10_000_000):
        self.tree = tree
        self.spec = spec
        self.is_complete = complete or (lambda node: True)
        self.budget = budget
        self.memo: dict = {}
        self.choice: dict = {}
        self.ctx: dict = {}
        self.explored = 0

    def context(self, node: TreeNode) -> _Context:
        c = self.ctx.get(node.id)
        if c is None:
            c = self.ctx[node.id] = _Context(node)
        return c

    def _replay(self, invs, ctx):
        """Spec state after ``invs`` at this node, or None if some complete
        op's recorded value disagrees."""
        state = self.spec.initial_state()
        for inv in invs:
            o = ctx.by_inv[inv]
            state, r = self.spec.apply(state, o.method, o.arg, o.proc)
            if o.ret is not None and r != o.value:
                return None
        return state

    def extensions(self, node: TreeNode, base: tuple):
        """Linearizations of the node's history that extend ``base``."""
        ctx = self.context(node)
        state = self._replay(base, ctx)
        if state is None:
            return
        placed = set(base)
        preds = {o.inv: {p.inv for p in ctx.ops if p.ret is not None and p.ret < o.call} for o in ctx.ops}
        for inv in placed:
            if not preds[inv] <= placed:
                return
        out = []

        def grow(seq, placed, state):
            if ctx.complete <= placed:
                out.append(seq)
            for o in ctx.ops:
                if o.inv in placed or not preds[o.inv] <= placed:
                    continue
                ns, r = self.spec.apply(state, o.method, o.arg, o.proc)
                if o.ret is not None and r != o.value:
                    continue
                grow(seq + (o.inv,), placed | {o.inv}, ns)

        grow(tuple(base), placed, state)
        yield from out

    def sat(self, nid: int, base: tuple) -> bool:
        key = (nid, base)
        got = self.memo.get(key)
        if got is not None:
            return got
        self.explored += 1
        if self.explored > self.budget:
            raise TreeTooLarge(f"strong linearizability search exceeded {self.budget} states")
        node = self.tree.nodes[nid]
        if not self.is_complete(node):
            ok = all(self.sat(c, base) for c in node.children)
        else:
            ok = False
            for lin in self.extensions(node, base):
                if all(self.sat(c, lin) for c in node.children):
                    self.choice[key] = lin
                    ok = True
                    break
        self.memo[key] = ok
        return ok

    def mapping(self) -> dict:
        """One prefix-preserving assignment along the successful choices."""
        out: dict = {}
        stack = [(0, ())]
        seen = set()
        while stack:
            nid, base = stack.pop()
            if (nid, base) in seen:
                continue
            seen.add((nid, base))
            node = self.tree.nodes[nid]
            lin = self.choice.get((nid, base), base) if self.is_complete(node) else base
            out.setdefault(nid, self.linearization(node, lin))
            stack.extend((c, lin) for c in node.children)
        return out

    def linearization(self, node: TreeNode, invs: tuple) -> Linearization:
        ctx = self.context(node)
        state = self.spec.initial_state()
        entries = []
        for inv in invs:
            o = ctx.by_inv[inv]
            state, r = self.spec.apply(state, o.method, o.arg, o.proc)
            entries.append(LinEntry(inv, o.method, o.arg, r))
        return Linearization(tuple(entries))

    def witness(self) -> dict:
        """The first node, following forced choices from the root, at which
        every candidate linearization is refuted by some continuation."""
        nid, base = 0, ()
        while True:
            node = self.tree.nodes[nid]
            if not self.is_complete(node):
                bad = next(c for c in node.children if not self.sat(c, base))
                nid = bad
                continue
            cands = list(self.extensions(node, base))
            refuted = []
            for lin in cands:
                child = next(c for c in node.children if not self.sat(c, lin))
                refuted.append((lin, child))
            if len(refuted) == 1 and refuted[0][1] is not None and self.is_complete(self.tree.nodes[refuted[0][1]]):
                lin, child = refuted[0]
                if lin == base:
                    nid = child
                    continue
            return {
                "node": nid,
                "depth": node.depth,
                "history": _actions_json(node.history),
                "committed": self.linearization(node, base).to_json(),
                "refutations": [{"linearization": self.linearization(node, lin).to_json(),
                                 "dead_end": self.dead_end(c, lin)} for lin, c in refuted],
            }

    def dead_end(self, nid: int, base: tuple) -> dict:
        """Follow one refuting continuation to a node with no valid choice."""
        while True:
            node = self.tree.nodes[nid]
            if self.is_complete(node):
                cands = list(self.extensions(node, base))
                if not cands:
                    return {"node": nid, "depth": node.depth, "committed": self.linearization(node, base).to_json(),
                            "history": _actions_json(node.history)}
                base = cands[0]
            nid = next(c for c in node.children if not self.sat(c, base))


def _run(tree: ExecutionTree, spec, complete, budget: int) -> StrongVerdict:
    s = _Search(tree, spec, complete, budget)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 50_000))
    try:
        ok = s.sat(0, ())
        if ok:
            return StrongVerdict(True, s.mapping(), None, s.explored)
        return StrongVerdict(False, {}, s.witness(), s.explored)
    finally:
        sys.setrecursionlimit(old)


def check_strong_linearizable(tree: ExecutionTree, spec, budget: int = 10_000_000) -> StrongVerdict:
    """Is there a prefix-preserving choice of linearizations for all nodes?"""
    return _run(tree, spec, None, budget)


def completion_test(pm: Mapping[str, str]):
    """Node predicate: every invocation has reached its preamble end."""
    def complete(node: TreeNode) -> bool:
        for a in node.history:
            if a.kind != "call":
                continue
            end = pm.get(f"{a.obj}.{a.method}", pm.get(a.method))
            if end is None:
                raise KeyError(f"no preamble end for {a.method}")
            if end != CALL_LABEL and (a.inv, end) not in node.marks:
                return False
        return True
    return complete


def check_tail_strong(tree: ExecutionTree, spec, pm: Mapping[str, str], budget: int = 10_000_000) -> StrongVerdict:
    """Strong linearizability of the nodes complete w.r.t. ``pm`` (each
    linked to its nearest complete ancestor), plus linearizability of all."""
    for node in tree.nodes:
        ok, _ = check_linearizable(node.history, spec)
        if not ok:
            return StrongVerdict(False, {}, {"node": node.id, "depth": node.depth, "reason": "not linearizable",
                                            "history": _actions_json(node.history)})
    return _run(tree, spec, completion_test(pm), budget)
