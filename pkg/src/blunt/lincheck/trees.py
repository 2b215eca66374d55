"""Finite execution trees and their bounded exhaustive enumeration.

A node stands for one execution: the call/return history it produced, the
control points each invocation has reached, and the timestamps invocations
committed to.  Children extend the execution by one scheduling move.  The
enumerator shares nodes whose executions agree on all of that and on the
system configuration, because their subtrees are then identical; the result
is a DAG whose unfolding is the execution tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..core import K_LOCAL, K_ORAND, K_PRAND, Action, Config, System
from ..progdsl import Program, parse_program
from ..values import from_json


class TreeTooLarge(RuntimeError):
    pass


@dataclass
class TreeNode:
    id: int
    history: tuple                 # Actions, in order
    marks: frozenset               # (inv, control point) pairs reached
    stamps: tuple                  # sorted ((inv, timestamp), ...)
    depth: int
    children: list = field(default_factory=list)


@dataclass
class ExecutionTree:
    nodes: list
    truncated: bool = False        # the depth cap cut some executions short

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def edges(self) -> Iterable[tuple[TreeNode, TreeNode]]:
        for node in self.nodes:
            for c in node.children:
                yield node, self.nodes[c]

    def invocations(self, node: TreeNode) -> dict:
        """inv -> (object, method) for every call in the node's history."""
        return {a.inv: (a.obj, a.method) for a in node.history if a.kind == "call"}

    @classmethod
    def from_executions(cls, executions: Sequence, obj: Optional[str] = None) -> "ExecutionTree":
        """Prefix tree of recorded executions (lists of ``Step``), keeping
        only the calls and returns on ``obj`` when it is given."""
        nodes = [TreeNode(0, (), frozenset(), (), 0)]
        index: dict = {}
        for steps in executions:
            cur = nodes[0]
            calls: dict = {}  # inv -> (object, method, arg), None when filtered out
            for s in steps:
                hist, marks, stamps = cur.history, cur.marks, dict(cur.stamps)
                inv = None if s.inv is None else tuple(s.inv)
                if s.kind == "call":
                    p = s.payload
                    keep = obj is None or p["obj"] == obj
                    calls[inv] = (p["obj"], p["method"], from_json(p["arg"])) if keep else None
                    if keep:
                        hist = hist + (Action("call", inv, *calls[inv], None),)
                elif s.kind == "return" and calls.get(inv) is not None:
                    hist = hist + (Action("return", inv, *calls[inv], from_json(s.payload["value"])),)
                if inv is not None and calls.get(inv) is not None:
                    marks = marks | {(inv, s.site)}
                    if s.payload.get("ts") is not None:
                        stamps[inv] = from_json(s.payload["ts"])
                key = (cur.id, s.seq, s.kind, s.site, repr(s.payload))
                nxt = index.get(key)
                if nxt is None:
                    nxt = TreeNode(len(nodes), hist, marks, tuple(sorted(stamps.items())), cur.depth + 1)
                    nodes.append(nxt)
                    cur.children.append(nxt.id)
                    index[key] = nxt
                cur = nxt
        return cls(nodes)


WRITERS_READER = """\
program writers-reader
object R = bot
process 0
  write R 0
process 1
  write R 1
process 2
  read u R
"""


def writers_reader_program(reads: int = 1) -> Program:
    text = WRITERS_READER + "".join(f"  read u{i} R\n" for i in range(1, reads))
    return parse_program(text)


# requests whose handler reply is delivered in the same move
REQUESTS = ("query", "update")


class _Explorer:
    def __init__(self, system: System, depth: int, max_nodes: int, reduce: bool):
        self.system = system
        self.depth = depth
        self.max_nodes = max_nodes
        self.reduce = reduce
        self.nodes: list = []
        self.index: dict = {}
        self.truncated = False

    def _apply(self, cfg: Config, move, hist, marks, stamps):
        sysm = self.system
        if move[0] == "d":
            cfg, ev = sysm.deliver(cfg, move[1])
        elif move[0] == "f":
            cfg, ev = sysm.deliver(cfg, move[1])
            outs = [p["content"] for kind, _, _, p in ev if kind == "send"]
            for c in outs:
                cfg, ev2 = sysm.deliver(cfg, c)
                ev = ev + ev2
        else:
            cfg, ev = sysm.step(cfg, move[1], move[2] if len(move) > 2 else None)
        for kind, inv, site, p in ev:
            if kind == "call":
                hist = hist + (Action("call", tuple(inv), p["obj"], p["method"], from_json(p["arg"]), None),)
            elif kind == "return":
                arg = next(a.arg for a in hist if a.kind == "call" and a.inv == tuple(inv))
                hist = hist + (Action("return", tuple(inv), p["obj"], p["method"], arg, from_json(p["value"])),)
            if inv is not None:
                marks = marks | {(tuple(inv), site)}
        new = dict(stamps)
        for proc in cfg.procs:
            fr = proc.frame
            if fr is not None:
                ts = sysm.impls[fr.obj].timestamp(fr)
                if ts is not None:
                    new[tuple(fr.inv)] = ts
        return cfg, hist, marks, tuple(sorted(new.items()))

    def _settle(self, cfg, hist, marks, stamps):
        """Eager frame-internal local steps; stale messages dropped."""
        sysm = self.system
        while True:
            cfg = sysm.prune_stale(cfg)
            for pid in range(sysm.n):
                proc = cfg.procs[pid]
                nxt = sysm.next_step(cfg, pid)
                if nxt is None or nxt[0] != K_LOCAL:
                    continue
                if proc.frame is None and proc.pc < len(sysm.code[pid].code):
                    continue  # calls stay scheduling choices
                cfg, hist, marks, stamps = self._apply(cfg, ("s", pid), hist, marks, stamps)
                break
            else:
                return cfg, hist, marks, stamps

    def moves(self, cfg: Config):
        sysm = self.system
        out = []
        for pid in range(sysm.n):
            nxt = sysm.next_step(cfg, pid)
            if nxt is None:
                continue
            if nxt[0] in (K_PRAND, K_ORAND):
                out.extend(("s", pid, v) for v in nxt[2])
            else:
                out.append(("s", pid))
        seen = set()
        for c in cfg.net:
            if c in seen:
                continue
            seen.add(c)
            fused = self.reduce and c[0] in REQUESTS
            out.append(("f" if fused else "d", c))
        return out

    def node(self, cfg, hist, marks, stamps, depth) -> int:
        if self.reduce:
            cfg, hist, marks, stamps = self._settle(cfg, hist, marks, stamps)
        key = (cfg, hist, marks, stamps)
        got = self.index.get(key)
        if got is not None:
            return got
        if len(self.nodes) >= self.max_nodes:
            raise TreeTooLarge(f"more than {self.max_nodes} nodes")
        nid = len(self.nodes)
        node = TreeNode(nid, hist, marks, stamps, depth)
        self.nodes.append(node)
        self.index[key] = nid
        if depth >= self.depth:
            if self.moves(cfg):
                self.truncated = True
            return nid
        for m in self.moves(cfg):
            c2, h2, m2, s2 = self._apply(cfg, m, hist, marks, stamps)
            child = self.node(c2, h2, m2, s2, depth + 1)
            if child not in node.children:
                node.children.append(child)
        return nid


def enumerate_tree(program: Program, bindings, depth: int, n: Optional[int] = None,
                   max_nodes: int = 2_000_000, reduce: bool = True) -> ExecutionTree:
    """All executions of ``program`` up to ``depth`` scheduling moves.

    With ``reduce`` on, a process's own non-shared steps after its call are
    taken as soon as they are enabled, every request is delivered together
    with its response (one move per client/server exchange), and messages
    whose delivery changes nothing are dropped.  The
    result is then a prefix-closed subset of the executions.
    """
    import sys
    sysm = System(program, bindings, n=n)
    ex = _Explorer(sysm, depth, max_nodes, reduce)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 20 * depth + 1000))
    try:
        ex.node(sysm.initial(), (), frozenset(), (), 0)
    finally:
        sys.setrecursionlimit(old)
    return ExecutionTree(ex.nodes, ex.truncated)
