"""Exact optimal-adversary value by expectimax over the id-free configurations.

Adversary nodes maximise over shared steps and message deliveries; random
steps average uniformly over their domain.  Three reductions keep the tree
small, none of which changes the optimum:

* Steps that touch only the stepping process (local computation, sends,
  calls and returns of non-atomic objects, branches) and random steps run
  as soon as they are enabled, lowest process first.  Such a step commutes
  with every other process's steps, and taking a random step early only
  hands the adversary information sooner.
* Messages whose delivery can no longer change any state are dropped.
* Configurations are memoised; message ids are not part of a configuration,
  so schedules that commute reach the same key.

On budget exhaustion unexplored nodes count as 0, so the reported value is
a certified lower bound.
"""

from __future__ import annotations

import sys
from hashlib import blake2b
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from ..objects.base import PICK, PRE
from ..core import HALTED, K_LOCAL, K_ORAND, K_PRAND, K_SHARED, RUNNING, Config, Directive, Engine, Proc, System
from ..progdsl import BadPredicate, Program
from .policies import Policy, Sequential

ZERO, ONE = Fraction(0), Fraction(1)


@dataclass
class SearchStats:
    nodes: int = 0
    memo_hits: int = 0
    chance_nodes: int = 0
    terminals: int = 0
    early_cuts: int = 0
    deadlocks: int = 0


@dataclass
class SearchResult:
    value: Fraction
    exhausted: bool
    stats: SearchStats
    policy: Optional["OptimalPolicy"] = None
    table: dict = field(default_factory=dict, repr=False)


def forced_move(system: System, cfg: Config):
    """The reduction's forced move at ``cfg``, or None at an adversary node.

    ('s', pid) local step, ('p', pid) random step with a single outcome,
    ('d', content) forced delivery, ('r', pid, domain) random step.
    """
    rand = None
    for pid in range(system.n):
        nxt = system.next_step(cfg, pid)
        if nxt is None:
            continue
        if nxt[0] == K_LOCAL:
            return ("s", pid)
        if nxt[0] == K_ORAND and len(set(cfg.procs[pid].frame.store)) == 1:
            # every iteration produced the same locals: nothing to draw
            return ("p", pid)
        if rand is None and nxt[0] in (K_PRAND, K_ORAND):
            rand = ("r", pid, nxt[2])
    if cfg.net:
        frames = [p.frame for p in cfg.procs]
        for c in cfg.net:
            if system.impls[c[1]].forced_delivery(c, frames):
                return ("d", c)
    return rand


def digest(cfg: Config) -> bytes:
    """128-bit digest of a configuration's value (its repr is canonical)."""
    return blake2b(repr(cfg).encode(), digest_size=16).digest()


def prune_stale(system: System, cfg: Config) -> Config:
    return system.prune_stale(cfg)


_GONE = Proc(0, (), HALTED, None)


class Future(NamedTuple):
    objs: frozenset  # objects the process may still access
    watched: bool  # may still make a watched invocation
    rand: bool  # may still take a program random step


class Relevance:
    """Static look-ahead over the remaining code of each process.

    Calling it drops processes and objects that can no longer influence a
    watched invocation.  An object is relevant if a relevant process may
    still access it; a process is relevant if it may still make a watched
    invocation or access a relevant object.  Whatever the rest does from
    here on cannot change the watched return values, and the reliable
    network lets it finish at any later time.
    """

    def __init__(self, system: System, watched) -> None:
        self.system = system
        self.watched = watched
        self.future = []
        for pid, cp in enumerate(system.code):
            table: dict = {}
            for pc in range(len(cp.code), -1, -1):
                table[pc] = self._scan(pid, cp.code, pc, table)
            self.future.append(table)
        self._cache: dict = {}
        self.iterated = frozenset(i for i, impl in enumerate(system.impls) if impl.k is not None and impl.k > 1)

    def _scan(self, pid, code, pc, table) -> Future:
        if pc >= len(code):
            return Future(frozenset(), False, False)
        ins = code[pc]
        op = ins[0]
        if op in ("loop", "halt"):
            return Future(frozenset(), False, False)
        succ = [ins[1]] if op == "jump" else [pc + 1] + ([ins[2]] if op == "branch" else [])
        objs, watched, rand = set(), False, op == "random"
        for nxt in succ:
            f = table[nxt] if nxt in table else self._scan(pid, code, nxt, table)
            objs |= f.objs
            watched = watched or f.watched
            rand = rand or f.rand
        if op in ("read", "write"):
            objs.add(ins[1])
            watched = watched or (pid, pc, 0) in self.watched
        return Future(frozenset(objs), watched, rand)

    def live(self, cfg: Config) -> dict:
        return {pid: self.future[pid][p.pc] for pid, p in enumerate(cfg.procs)
                if p.status == RUNNING and pid < len(self.future)}

    def relevant(self, cfg: Config):
        """(relevant processes, relevant objects) among the live ones."""
        key = tuple((p.status, p.pc) for p in cfg.procs)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        live = self.live(cfg)
        rel_p = {pid for pid, f in live.items() if f.watched}
        rel_o: set = set()
        for pid in rel_p:
            rel_o |= live[pid].objs
        grew = True
        while grew:
            grew = False
            for pid, f in live.items():
                if pid not in rel_p and f.objs & rel_o:
                    rel_p.add(pid)
                    rel_o |= f.objs
                    grew = True
        full = len(rel_p) == len(live) and len(rel_o) == len(cfg.objs)
        hit = self._cache[key] = (full, frozenset(rel_p), frozenset(rel_o))
        return hit

    def __call__(self, cfg: Config) -> Config:
        if self.watched is None:
            return cfg
        full, rel_p, rel_o = self.relevant(cfg)
        if full:
            return cfg
        procs = tuple(p if (p.status != RUNNING or pid in rel_p) else _GONE
                      for pid, p in enumerate(cfg.procs))
        objs = tuple(st if i in rel_o else None for i, st in enumerate(cfg.objs))
        net = tuple(c for c in cfg.net if c[1] in rel_o)
        return cfg._replace(procs=procs, objs=objs, net=net)

    def isolated_object(self, cfg: Config, moves: list) -> Optional[int]:
        """An object whose moves form a persistent set, or None.

        Object O qualifies when every live process that may still touch O is
        already inside its O operation, and every live process outside O has
        no random step ahead of it.  Moves on other objects then neither
        depend on O's moves nor can enable new ones, and postponing them
        hides no randomness from the adversary, so exploring O's moves alone
        keeps the optimal value.
        """
        live = self.live(cfg)
        cur, rand = {}, {}
        for pid, f in live.items():
            p = cfg.procs[pid]
            o = self.system.code[pid].code[p.pc][1]
            cur[pid] = o
            after = self.future[pid][p.pc + 1]
            pending = o in self.iterated and (p.frame is None or p.frame.stage in (PRE, PICK))
            rand[pid] = after.rand or bool(after.objs & self.iterated) or pending
        touched = {move_object(self.system, cfg, mv) for mv in moves}
        for o in sorted(set(cur.values())):
            if o not in touched:
                continue
            if all(cur[pid] == o for pid, f in live.items() if o in f.objs) and \
                    not any(rand[pid] for pid in live if cur[pid] != o):
                return o
        return None


def move_object(system: System, cfg: Config, mv) -> int:
    if mv[0] == "s":
        p = cfg.procs[mv[1]]
        return system.code[mv[1]].code[p.pc][1]
    return mv[1][1]


def adversary_moves(system: System, cfg: Config) -> list:
    """('s', pid) shared steps, ('d', content) deliveries and ('f', content)
    deliveries whose handler output is delivered with them."""
    moves = [("s", pid) for pid in range(system.n)
             if (nxt := system.next_step(cfg, pid)) is not None and nxt[0] == K_SHARED]
    prev = None
    for c in cfg.net:
        if c != prev:
            moves.append(("f" if c[0] in system.impls[c[1]].fused_tags else "d", c))
            prev = c
    return moves


def fused_outputs(system: System, cfg: Config, content: tuple) -> tuple:
    impl = system.impls[content[1]]
    return impl.handle(content, cfg.objs[content[1]])[1]


def apply_move(system: System, cfg: Config, mv) -> Config:
    if mv[0] == "s":
        return system.step(cfg, mv[1])[0]
    if mv[0] == "p":
        return system.step(cfg, mv[1], 1)[0]
    if mv[0] == "d":
        return system.deliver(cfg, mv[1])[0]
    outs = fused_outputs(system, cfg, mv[1])
    cfg = system.deliver(cfg, mv[1])[0]
    for c in outs:
        cfg = system.deliver(cfg, c)[0]
    return cfg


class Expectimax:
    """Expectimax with alpha-beta windows.

    ``value(cfg, alpha, beta)`` is exact when it lies strictly inside the
    window; a result <= alpha is an upper bound and a result >= beta a lower
    bound.  Chance nodes narrow their children's windows from the children
    already seen (values live in [0, 1]).  The memo keeps (lower, upper)
    bounds per configuration.
    """

    def __init__(self, system: System, bad: BadPredicate, budget: int = 10**7, por: bool = True):
        self.system = system
        self.por = por
        self.bad = bad
        self.budget = budget
        self.stats = SearchStats()
        self.memo: dict = {}
        self.best: dict = {}
        self.out_of_budget = False
        self.relevant = Relevance(system, bad.watched)

    def settle(self, cfg: Config):
        """Run forced moves other than random steps; returns (config, random move or None)."""
        system = self.system
        while True:
            cfg = self.relevant(prune_stale(system, cfg))
            mv = forced_move(system, cfg)
            if mv is None or mv[0] == "r":
                return cfg, mv
            cfg = apply_move(system, cfg, mv)

    def value(self, cfg: Config, alpha=-ONE, beta=ONE + 1) -> Fraction:
        cfg, chance = self.settle(cfg)
        early = self.bad.early(dict(cfg.outcome)) if cfg.outcome else None
        if early is not None:
            self.stats.early_cuts += 1
            return ONE if early else ZERO
        key = digest(cfg)
        lo, hi = self.memo.get(key, (ZERO, ONE))
        if lo == hi or hi <= alpha or lo >= beta:
            self.stats.memo_hits += 1
            return hi if hi <= alpha else lo
        alpha, beta = max(alpha, lo), min(beta, hi)
        if self.stats.nodes >= self.budget:
            # certified lower bound only
            self.out_of_budget = True
            return lo
        self.stats.nodes += 1
        if chance is not None:
            v = self._chance(cfg, chance, alpha, beta)
        else:
            v = self._max(cfg, key, alpha, beta)
        if self.out_of_budget:
            return max(v, lo) if v < beta else v
        if v <= alpha:
            hi = min(hi, v)
        elif v >= beta:
            lo = max(lo, v)
        else:
            lo = hi = v
        self.memo[key] = (lo, hi)
        return v

    def _chance(self, cfg, chance, alpha, beta) -> Fraction:
        self.stats.chance_nodes += 1
        _, pid, domain = chance
        m = len(domain)
        total = ZERO
        for i, r in enumerate(domain):
            rest = m - i - 1
            a = alpha * m - total - rest
            b = beta * m - total
            w = self.value(self.system.step(cfg, pid, r)[0], a, b)
            if w <= a:
                return (total + w + rest) / m
            if w >= b:
                return (total + w) / m
            total += w
        return total / m

    def _max(self, cfg, key, alpha, beta) -> Fraction:
        system = self.system
        moves = adversary_moves(system, cfg)
        if not moves:
            if any(p.status == RUNNING for p in cfg.procs):
                self.stats.deadlocks += 1
                return ZERO
            self.stats.terminals += 1
            return ONE if self.bad(dict(cfg.outcome)) else ZERO
        if self.por:
            o = self.relevant.isolated_object(cfg, moves)
            if o is not None:
                moves = [mv for mv in moves if move_object(system, cfg, mv) == o]
        best, arg = ZERO, None
        for mv in moves:
            w = self.value(apply_move(system, cfg, mv), max(alpha, best), beta)
            if arg is None or w > best:
                best, arg = w, mv
                if best >= beta or best == ONE:
                    break
        self.best[key] = arg
        return best


def expectimax(program: Program, bindings, bad: BadPredicate, budget: int = 10**7,
               n: Optional[int] = None, por: bool = True) -> SearchResult:
    """Maximal probability, over strong adversaries, that the outcome lands in ``bad``."""
    system = System(program, bindings, n=n, watch=bad.watched, log=False)
    search = Expectimax(system, bad, budget, por)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 200_000))
    try:
        value = search.value(system.initial())
    finally:
        sys.setrecursionlimit(old)
    exhausted = not search.out_of_budget
    policy = OptimalPolicy(search.best, bad.watched, name="optimal" if exhausted else "best-found")
    return SearchResult(value, exhausted, search.stats, policy, search.memo)


class OptimalPolicy(Policy):
    """Replays the moves chosen by the search.

    Off the searched tree (or where the verdict was already fixed) it falls
    back to a sequential schedule.
    """

    def __init__(self, best: dict, watched=None, name: str = "optimal"):
        self.best = best
        self.watched = watched
        self.name = name
        self._fallback = Sequential()
        self._system: Optional[System] = None
        self._queue: list = []
        self._relevant: Optional[Relevance] = None

    def fresh(self, seed: int = 0) -> "OptimalPolicy":
        return OptimalPolicy(self.best, self.watched, self.name)

    def _view(self, eng: Engine) -> System:
        if self._system is None:
            s = eng.system
            self._system = System(s.program, {i.name: i for i in s.impls}, n=s.n, watch=self.watched, log=False)
        return self._system

    @staticmethod
    def _deliver(eng: Engine, content: tuple) -> Optional[Directive]:
        for m in eng.network.inflight.values():
            if m.content == content:
                return Directive(m.dest, m.mid)
        return None

    def __call__(self, eng: Engine):
        if self._queue:
            d = self._deliver(eng, self._queue.pop(0))
            if d is not None:
                return d
        view = self._view(eng)
        cfg = eng.cfg
        if self.watched is not None:
            cfg = cfg._replace(outcome=tuple(x for x in cfg.outcome if x[0] in self.watched))
        if self._relevant is None:
            self._relevant = Relevance(view, self.watched)
        cfg = self._relevant(prune_stale(view, cfg))
        mv = forced_move(view, cfg)
        if mv is None:
            mv = self.best.get(digest(cfg))
            if mv is None:
                return self._fallback(eng)
        if mv[0] in ("s", "r", "p"):
            return Directive(mv[1])
        if mv[0] == "f":
            self._queue = list(fused_outputs(view, cfg, mv[1]))
        return self._deliver(eng, mv[1]) or self._fallback(eng)
