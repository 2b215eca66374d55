"""Reachable outcome sets, for comparing object implementations."""

from __future__ import annotations

from typing import Optional

from ..core import K_ORAND, K_PRAND, System
from ..progdsl import Program
from .search import adversary_moves, apply_move, forced_move


class OutcomeSpaceTooLarge(RuntimeError):
    pass


def _successors(system: System, cfg, reduce: bool) -> list:
    if reduce:
        mv = forced_move(system, cfg)
        if mv is not None and mv[0] != "r":
            return [apply_move(system, cfg, mv)]
        if mv is not None:
            return [system.step(cfg, mv[1], r)[0] for r in mv[2]]
        return [apply_move(system, cfg, m) for m in adversary_moves(system, cfg)]
    out = []
    for pid in range(system.n):
        step = system.next_step(cfg, pid)
        if step is None:
            continue
        if step[0] in (K_PRAND, K_ORAND):
            out.extend(system.step(cfg, pid, r)[0] for r in step[2])
        else:
            out.append(system.step(cfg, pid)[0])
    out.extend(system.deliver(cfg, c)[0] for c in set(cfg.net))
    return out


def outcome_set(program: Program, bindings, depth: Optional[int] = None, n: Optional[int] = None,
                watch: Optional[frozenset] = None, reduce: bool = True,
                max_states: int = 5_000_000) -> tuple[frozenset, bool]:
    """Outcomes of the executions that finish within ``depth`` moves.

    An outcome is the sorted tuple of (invocation, return value) pairs
    together with the processes' terminal flags.  Returns the set and
    whether the depth cap cut any execution short.

    Every random value is explored.  Messages whose delivery changes nothing
    are dropped.  With ``reduce`` the search's forced moves (steps private
    to one process, interchangeable acknowledgements) run eagerly and a
    request is delivered together with its reply; these only remove
    interleavings that end in an outcome some kept interleaving also reaches.
    """
    system = System(program, bindings, n=n, watch=watch, log=False)
    seen: set = set()
    found = set()
    truncated = False
    frontier = [system.prune_stale(system.initial())]
    seen.add(frontier[0])
    level = 0
    while frontier:
        nxt = []
        for cfg in frontier:
            succ = _successors(system, cfg, reduce)
            if not succ:
                found.add((cfg.outcome, system.terminal_flags(cfg)))
                continue
            if depth is not None and level >= depth:
                truncated = True
                continue
            for c in succ:
                c = system.prune_stale(c)
                if c not in seen:
                    seen.add(c)
                    nxt.append(c)
            if len(seen) > max_states:
                raise OutcomeSpaceTooLarge(f"more than {max_states} configurations")
        frontier = nxt
        level += 1
    return frozenset(found), truncated
