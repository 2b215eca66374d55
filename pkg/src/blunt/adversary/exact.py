"""Exact bad-outcome probability of a fixed policy, by enumerating tapes.

A policy is deterministic given the random values it has seen, so the runs
of a policy form a finite tree branching only at random steps.  The tree is
walked by replaying each tape prefix from the start.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..core import Engine, System, outcome_of
from ..progdsl import BadPredicate, Program
from .policies import Policy


class _NeedDraw(Exception):
    def __init__(self, domain):
        self.domain = tuple(domain)


class _PrefixTape:
    def __init__(self, prefix):
        self.prefix = prefix
        self.pos = 0

    def draw(self, domain, origin):
        if self.pos >= len(self.prefix):
            raise _NeedDraw(domain)
        v = self.prefix[self.pos]
        self.pos += 1
        return v


@dataclass
class PolicyValue:
    value: Fraction
    tapes: int


def exact_policy_value(program: Program, bindings, policy: Policy, bad: BadPredicate,
                       n: Optional[int] = None, budget: int = 100_000, max_tapes: int = 1_000_000) -> PolicyValue:
    """Pr[bad] under ``policy`` with uniformly random tapes, as a Fraction."""
    system = System(program, bindings, n=n)
    tapes = 0

    def walk(prefix: tuple) -> Fraction:
        nonlocal tapes
        eng = Engine(system, _PrefixTape(prefix), budget)
        try:
            e = eng.run(policy.fresh(0))
        except _NeedDraw as need:
            share = Fraction(1, len(need.domain))
            return sum((share * walk(prefix + (v,)) for v in need.domain), Fraction(0))
        tapes += 1
        if tapes > max_tapes:
            raise RuntimeError(f"more than {max_tapes} tapes")
        return Fraction(int(bad(outcome_of(e).values)))

    return PolicyValue(walk(()), tapes)
