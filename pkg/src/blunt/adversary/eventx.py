"""Event X: every object random step picked a preamble iteration that no
program random step falls inside."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ..core import OBJECT, PROGRAM, Execution


def iteration_spans(e: Execution) -> dict:
    """(invocation, iteration) -> (first seq, last seq) of the invoking
    process's preamble steps in that iteration."""
    spans: dict = {}
    for s in e.steps:
        it = s.payload.get("iter") if s.inv is not None else None
        if it is None:
            continue
        key = (s.inv, it)
        lo, hi = spans.get(key, (s.seq, s.seq))
        spans[key] = (min(lo, s.seq), max(hi, s.seq))
    return spans


def event_x_holds(e: Execution) -> bool:
    program_draws = [s.seq for s in e.steps if s.kind == "random" and s.payload.get("origin") == PROGRAM]
    spans = iteration_spans(e)
    for s in e.steps:
        if s.kind != "random" or s.payload.get("origin") != OBJECT:
            continue
        span = spans.get((s.inv, s.payload["value"]))
        if span is None:
            continue
        lo, hi = span
        if any(lo < q < hi for q in program_draws):
            return False
    return True


@dataclass(frozen=True)
class Decomposition:
    """Exact frequencies over a batch of (bad, x) trial records."""

    trials: int
    bad: Fraction
    x: Fraction
    bad_given_x: Fraction
    bad_given_not_x: Fraction

    @property
    def recombined(self) -> Fraction:
        return self.bad_given_x * self.x + self.bad_given_not_x * (1 - self.x)

    @property
    def holds(self) -> bool:
        return self.recombined == self.bad


def decompose(records: Iterable[tuple[bool, bool]]) -> Decomposition:
    """freq(bad) split by conditioning on X; an empty condition gets 0."""
    n = bx = x = bnx = 0
    for bad, xi in records:
        n += 1
        if xi:
            x += 1
            bx += bool(bad)
        else:
            bnx += bool(bad)
    if n == 0:
        raise ValueError("no trials")
    return Decomposition(
        n,
        Fraction(bx + bnx, n),
        Fraction(x, n),
        Fraction(bx, x) if x else Fraction(0),
        Fraction(bnx, n - x) if n - x else Fraction(0),
    )
