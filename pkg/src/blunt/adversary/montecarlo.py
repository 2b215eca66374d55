"""Seeded Monte Carlo estimation of bad-outcome probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Optional

from ..core import LOOP_FOREVER, Engine, SeededTape, System, outcome_of
from ..progdsl import BadPredicate, Program
from .eventx import Decomposition, decompose, event_x_holds
from .policies import Policy

CONFIDENCE = 0.99


def trial_seed(master_seed: int, index: int, stream: str = "tape") -> int:
    """Keyed blake2b of the trial index under the master seed (64-bit)."""
    key = str(master_seed).encode()
    return int.from_bytes(blake2b(f"{stream}:{index}".encode(), key=key, digest_size=8).digest(), "big")


def hoeffding_half_width(trials: int, confidence: float = CONFIDENCE) -> float:
    return math.sqrt(math.log(2 / (1 - confidence)) / (2 * trials))


@dataclass(frozen=True)
class Trial:
    index: int
    seed: int
    bad: bool
    x: bool
    randoms: tuple
    outcome: dict
    terminal: tuple


@dataclass
class MonteCarloResult:
    trials: int
    bad_count: int
    half_width: float
    records: list = field(default_factory=list, repr=False)

    @property
    def estimate(self) -> float:
        return self.bad_count / self.trials

    @property
    def ci_low(self) -> float:
        return max(0.0, self.estimate - self.half_width)

    @property
    def ci_high(self) -> float:
        return min(1.0, self.estimate + self.half_width)

    def decomposition(self) -> Decomposition:
        return decompose((t.bad, t.x) for t in self.records)


def run_trial(system: System, policy: Policy, bad: Optional[BadPredicate], master_seed: int, index: int,
              budget: int = 100_000) -> Trial:
    """One seeded run.  Without a predicate, a run is bad when some process
    loops forever."""
    seed = trial_seed(master_seed, index)
    eng = Engine(system, SeededTape(seed), budget)
    e = eng.run(policy.fresh(trial_seed(master_seed, index, "policy")))
    out = outcome_of(e)
    flag = bad(out.values) if bad is not None else LOOP_FOREVER in out.terminal
    return Trial(index, seed, flag, event_x_holds(e), tuple(eng.random_values()),
                 out.values, out.terminal)


def monte_carlo(program: Program, bindings, policy: Policy, trials: int, master_seed: int,
                bad: Optional[BadPredicate], n: Optional[int] = None, budget: int = 100_000,
                confidence: float = CONFIDENCE) -> MonteCarloResult:
    """Bad-outcome frequency over ``trials`` runs with a two-sided Hoeffding
    interval.  Trial i draws its tape from ``trial_seed(master_seed, i)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    system = System(program, bindings, n=n)
    records = [run_trial(system, policy, bad, master_seed, i, budget) for i in range(trials)]
    return MonteCarloResult(trials, sum(t.bad for t in records), hoeffding_half_width(trials, confidence), records)
