"""Seeded random workloads under randomized schedules, checked for
linearizability."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator, Optional

from ..core import Engine, SeededTape, System, project_history
from ..objects import make_impl, spec_for
from ..progdsl import Program, parse_program
from ..values import to_json
from .linear import check_linearizable


def random_program(rng: random.Random, kind: str, n: int = 3, max_ops: int = 3) -> Program:
    """Each process issues 1..max_ops reads and writes with distinct values."""
    lines = [f"program fuzz-{kind}", "object X = 0"]
    value = 0
    for p in range(n):
        lines.append(f"process {p}")
        for i in range(rng.randint(1, max_ops)):
            may_write = kind != "il" or p == 0
            if may_write and rng.random() < 0.5:
                value += 1
                lines.append(f"  write X {value}")
            else:
                lines.append(f"  read r{i} X")
    return parse_program("\n".join(lines) + "\n")


@dataclass
class FuzzResult:
    kind: str
    k: int
    runs: int
    passed: int
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.runs


def fuzz_runs(kind: str, runs: int, seed: int, k: int = 1, n: int = 3, impl=None) -> Iterator[tuple]:
    """(index, program, execution) for each seeded run.  The delivery
    weight of the random schedule varies per run, so some runs keep stale
    messages around long enough to be delivered late.  ``impl`` replaces
    the implementation named by ``kind`` (workloads still follow ``kind``)."""
    from ..adversary.policies import RandomPolicy

    base = impl if impl is not None else make_impl(kind, k=k, iterate=k > 1)
    for i in range(runs):
        rng = random.Random(f"{seed}:{kind}:{k}:{i}")
        program = random_program(rng, kind, n)
        policy = RandomPolicy(rng.getrandbits(32), deliver_weight=rng.choice((0.3, 1.0, 3.0)))
        eng = Engine(System(program, base, n=n), SeededTape(rng.getrandbits(32)), budget=20_000)
        yield i, program, eng.run(policy)


def fuzz_linearizability(kind: str, runs: int, seed: int = 0, k: int = 1, n: int = 3,
                         kernel: Optional[str] = None, impl=None) -> FuzzResult:
    res = FuzzResult(kind, k, runs, 0)
    spec = spec_for(make_impl(kind).bind("X", 0, n, 0))
    for i, program, e in fuzz_runs(kind, runs, seed, k, n, impl):
        ok, _ = check_linearizable(project_history(e), spec, kernel)
        if ok:
            res.passed += 1
        else:
            res.failures.append({"run": i, "history": to_json([tuple(a) for a in project_history(e).actions])})
    return res
