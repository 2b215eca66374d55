"""Dynamic check that a declared preamble cannot influence other processes.

Driver programs exercise an object under several schedules.  For every
invocation of the audited method, each of its steps up to and including the
declared preamble end must be one of:

* a local step that leaves the shared part of the object state unchanged,
* a read of a base register,
* a message send whose handling left the handler's state unchanged
  (or that was never handled),
* a message receipt by the invoking client.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from ..progdsl import Program, parse_program
from .base import CALL_LABEL, ObjectImpl

DRIVER_TEMPLATE = """\
program audit-{kind}
object X = 0
process 0
{p0}
process 1
{p1}
process 2
{p2}
"""


def driver_programs(impl: ObjectImpl) -> list[Program]:
    """Small three-process programs mixing reads and writes on one object."""
    w = lambda v: f"  write X {v}"
    r = lambda name: f"  read {name} X"
    if impl.kind == "il":
        # single writer
        bodies = [
            ([w(1), w(2)], [r("a"), r("b")], [r("c"), r("d")]),
            ([w(1), r("a")], [r("b")], [r("c")]),
        ]
    else:
        bodies = [
            ([w(1), r("a")], [w(2), r("b")], [r("c"), r("d")]),
            ([w(1), w(3)], [r("a"), w(2)], [r("b")]),
        ]
    return [parse_program(DRIVER_TEMPLATE.format(kind=impl.kind, p0="\n".join(a), p1="\n".join(b),
                                                 p2="\n".join(c)))
            for a, b, c in bodies]


@dataclass
class AuditReport:
    ok: bool
    method: str
    end: str
    invocations: int = 0
    steps: int = 0
    violations: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


def _schedules(seeds: Iterable[int]):
    from ..adversary.policies import RandomPolicy, RoundRobin, Sequential
    yield Sequential()
    yield RoundRobin()
    for s in seeds:
        yield RandomPolicy(s)


def audit_execution(steps, method: str, end: str, obj: Optional[str] = None):
    """(invocations audited, preamble steps seen, violations) for one run."""
    handled = {}
    for s in steps:
        if s.kind == "deliver" and s.inv is None:
            handled[s.payload["msg"]] = s.payload["state_changed"]
    # inv -> "open" inside the preamble, "end" on the closing step, "closed"
    audited: dict = {}
    count = 0
    bad = []
    for s in steps:
        if s.kind == "call":
            if s.payload["method"] == method and (obj is None or s.payload["obj"] == obj):
                audited[s.inv] = "closed" if end == CALL_LABEL else "open"
            continue
        state = audited.get(s.inv, "closed")
        if state == "end" and s.site != end:
            audited[s.inv] = state = "closed"
        if state == "closed":
            continue
        if s.kind == "return" and s.site != end:
            raise ValueError(f"{method} returned before reaching control point {end!r}")
        count += 1
        p = s.payload
        if s.kind == "local":
            fine = not p.get("shared_changed", False)
        elif s.kind == "access":
            fine = p["op"] == "read"
        elif s.kind == "send":
            fine = not handled.get(p["msg"], False)
        else:
            fine = s.kind in ("deliver", "random", "return")
        if not fine:
            bad.append({"seq": s.seq, "inv": tuple(s.inv), "kind": s.kind, "site": s.site})
        if s.site == end:
            # one transition may log several events under the same label
            audited[s.inv] = "end"
    return len(audited), count, bad


def audit_effect_free(impl: ObjectImpl, method: str, pm: Optional[Mapping[str, str]] = None,
                      programs: Optional[list] = None, seeds: Iterable[int] = range(8)) -> AuditReport:
    """True iff every observed preamble step of ``method`` is effect-free.

    ``pm`` overrides the object's declared preamble mapping, which is how a
    mis-declared preamble is audited.
    """
    from ..core import Engine, RandomTape, System  # core imports this package

    impl.check_method(method)
    end = (pm or impl.preamble_mapping())[method]
    report = AuditReport(True, method, end)
    seeds = list(seeds)
    for program in programs or driver_programs(impl):
        for policy in _schedules(seeds):
            eng = Engine(System(program, impl, log=True), RandomTape([1] * 64))
            e = eng.run(policy)
            n_inv, n_steps, bad = audit_execution(e.steps, method, end)
            report.invocations += n_inv
            report.steps += n_steps
            report.violations.extend(bad)
    report.ok = not report.violations
    return report
