"""Deterministic step machine for programs over object implementations.

Two layers:

``System`` is the id-free transition relation over immutable ``Config``
values.  The search uses it directly.

``Engine`` drives a ``System`` under an adversary policy and a random tape,
numbers messages, and records the ``Execution`` (a list of ``Step``
records).  ``run`` is the one-shot entry point.
"""

from __future__ import annotations

import json
import random as _random
from dataclasses import dataclass, field
from operator import itemgetter
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

from .netsim import Message, Network, NotDeliverable
from .objects.base import (
    BASE,
    BLOCKED,
    CALL_LABEL,
    LOCAL,
    ORAND,
    PRE,
    RETURN,
    SEND,
    TAIL,
    Frame,
    ObjectImpl,
    UnknownMethod,
    frame_next,
    frame_start,
    frame_step,
    settle,
)
from .progdsl import InvocationId, Program, compile_program, eval_expr
from .values import BOT, from_json, to_json

RUNNING, HALTED, LOOPING = 0, 1, 2

TERMINATED = "Terminated"
LOOP_FOREVER = "LoopForever"
BLOCKED_FLAG = "Blocked"

# step kinds as seen by a scheduler
K_LOCAL = "local"  # commutes with every other process's steps
K_SHARED = "shared"  # touches shared state
K_PRAND = "prand"  # program random step
K_ORAND = "orand"  # object random step

PROGRAM, OBJECT = "program", "object"


class EngineError(RuntimeError):
    pass


class TapeExhausted(EngineError):
    pass


class TapeDomainError(EngineError):
    pass


class BudgetExceeded(EngineError):
    def __init__(self, msg: str, execution: "Execution | None" = None):
        super().__init__(msg)
        self.execution = execution


class PolicyIllegalDirective(EngineError):
    pass


class Proc(NamedTuple):
    pc: int
    env: tuple
    status: int
    frame: Optional[Frame]


class Config(NamedTuple):
    procs: tuple
    objs: tuple
    net: tuple  # sorted message contents (a multiset)
    outcome: tuple  # ((InvocationId, value), ...) sorted by id
    nrand: tuple  # (program random steps, object random steps)


_first = itemgetter(0)


def _insort(seq: tuple, items) -> tuple:
    return tuple(sorted(seq + tuple(items)))


class System:
    """Transition relation of ``program`` over bound object implementations.

    ``bindings`` maps object names to unbound implementations (or is a single
    implementation used for every object).  ``n`` sets the number of
    processes hosting object state; it defaults to the program's process
    count and may exceed it (extra processes only act as servers).
    ``watch`` restricts which invocations are kept in ``Config.outcome``.
    """

    def __init__(self, program: Program, bindings: Union[ObjectImpl, Mapping[str, ObjectImpl]],
                 n: Optional[int] = None, watch: Optional[frozenset] = None, log: bool = True):
        program.validate()
        self.program = program
        self.code = compile_program(program)
        self.n = max(program.n, n or program.n)
        impls = []
        for idx, (name, init) in enumerate(program.objects):
            impl = bindings if isinstance(bindings, ObjectImpl) else bindings[name]
            impls.append(impl.bind(name, idx, self.n, init))
        self.impls = tuple(impls)
        self.watch = watch
        self.log = log

    @property
    def object_names(self) -> tuple[str, ...]:
        return self.program.object_names

    def initial(self) -> Config:
        procs = []
        for pid in range(self.n):
            if pid < len(self.code):
                cp = self.code[pid]
                procs.append(Proc(self._goto(pid, 0), (BOT,) * len(cp.var_names), RUNNING, None))
            else:
                procs.append(Proc(0, (), HALTED, None))
        return Config(tuple(procs), tuple(i.initial_state() for i in self.impls), (), (), (0, 0))

    def _goto(self, pid: int, pc: int) -> int:
        code = self.code[pid].code
        while pc < len(code) and code[pc][0] == "jump":
            pc = code[pc][1]
        return pc

    # -- scheduling view ------------------------------------------------------

    def next_step(self, cfg: Config, pid: int):
        """(kind, label, domain) of ``pid``'s next step, or None if it has none."""
        proc = cfg.procs[pid]
        if proc.status != RUNNING:
            return None
        fr = proc.frame
        if fr is not None:
            impl = self.impls[fr.obj]
            kind, label = frame_next(impl, fr, pid, cfg.objs[fr.obj])
            if kind == BLOCKED:
                return None
            if kind == BASE:
                return K_SHARED, label, None
            if kind == ORAND:
                return K_ORAND, label, tuple(range(1, impl.k + 1))
            return K_LOCAL, label, None
        code = self.code[pid].code
        if proc.pc >= len(code):
            return K_LOCAL, proc.pc, None
        ins = code[proc.pc]
        op = ins[0]
        if op == "random":
            return K_PRAND, proc.pc, ins[1]
        if op in ("read", "write"):
            return (K_SHARED if self.impls[ins[1]].atomic else K_LOCAL), proc.pc, None
        return K_LOCAL, proc.pc, None

    def stale(self, cfg: Config, content: tuple) -> bool:
        frames = [p.frame for p in cfg.procs]
        return self.impls[content[1]].is_stale(content, frames)

    def prune_stale(self, cfg: Config) -> Config:
        """``cfg`` without the in-flight messages whose delivery is a no-op."""
        if not cfg.net:
            return cfg
        frames = [p.frame for p in cfg.procs]
        impls = self.impls
        net = tuple(c for c in cfg.net if not impls[c[1]].is_stale(c, frames))
        return cfg if len(net) == len(cfg.net) else cfg._replace(net=net)

    def terminal_flags(self, cfg: Config) -> tuple:
        out = []
        for p in cfg.procs[: self.program.n]:
            out.append(TERMINATED if p.status == HALTED else LOOP_FOREVER if p.status == LOOPING else BLOCKED_FLAG)
        return tuple(out)

    # -- transitions --------------------------------------------------------

    def _record(self, outcome: tuple, inv, value) -> tuple:
        if self.watch is not None and inv not in self.watch:
            return outcome
        return tuple(sorted(outcome + ((inv, value),), key=_first))

    def step(self, cfg: Config, pid: int, rand=None):
        """Take ``pid``'s next step.  ``rand`` supplies the value of a random
        step.  Returns (config, events) where events is None unless logging."""
        ev = [] if self.log else None
        procs, objs, net, outcome, nrand = cfg
        proc = procs[pid]
        if proc.status != RUNNING:
            raise EngineError(f"process {pid} has no step")
        fr = proc.frame
        pc, env = proc.pc, proc.env
        if fr is not None:
            impl = self.impls[fr.obj]
            st = objs[fr.obj]
            kind, label = frame_next(impl, fr, pid, st)
            if kind == BLOCKED:
                raise EngineError(f"process {pid} is blocked")
            if kind == RETURN:
                value = fr.sub
                outcome = self._record(outcome, fr.inv, value)
                ins = self.code[pid].code[pc]
                if ins[0] == "read":
                    env = env[: ins[2]] + (value,) + env[ins[2] + 1:]
                if ev is not None:
                    ev.append(("return", fr.inv, label, {"value": to_json(value), "obj": impl.name, "method": fr.method}))
                proc = Proc(self._goto(pid, pc + 1), env, RUNNING, None)
                return Config(_set(procs, pid, proc), objs, net, outcome, nrand), ev
            if kind == ORAND:
                fr, st, sends, access = frame_step(impl, fr, pid, st, rand)
                nrand = (nrand[0], nrand[1] + 1)
                if ev is not None:
                    ev.append(("random", fr.inv, label, {"domain": list(range(1, impl.k + 1)), "value": rand, "origin": OBJECT}))
            else:
                before, it = st, (fr.it if fr.stage == PRE else None)
                fr, st, sends, access = frame_step(impl, fr, pid, st)
                if ev is not None:
                    if access is not None:
                        ev.append(("access", fr.inv, label, {
                            "obj": impl.name, "base": access.name, "op": access.op,
                            "args": to_json(access.args), "result": to_json(access.result), "iter": it}))
                    else:
                        shared = impl.shared_part(before) != impl.shared_part(st)
                        payload = {"shared_changed": shared, "iter": it}
                        ts = impl.timestamp(fr) if fr.stage == TAIL else None
                        if ts is not None:
                            payload["ts"] = to_json(ts)
                        ev.append(("local", fr.inv, label, payload))
                    for c in sends:
                        ev.append(("send", fr.inv, label, {"content": c, "iter": it}))
            if sends:
                net = _insort(net, sends)
            proc = Proc(pc, env, RUNNING, fr)
            return Config(_set(procs, pid, proc), _set(objs, fr.obj, st), net, outcome, nrand), ev

        code = self.code[pid].code
        if pc >= len(code):
            if ev is not None:
                ev.append(("local", None, pc, {"op": "end"}))
            return Config(_set(procs, pid, Proc(pc, env, HALTED, None)), objs, net, outcome, nrand), ev
        ins = code[pc]
        op = ins[0]
        if op == "random":
            if rand not in ins[1]:
                raise TapeDomainError(f"value {rand!r} outside domain {ins[1]!r}")
            env = env[: ins[2]] + (rand,) + env[ins[2] + 1:]
            if ev is not None:
                ev.append(("random", None, pc, {"domain": to_json(ins[1]), "value": to_json(rand), "origin": PROGRAM}))
            proc = Proc(self._goto(pid, pc + 1), env, RUNNING, None)
            return Config(_set(procs, pid, proc), objs, net, outcome, (nrand[0] + 1, nrand[1])), ev
        if op in ("read", "write"):
            impl = self.impls[ins[1]]
            inv = InvocationId(pid, pc, 0)
            method = impl.read_method if op == "read" else impl.write_method
            arg = eval_expr(ins[2], env) if op == "write" else None
            if ev is not None:
                ev.append(("call", inv, CALL_LABEL, {"obj": impl.name, "method": method, "arg": to_json(arg)}))
            if impl.atomic:
                st, value = impl.apply(method, arg, objs[ins[1]])
                objs = _set(objs, ins[1], st)
                outcome = self._record(outcome, inv, value)
                if op == "read":
                    env = env[: ins[2]] + (value,) + env[ins[2] + 1:]
                if ev is not None:
                    ev.append(("return", inv, "return", {"value": to_json(value), "obj": impl.name, "method": method}))
                proc = Proc(self._goto(pid, pc + 1), env, RUNNING, None)
                return Config(_set(procs, pid, proc), objs, net, outcome, nrand), ev
            fr = frame_start(impl, inv, method, arg, pid, objs[ins[1]])
            return Config(_set(procs, pid, Proc(pc, env, RUNNING, fr)), objs, net, outcome, nrand), ev
        if op == "branch":
            taken = bool(eval_expr(ins[1], env))
            if ev is not None:
                ev.append(("local", None, pc, {"op": "if", "taken": taken}))
            nxt = self._goto(pid, pc + 1 if taken else ins[2])
            return Config(_set(procs, pid, Proc(nxt, env, RUNNING, None)), objs, net, outcome, nrand), ev
        status = LOOPING if op == "loop" else HALTED
        if ev is not None:
            ev.append(("local", None, pc, {"op": "loop" if op == "loop" else "terminate"}))
        return Config(_set(procs, pid, Proc(pc, env, status, None)), objs, net, outcome, nrand), ev

    def deliver(self, cfg: Config, content: tuple):
        """Deliver one in-flight message.  Returns (config, events)."""
        procs, objs, net, outcome, nrand = cfg
        try:
            i = net.index(content)
        except ValueError:
            raise NotDeliverable(f"{content!r} is not in flight") from None
        net = net[:i] + net[i + 1:]
        tag, obj, dest = content[0], content[1], content[2]
        impl = self.impls[obj]
        ev = [] if self.log else None
        if tag in ("query", "update"):
            st = objs[obj]
            st2, sends = impl.handle(content, st)
            if ev is not None:
                ev.append(("deliver", None, f"{tag}.handle", {"content": content, "state_changed": st2 != st}))
                for c in sends:
                    ev.append(("send", None, f"{tag}.handle", {"content": c}))
            objs = _set(objs, obj, st2)
            if sends:
                net = _insort(net, sends)
            return Config(procs, objs, net, outcome, nrand), ev
        proc = procs[dest]
        fr = proc.frame
        inv = it = None
        if fr is not None and fr.obj == obj and fr.stage in (PRE, TAIL):
            sub = impl.receive(fr.sub, content)
            if sub is not fr.sub:
                it = fr.it if fr.stage == PRE else None
                fr = settle(impl, fr._replace(sub=sub), dest, objs[obj])
                procs = _set(procs, dest, proc._replace(frame=fr))
                inv = fr.inv
        if ev is not None:
            ev.append(("deliver", inv, f"{tag}.receive", {"content": content, "state_changed": False, "iter": it}))
        return Config(procs, objs, net, outcome, nrand), ev

    # -- helpers for schedulers ------------------------------------------------

    def all_done(self, cfg: Config) -> bool:
        return all(p.status != RUNNING for p in cfg.procs)

    def outcome_map(self, cfg: Config) -> dict:
        return dict(cfg.outcome)


def _set(t: tuple, i: int, v) -> tuple:
    return t[:i] + (v,) + t[i + 1:]


# -- directives, tapes, policies -----------------------------------------------


class Directive(NamedTuple):
    """``Step(p)`` when ``msg`` is None, else ``Deliver(p, msg)``."""

    proc: int
    msg: Optional[int] = None

    @property
    def is_delivery(self) -> bool:
        return self.msg is not None

    def __repr__(self) -> str:
        return f"Step({self.proc})" if self.msg is None else f"Deliver({self.proc}, {self.msg})"


def Step_(p: int) -> Directive:
    return Directive(p)


def Deliver(p: int, mid: int) -> Directive:
    return Directive(p, mid)


class RandomTape:
    """Fixed sequence of values consumed in order by random steps."""

    def __init__(self, values: Iterable = ()):
        self.values = list(values)
        self.pos = 0

    def draw(self, domain: Sequence, origin: str):
        if self.pos >= len(self.values):
            raise TapeExhausted(f"tape exhausted after {self.pos} values ({origin} step over {list(domain)})")
        v = self.values[self.pos]
        if v not in domain:
            raise TapeDomainError(f"tape value {v!r} at position {self.pos} outside domain {list(domain)}")
        self.pos += 1
        return v


class SeededTape:
    """Unbounded tape drawing uniformly from each requested domain."""

    def __init__(self, seed: int):
        self.seed = seed
        self.rng = _random.Random(seed)

    def draw(self, domain: Sequence, origin: str):
        return domain[self.rng.randrange(len(domain))]


class ChoiceTape:
    """Tape whose value at each random step is picked by a callback; used to
    replay a single branch of the search tree."""

    def __init__(self, choose: Callable[[Sequence, str, int], object]):
        self.choose = choose
        self.pos = 0

    def draw(self, domain: Sequence, origin: str):
        v = self.choose(domain, origin, self.pos)
        self.pos += 1
        return v


Policy = Callable[["Engine"], Optional[Directive]]


# -- executions ----------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    """One labelled transition.  ``payload`` holds JSON-ready data only."""

    seq: int
    proc: int
    kind: str
    inv: Optional[InvocationId]
    site: object
    payload: dict

    def to_json(self) -> dict:
        inv = None if self.inv is None else {"proc": self.inv.proc, "site": self.inv.site, "occ": self.inv.occ}
        return {"seq": self.seq, "proc": self.proc, "kind": self.kind, "inv": inv, "site": self.site, "payload": self.payload}

    @classmethod
    def from_json(cls, d: dict) -> "Step":
        inv = d.get("inv")
        return cls(d["seq"], d["proc"], d["kind"],
                   None if inv is None else InvocationId(inv["proc"], inv["site"], inv["occ"]),
                   d["site"], d["payload"])


def dump_line(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Action(NamedTuple):
    """A call (``value`` unused) or return (``method``/``arg`` copied from the call)."""

    kind: str
    inv: InvocationId
    obj: str
    method: str
    arg: object
    value: object


@dataclass
class History:
    actions: list

    def __len__(self) -> int:
        return len(self.actions)

    def for_object(self, name: str) -> "History":
        return History([a for a in self.actions if a.obj == name])

    def objects(self) -> list[str]:
        return sorted({a.obj for a in self.actions})


@dataclass
class Outcome:
    values: dict
    terminal: tuple

    def __getitem__(self, inv):
        return self.values[inv]

    def get(self, inv, default=None):
        return self.values.get(inv, default)

    def __contains__(self, inv) -> bool:
        return inv in self.values

    def items(self):
        return self.values.items()


@dataclass
class Execution:
    steps: list
    final: Optional[Config] = None
    terminal: tuple = ()
    directives: list = field(default_factory=list)
    observed: list = field(default_factory=list)  # (domain, value, origin, step seq)
    program_n: int = 0

    def to_jsonl(self) -> str:
        return "".join(dump_line(s.to_json()) + "\n" for s in self.steps)

    @classmethod
    def from_jsonl(cls, text: str) -> "Execution":
        steps = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                steps.append(Step.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return cls(steps)


def project_history(e: Execution) -> History:
    """Order-preserving projection on call and return steps."""
    acts = []
    calls = {}
    for s in e.steps:
        if s.kind == "call":
            p = s.payload
            calls[s.inv] = (p["obj"], p["method"], from_json(p["arg"]))
            acts.append(Action("call", s.inv, p["obj"], p["method"], from_json(p["arg"]), None))
        elif s.kind == "return":
            obj, method, arg = calls.get(s.inv, (s.payload.get("obj"), s.payload.get("method"), None))
            acts.append(Action("return", s.inv, obj, method, arg, from_json(s.payload["value"])))
    return History(acts)


def outcome_of(e: Execution) -> Outcome:
    values = {s.inv: from_json(s.payload["value"]) for s in e.steps if s.kind == "return"}
    terminal = e.terminal or (BLOCKED_FLAG,) * e.program_n
    return Outcome(values, tuple(terminal))


def is_complete_wrt(e: Execution, pm: Mapping[str, str]) -> bool:
    """Every invocation has a step at its method's preamble-end control point.

    ``pm`` maps method names (or ``"obj.method"``) to control-point labels.
    """
    methods = {}
    passed = set()
    for s in e.steps:
        if s.kind == "call":
            obj, method = s.payload["obj"], s.payload["method"]
            key = f"{obj}.{method}" if f"{obj}.{method}" in pm else method
            if key not in pm:
                raise UnknownMethod(method)
            methods[s.inv] = pm[key]
        if s.inv is not None and s.inv in methods and s.site == methods[s.inv]:
            passed.add(s.inv)
    return all(i in passed for i in methods)


# -- engine --------------------------------------------------------------------


class Engine:
    """Mutable driver around a ``System``: directives in, steps out."""

    def __init__(self, system: System, tape=None, budget: int = 100_000):
        self.system = system
        self.tape = tape if tape is not None else RandomTape()
        self.budget = budget
        self.cfg = system.initial()
        self.network = Network()
        self.steps: list[Step] = []
        self.directives: list[Directive] = []
        self.observed: list = []
        self._origin: dict[int, tuple] = {}  # mid -> (inv, step seq of the send)

    # views for policies
    @property
    def n(self) -> int:
        return self.system.n

    def next_step(self, pid: int):
        return self.system.next_step(self.cfg, pid)

    def enabled(self) -> list[Directive]:
        out = [Directive(p) for p in range(self.system.n) if self.system.next_step(self.cfg, p) is not None]
        out += [Directive(m.dest, m.mid) for m in self.network.inflight.values()]
        return out

    def inflight(self, dest: Optional[int] = None) -> list[Message]:
        return [m for m in self.network.inflight.values() if dest is None or m.dest == dest]

    def find(self, tag: str, dest: int, sender: Optional[int] = None, obj: Optional[int] = None,
             fresh: bool = True, newest: bool = False) -> Optional[int]:
        """Oldest (or newest) in-flight message matching the filters, skipping
        messages whose delivery could no longer change anything unless
        ``fresh`` is off."""
        msgs = self.network.inflight.values()
        for m in (reversed(list(msgs)) if newest else msgs):
            if m.tag == tag and m.dest == dest and (sender is None or m.sender == sender) and (obj is None or m.obj == obj):
                if fresh and self.system.stale(self.cfg, m.content):
                    continue
                return m.mid
        return None

    def finished(self) -> bool:
        return all(p.status != RUNNING for p in self.cfg.procs)

    def random_values(self) -> list:
        return [v for _, v, _, _ in self.observed]

    def origin(self, mid: int):
        return self._origin.get(mid)

    def apply(self, d: Directive) -> None:
        sysm = self.system
        if d.msg is not None:
            try:
                msg = self.network.deliver(d.proc, d.msg)
            except NotDeliverable as exc:
                raise PolicyIllegalDirective(str(exc)) from None
            self.cfg, ev = sysm.deliver(self.cfg, msg.content)
            self.directives.append(d)
            self._log(d.proc, ev, delivered=msg)
            return
        if not (0 <= d.proc < sysm.n):
            raise PolicyIllegalDirective(f"no process {d.proc}")
        nxt = sysm.next_step(self.cfg, d.proc)
        if nxt is None:
            raise PolicyIllegalDirective(f"process {d.proc} has no enabled step")
        kind, label, domain = nxt
        rand = None
        if kind in (K_PRAND, K_ORAND):
            origin = PROGRAM if kind == K_PRAND else OBJECT
            rand = self.tape.draw(domain, origin)
            if rand not in domain:
                raise TapeDomainError(f"tape value {rand!r} outside domain {list(domain)}")
            self.observed.append((tuple(domain), rand, origin, len(self.steps)))
        self.cfg, ev = sysm.step(self.cfg, d.proc, rand)
        self.directives.append(d)
        self._log(d.proc, ev)

    def _log(self, proc: int, ev, delivered: Optional[Message] = None) -> None:
        for kind, inv, site, payload in ev:
            if kind == "send":
                mid = self.network.send(proc, payload["content"])
                self._origin[mid] = (inv, len(self.steps))
                payload = {"msg": mid, "dest": payload["content"][2],
                           "content": to_json(list(payload["content"])), "iter": payload.get("iter")}
            elif kind == "deliver":
                payload = {"msg": delivered.mid, "sender": delivered.sender,
                           "content": to_json(list(payload["content"])),
                           "state_changed": payload["state_changed"], "iter": payload.get("iter")}
            self.steps.append(Step(len(self.steps), proc, kind, inv, site, payload))

    def execution(self) -> Execution:
        return Execution(list(self.steps), self.cfg, self.system.terminal_flags(self.cfg),
                         list(self.directives), list(self.observed), self.system.program.n)

    def run(self, policy: Policy) -> Execution:
        while not self.finished():
            if len(self.directives) >= self.budget:
                raise BudgetExceeded(f"step budget {self.budget} exhausted", self.execution())
            d = policy(self)
            if d is None:
                break
            self.apply(d)
        return self.execution()


def run(program: Program, bindings, policy: Policy, tape=None, budget: int = 100_000,
        n: Optional[int] = None) -> Execution:
    """The unique execution of ``program`` under ``policy`` observing ``tape``."""
    if isinstance(tape, (list, tuple)):
        tape = RandomTape(tape)
    eng = Engine(System(program, bindings, n=n), tape, budget)
    return eng.run(policy)
