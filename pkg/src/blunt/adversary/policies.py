"""Adversary policies: deterministic maps from the engine's visible state
(including every random value observed so far) to the next directive.

A policy is called with the ``Engine`` and returns a ``Directive`` or None
to stop.  Stateful policies implement ``fresh(seed)`` so Monte Carlo runs
can start each trial from a clean copy.
"""

from __future__ import annotations

import random as _random
from typing import Iterator, Optional, Sequence

from ..core import K_LOCAL, K_ORAND, K_PRAND, RUNNING, Directive, Engine
from ..objects import ABDRegister


class WrongConfiguration(ValueError):
    pass


class Policy:
    name = "policy"

    def __call__(self, eng: Engine) -> Optional[Directive]:
        raise NotImplementedError

    def fresh(self, seed: int = 0) -> "Policy":
        return self


def _oldest(eng: Engine, dest: Optional[int] = None) -> Optional[Directive]:
    for m in eng.network.inflight.values():
        if dest is None or m.dest == dest:
            return Directive(m.dest, m.mid)
    return None


class Sequential(Policy):
    """Runs the lowest-numbered unfinished process to completion, delivering
    messages oldest-first whenever it waits."""

    name = "sequential"

    def __call__(self, eng):
        for p in range(eng.n):
            if eng.cfg.procs[p].status == RUNNING:
                if eng.next_step(p) is not None:
                    return Directive(p)
                return _oldest(eng)
        return None


class RoundRobin(Policy):
    """One directive per process in turn: a step if it has one, else the
    oldest message addressed to it."""

    name = "round-robin"

    def __init__(self) -> None:
        self.turn = 0

    def fresh(self, seed: int = 0) -> "RoundRobin":
        return RoundRobin()

    def __call__(self, eng):
        for _ in range(eng.n):
            p = self.turn
            self.turn = (self.turn + 1) % eng.n
            if eng.next_step(p) is not None:
                return Directive(p)
            d = _oldest(eng, p)
            if d is not None:
                return d
        return _oldest(eng)


class RandomPolicy(Policy):
    """Uniform choice among enabled directives, from a private generator."""

    name = "random"

    def __init__(self, seed: int = 0, deliver_weight: float = 1.0) -> None:
        self.seed = seed
        self.deliver_weight = deliver_weight
        self.rng = _random.Random(seed)

    def fresh(self, seed: int = 0) -> "RandomPolicy":
        return RandomPolicy(seed, self.deliver_weight)

    def __call__(self, eng):
        steps = [Directive(p) for p in range(eng.n) if eng.next_step(p) is not None]
        msgs = [Directive(m.dest, m.mid) for m in eng.network.inflight.values()]
        if not steps and not msgs:
            return None
        if steps and msgs:
            share = self.deliver_weight * len(msgs) / (self.deliver_weight * len(msgs) + len(steps))
            pool = msgs if self.rng.random() < share else steps
        else:
            pool = steps or msgs
        return pool[self.rng.randrange(len(pool))]


class Replay(Policy):
    """Replays a recorded directive list, then stops."""

    name = "replay"

    def __init__(self, directives: Sequence[Directive]) -> None:
        self.directives = list(directives)
        self.pos = 0

    def fresh(self, seed: int = 0) -> "Replay":
        return Replay(self.directives)

    def __call__(self, eng):
        if self.pos >= len(self.directives):
            return None
        d = self.directives[self.pos]
        self.pos += 1
        return d


class Scripted(Policy):
    """Runs a generator of directives, then finishes sequentially."""

    def __init__(self) -> None:
        self._gen: Optional[Iterator[Directive]] = None
        self._tail = Sequential()

    def fresh(self, seed: int = 0) -> "Scripted":
        return type(self)()

    def script(self, eng: Engine) -> Iterator[Directive]:
        raise NotImplementedError

    def __call__(self, eng):
        if self._gen is None:
            self.check(eng)
            self._gen = self.script(eng)
        for d in self._gen:
            return d
        return self._tail(eng)

    def check(self, eng: Engine) -> None:
        pass


# -- scripting helpers ---------------------------------------------------------


def advance(eng: Engine, p: int) -> Iterator[Directive]:
    """Step ``p`` until it waits, finishes, or reaches a random step."""
    while True:
        nxt = eng.next_step(p)
        if nxt is None or nxt[0] in (K_PRAND, K_ORAND):
            return
        yield Directive(p)


def flip(eng: Engine, p: int) -> Iterator[Directive]:
    nxt = eng.next_step(p)
    if nxt is None or nxt[0] not in (K_PRAND, K_ORAND):
        raise WrongConfiguration(f"process {p} is not at a random step")
    yield Directive(p)


def deliver(eng: Engine, tag: str, dest: int, sender: int, obj: int = 0) -> Iterator[Directive]:
    mid = eng.find(tag, dest, sender, obj, newest=True)
    if mid is None:
        raise WrongConfiguration(f"no {tag} from p{sender} to p{dest} on object {obj} in flight")
    yield Directive(dest, mid)


def query_round(eng: Engine, client: int, servers: Sequence[int], obj: int = 0) -> Iterator[Directive]:
    """Deliver ``client``'s queries to ``servers`` and the replies back."""
    for q in servers:
        yield from deliver(eng, "query", q, client, obj)
        yield from deliver(eng, "reply", client, q, obj)


def update_round(eng: Engine, client: int, servers: Sequence[int], obj: int = 0) -> Iterator[Directive]:
    for q in servers:
        yield from deliver(eng, "update", q, client, obj)
        yield from deliver(eng, "ack", client, q, obj)


def finish_op(eng: Engine, p: int, servers: Sequence[int], obj: int = 0) -> Iterator[Directive]:
    """Run a whole ABD operation of ``p`` against the given quorum."""
    yield from advance(eng, p)
    yield from query_round(eng, p, servers, obj)
    yield from advance(eng, p)
    yield from update_round(eng, p, servers, obj)
    yield from advance(eng, p)


class CraftedABDWeakener(Scripted):
    """Forces the weakener's reader into its loop whatever the coin shows,
    against ABD registers with three processes.

    The two writes to R race.  The reader's first read has one reply in hand
    before the coin is flipped; the adversary then decides, knowing the coin,
    which of the two writes the reader sees first and which one wins.
    """

    name = "crafted"

    def check(self, eng: Engine) -> None:
        sysm = eng.system
        if sysm.program.name != "weakener" or sysm.n != 3:
            raise WrongConfiguration("the crafted adversary needs the three-process weakener")
        for impl in sysm.impls:
            if not isinstance(impl, ABDRegister) or impl.k is not None:
                raise WrongConfiguration(f"the crafted adversary needs plain ABD registers, got {impl.label}")

    def script(self, eng):
        R, C = 0, 1
        # p0 starts W0 and hears only from itself
        yield from advance(eng, 0)
        yield from query_round(eng, 0, [0])
        # p1's W1 sees the initial pair everywhere and broadcasts (1, (1, 1))
        yield from advance(eng, 1)
        yield from query_round(eng, 1, [0, 1])
        yield from advance(eng, 1)
        # the reader's first read hears (BOT, (0, 0)) from p0
        yield from advance(eng, 2)
        yield from query_round(eng, 2, [0])
        # W1 completes with acks from p0 and p1, then the coin
        yield from update_round(eng, 1, [0, 1])
        yield from advance(eng, 1)
        yield from flip(eng, 1)
        coin = eng.random_values()[-1]
        yield from finish_op(eng, 1, [0, 1], C)
        if coin == 0:
            # W0 misses W1: writes (0, (1, 0)) to p0 (ignored) and p2
            yield from query_round(eng, 0, [2])
            yield from advance(eng, 0)
            yield from update_round(eng, 0, [0, 2])
            yield from advance(eng, 0)
            # first read sees (0, (1, 0)) at p2, second sees W1 at p0 and p1
            yield from query_round(eng, 2, [2])
            yield from advance(eng, 2)
            yield from update_round(eng, 2, [0, 2])
            yield from advance(eng, 2)
            yield from query_round(eng, 2, [0, 1])
        else:
            # W0 sees W1 and writes (0, (2, 0)); the first read sees W1
            yield from query_round(eng, 0, [1])
            yield from query_round(eng, 2, [1])
            yield from advance(eng, 2)
            yield from update_round(eng, 2, [0, 1])
            yield from advance(eng, 2)
            yield from advance(eng, 0)
            for q in (0, 1, 2):
                yield from deliver(eng, "update", q, 0)
            # the third ack arrives after the wait is over
            yield from deliver(eng, "ack", 0, 0)
            yield from deliver(eng, "ack", 0, 1)
            yield from advance(eng, 0)
            yield from query_round(eng, 2, [0, 1])
        yield from advance(eng, 2)
        yield from update_round(eng, 2, [0, 1])
        # the read of C, sequentially
        yield from finish_op(eng, 2, [0, 1], C)
        yield from advance(eng, 2)


def crafted_abd_weakener_policy() -> CraftedABDWeakener:
    return CraftedABDWeakener()


POLICIES = {
    "sequential": Sequential,
    "round-robin": RoundRobin,
    "random": RandomPolicy,
    "crafted": CraftedABDWeakener,
}


class OperationOrder(Policy):
    """Runs whole operations one at a time: entry p of ``order`` lets process
    p run (with deliveries as needed) until it returns from an invocation or
    takes a program random step.  Afterwards it finishes sequentially."""

    name = "operation-order"

    def __init__(self, order: Sequence[int]) -> None:
        self.order = list(order)
        self.pos = 0
        self.seen = 0
        self._tail = Sequential()

    def fresh(self, seed: int = 0) -> "OperationOrder":
        return OperationOrder(self.order)

    def _unit_done(self, eng: Engine, p: int) -> bool:
        for s in eng.steps[self.seen:]:
            if s.proc == p and (s.kind == "return" or (s.kind == "random" and s.inv is None)):
                return True
        return False

    def __call__(self, eng):
        while self.pos < len(self.order):
            p = self.order[self.pos]
            if self._unit_done(eng, p) or eng.cfg.procs[p].status != RUNNING:
                self.pos += 1
                self.seen = len(eng.steps)
                continue
            if eng.next_step(p) is not None:
                return Directive(p)
            d = _oldest(eng)
            if d is None:
                raise WrongConfiguration(f"process {p} is stuck")
            return d
        return self._tail(eng)


def weakener_atomic_order() -> OperationOrder:
    """W0, first read, W1, second read, then the coin: the reader sees 0 then
    1 and loops exactly when the coin shows 0."""
    return OperationOrder([0, 2, 1, 2, 1])


POLICIES["operation-order"] = weakener_atomic_order
