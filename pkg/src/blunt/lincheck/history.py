"""Operations and linearizations extracted from call/return histories."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence


class MalformedHistory(ValueError):
    pass


class Op(NamedTuple):
    index: int
    inv: tuple
    proc: int
    method: str
    arg: object
    call: int            # position of the call action
    ret: Optional[int]   # position of the return action, None while pending
    value: object

    @property
    def complete(self) -> bool:
        return self.ret is not None


class LinEntry(NamedTuple):
    inv: tuple
    method: str
    arg: object
    value: object


@dataclass(frozen=True)
class Linearization:
    """A legal sequential history; ``entries`` in linearization order."""

    entries: tuple = ()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def invs(self) -> tuple:
        return tuple(e.inv for e in self.entries)

    def is_prefix_of(self, other: "Linearization") -> bool:
        return other.entries[: len(self.entries)] == self.entries

    def to_json(self) -> list:
        from ..values import to_json
        return [{"inv": list(e.inv), "method": e.method, "arg": to_json(e.arg), "value": to_json(e.value)}
                for e in self.entries]


def operations(actions: Sequence) -> list[Op]:
    """Pair up calls and returns.  Each process has at most one pending call."""
    ops: list = []
    by_inv: dict = {}
    pending_of: dict = {}
    for pos, a in enumerate(actions):
        inv = tuple(a.inv)
        proc = inv[0]
        if a.kind == "call":
            if inv in by_inv:
                raise MalformedHistory(f"action {pos}: second call of invocation {inv}")
            if proc in pending_of:
                raise MalformedHistory(f"action {pos}: process {proc} calls while {pending_of[proc]} is pending")
            by_inv[inv] = len(ops)
            pending_of[proc] = inv
            ops.append([len(ops), inv, proc, a.method, a.arg, pos, None, None])
        elif a.kind == "return":
            i = by_inv.get(inv)
            if i is None:
                raise MalformedHistory(f"action {pos}: return of {inv} without a call")
            if ops[i][6] is not None:
                raise MalformedHistory(f"action {pos}: second return of {inv}")
            ops[i][6] = pos
            ops[i][7] = a.value
            del pending_of[proc]
        else:
            raise MalformedHistory(f"action {pos}: unknown action kind {a.kind!r}")
    return [Op(*o) for o in ops]


def precedence_masks(ops: Sequence[Op]) -> list[int]:
    """Bit j of entry i is set when op j returned before op i was called."""
    masks = []
    for o in ops:
        m = 0
        for p in ops:
            if p.ret is not None and p.ret < o.call:
                m |= 1 << p.index
        masks.append(m)
    return masks


def replay(entries: Sequence[LinEntry], spec, ops_by_inv=None):
    """Spec state after the entries, or None when some return disagrees."""
    state = spec.initial_state()
    for e in entries:
        proc = e.inv[0]
        state, r = spec.apply(state, e.method, e.arg, proc)
        if r != e.value:
            return None
    return state


def is_linearization_of(lin: Linearization, actions: Sequence, spec) -> bool:
    """Does ``lin`` linearize the history: legal, keeping every complete op
    with its recorded value, only invoked ops, and real-time order?"""
    ops = {o.inv: o for o in operations(actions)}
    seen = set()
    state = spec.initial_state()
    for pos, e in enumerate(lin.entries):
        o = ops.get(tuple(e.inv))
        if o is None or o.inv in seen:
            return False
        state, r = spec.apply(state, o.method, o.arg, o.proc)
        if r != e.value or (o.ret is not None and r != o.value):
            return False
        seen.add(o.inv)
    if any(o.ret is not None and o.inv not in seen for o in ops.values()):
        return False
    order = {tuple(e.inv): i for i, e in enumerate(lin.entries)}
    for a in ops.values():
        for b in ops.values():
            if a.ret is not None and a.ret < b.call and b.inv in order and order[a.inv] > order[b.inv]:
                return False
    return True
