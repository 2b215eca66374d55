"""Linearizability of a single-object history against a sequential spec."""

from __future__ import annotations

import os
from typing import Optional, Sequence

from . import _lincore_py
from .history import LinEntry, Linearization, MalformedHistory, Op, operations, precedence_masks

try:
    if os.environ.get("BLUNT_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from . import _lincore as _compiled
except ImportError:
    _compiled = None

KERNEL = "compiled" if _compiled is not None else "python"


def _actions(h) -> Sequence:
    return h.actions if hasattr(h, "actions") else h


def _stepper(ops: Sequence[Op], spec):
    def step(state, i):
        o = ops[i]
        ns, r = spec.apply(state, o.method, o.arg, o.proc)
        if o.ret is not None and r != o.value:
            return None
        return (ns, r)
    return step


def search_order(ops: Sequence[Op], spec, kernel: Optional[str] = None):
    """Op indices in a legal order that keeps real-time precedence and
    includes every complete op (pending ops only when needed), or None."""
    n = len(ops)
    preds = precedence_masks(ops)
    complete = 0
    for o in ops:
        if o.ret is not None:
            complete |= 1 << o.index
    use = kernel or KERNEL
    if use == "compiled" and _compiled is not None and n <= 64:
        impl = _compiled.search
    else:
        impl = _lincore_py.search
    return impl(n, preds, complete, _stepper(ops, spec), spec.initial_state())


def check_linearizable(h, spec, kernel: Optional[str] = None) -> tuple[bool, Optional[Linearization]]:
    """(verdict, witness).  Pending calls may be completed with whatever the
    spec returns or dropped.  Raises MalformedHistory."""
    acts = _actions(h)
    objs = {a.obj for a in acts}
    if len(objs) > 1:
        raise MalformedHistory(f"history mixes objects {sorted(objs)}; project it first")
    ops = operations(acts)
    order = search_order(ops, spec, kernel)
    if order is None:
        return False, None
    state = spec.initial_state()
    entries = []
    for i in order:
        o = ops[i]
        state, r = spec.apply(state, o.method, o.arg, o.proc)
        entries.append(LinEntry(o.inv, o.method, o.arg, r))
    return True, Linearization(tuple(entries))


def check_all_objects(h, specs: dict, kernel: Optional[str] = None) -> dict:
    """Verdict per object name for a multi-object history."""
    acts = _actions(h)
    out = {}
    for name in sorted({a.obj for a in acts}):
        out[name] = check_linearizable([a for a in acts if a.obj == name], specs[name], kernel)
    return out
