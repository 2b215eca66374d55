"""Register constructions from atomic base registers.

``VARegister``: multi-writer register from one single-writer cell
``Val[i] = (value, ts)`` per writer.  Read collects every cell and returns
the value with the largest timestamp; write collects, then stores its value
with timestamp ``(max integer + 1, i)``.  Collects run in ascending index.

``ILRegister``: multi-reader register from single-reader cells.  The writer
stores ``(v, seq)`` into every ``Val[i]``; reader ``i`` reads ``Val[i]`` and
column ``i`` of ``Report``, keeps the pair with the largest sequence number,
writes it across row ``i`` of ``Report`` and returns its value.
"""

from __future__ import annotations

from .base import BASE, DONE, LOCAL, OK, PRE, Access, ObjectImpl, WrongWriter


def _max_ts(pairs):
    best = None
    for val, ts in pairs:
        if best is None or best[1] < ts:
            best = (val, ts)
        elif best[1] == ts and best[0] != val:
            raise AssertionError(f"timestamp {ts} carries two values")
    return best


class VARegister(ObjectImpl):
    kind = "va"
    methods = ("read", "write")

    def preamble_end(self, method: str) -> str:
        self.check_method(method)
        return "read.choose" if method == "read" else "write.ts"

    def initial_state(self):
        return ((self.initial, (0, 0)),) * self.n

    # Preamble: ("c", collected pairs) then ("done", locals).
    # Write tail: ("w", t).

    def begin(self, method, phase, pid, arg, locals_):
        if phase == PRE:
            return ("c", ())
        if method == "read":
            return ("done", locals_)
        return ("w", locals_)

    def peek(self, method, phase, sub, pid, st):
        tag = sub[0]
        if tag == "done":
            return DONE, sub[1]
        if tag == "w":
            return BASE, "write.val"
        if len(sub[1]) < self.n:
            return BASE, f"{method}.collect"
        return LOCAL, self.preamble_end(method)

    def advance(self, method, phase, sub, pid, arg, st):
        tag = sub[0]
        if tag == "w":
            cell = (arg, (sub[1] + 1, pid))
            st = st[:pid] + (cell,) + st[pid + 1:]
            return ("done", OK), st, (), Access(f"Val[{pid}]", "write", (cell,), OK)
        got = sub[1]
        if len(got) < self.n:
            j = len(got)
            return ("c", got + (st[j],)), st, (), Access(f"Val[{j}]", "read", (), st[j])
        best = _max_ts(got)
        result = best[0] if method == "read" else max(ts[0] for _, ts in got)
        return ("done", result), st, (), None


class ILRegister(ObjectImpl):
    kind = "il"
    methods = ("read", "write")

    def __init__(self, *args, writer: int = 0, **kw):
        super().__init__(*args, **kw)
        self.writer = writer

    def preamble_end(self, method: str) -> str:
        self.check_method(method)
        return "read.choose" if method == "read" else "call"

    def shared_part(self, st):
        return st[:2]

    def initial_state(self):
        init = (self.initial, 0)
        return ((init,) * self.n, ((init,) * self.n,) * self.n, 0)

    # Write tail: ("seq",) then ("w", j, pair) writing Val[j].
    # Read preamble: ("r", j, best) with j = -1 meaning Val[i] next, then
    # Report[j][i]; ("ch", best) choose.  Read tail: ("t", j, pair).

    def begin(self, method, phase, pid, arg, locals_):
        if method == "write":
            if pid != self.writer:
                raise WrongWriter(f"process {pid} may not write {self.name or 'register'} (writer is {self.writer})")
            return ("done", ()) if phase == PRE else ("seq",)
        if phase == PRE:
            return ("r", -1, None)
        return ("t", 0, locals_)

    def peek(self, method, phase, sub, pid, st):
        tag = sub[0]
        if tag == "done":
            return DONE, sub[1]
        if tag == "seq":
            return LOCAL, "write.seq"
        if tag == "w":
            return BASE, "write.val"
        if tag == "r":
            return BASE, "read.val" if sub[1] < 0 else "read.report"
        if tag == "ch":
            return LOCAL, "read.choose"
        return BASE, "read.report.write"

    def advance(self, method, phase, sub, pid, arg, st):
        vals, report, wseq = st
        tag = sub[0]
        if tag == "seq":
            wseq += 1
            return ("w", 0, (arg, wseq)), (vals, report, wseq), (), None
        if tag == "w":
            j, pair = sub[1], sub[2]
            vals = vals[:j] + (pair,) + vals[j + 1:]
            access = Access(f"Val[{j}]", "write", (pair,), OK)
            nxt = ("w", j + 1, pair) if j + 1 < self.n else ("done", OK)
            return nxt, (vals, report, wseq), (), access
        if tag == "r":
            j, best = sub[1], sub[2]
            if j < 0:
                got, name = vals[pid], f"Val[{pid}]"
            else:
                got, name = report[j][pid], f"Report[{j}][{pid}]"
            if best is None or best[1] < got[1]:
                best = got
            nxt = ("r", j + 1, best) if j + 1 < self.n else ("ch", best)
            return nxt, st, (), Access(name, "read", (), got)
        if tag == "ch":
            return ("done", sub[1]), st, (), None
        j, pair = sub[1], sub[2]
        row = report[pid]
        row = row[:j] + (pair,) + row[j + 1:]
        report = report[:pid] + (row,) + report[pid + 1:]
        access = Access(f"Report[{pid}][{j}]", "write", (pair,), OK)
        nxt = ("t", j + 1, pair) if j + 1 < self.n else ("done", pair[0])
        return nxt, (vals, report, wseq), (), access
