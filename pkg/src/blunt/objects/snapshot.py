"""Wait-free snapshot from single-writer atomic registers (double collect
with embedded views).

Cell ``M[i]`` holds ``(value, seq, view)``.  ``scan`` collects until two
successive collects agree, or until some process is seen moving twice, in
which case it adopts that process's embedded view.  ``update(v)`` at ``i``
scans, then writes ``(v, seq_i + 1, view)`` to ``M[i]``.

Preambles: ``scan`` ends just before returning (``scan.result``).
``update`` has the empty preamble by default; with ``extended_update`` it
runs through its embedded scan.
"""

from __future__ import annotations

from .base import BASE, DONE, LOCAL, OK, PRE, Access, ObjectImpl

SCAN_READ = "scan.read"
SCAN_CHECK = "scan.check"
SCAN_RESULT = "scan.result"
UPDATE_WRITE = "update.write"


class Snapshot(ObjectImpl):
    kind = "snapshot"
    methods = ("scan", "update")
    read_method = "scan"
    write_method = "update"

    def __init__(self, *args, extended_update: bool = False, **kw):
        super().__init__(*args, **kw)
        self.extended_update = extended_update

    def preamble_end(self, method: str) -> str:
        self.check_method(method)
        if method == "scan":
            return SCAN_RESULT
        return SCAN_RESULT if self.extended_update else "call"

    def initial_view(self) -> tuple:
        return (self.initial,) * self.n

    def initial_state(self):
        return ((self.initial, 0, self.initial_view()),) * self.n

    # Scan machine: ("c", moved, prev, cur) collecting; ("r", view) result
    # pending; ("done", view).  Update tail: ("s", scan) then ("w", view).

    def _scan0(self):
        return ("c", (False,) * self.n, None, ())

    def begin(self, method, phase, pid, arg, locals_):
        if method == "scan":
            return self._scan0() if phase == PRE else ("done", locals_)
        if phase == PRE:
            return self._scan0() if self.extended_update else ("done", ())
        if self.extended_update:
            return ("w", locals_)
        return ("s", self._scan0())

    def _scan_peek(self, sub):
        tag = sub[0]
        if tag == "c":
            return (BASE, SCAN_READ) if len(sub[3]) < self.n else (LOCAL, SCAN_CHECK)
        if tag == "r":
            return LOCAL, SCAN_RESULT
        return DONE, sub[1]

    def _scan_advance(self, sub, st):
        tag, *rest = sub
        if tag == "r":
            return ("done", sub[1]), None
        moved, prev, cur = rest
        if len(cur) < self.n:
            j = len(cur)
            cell = st[j]
            cur = cur + (cell,)
            access = Access(f"M[{j}]", "read", (), cell)
            if len(cur) == self.n and prev is None:
                return ("c", moved, cur, ()), access
            return ("c", moved, prev, cur), access
        # compare two complete collects
        changed = [j for j in range(self.n) if prev[j][1] != cur[j][1]]
        if not changed:
            return ("r", tuple(c[0] for c in cur)), None
        for j in changed:
            if moved[j]:
                return ("r", cur[j][2]), None
        moved = tuple(m or (j in changed) for j, m in enumerate(moved))
        return ("c", moved, None, ()), None

    def peek(self, method, phase, sub, pid, st):
        if sub[0] == "s":
            kind, res = self._scan_peek(sub[1])
            if kind == DONE:
                return BASE, UPDATE_WRITE
            return kind, "update." + res
        if sub[0] == "w":
            return BASE, UPDATE_WRITE
        return self._scan_peek(sub)

    def advance(self, method, phase, sub, pid, arg, st):
        if sub[0] == "s":
            inner = sub[1]
            if inner[0] == "done":
                return self._write(pid, arg, inner[1], st)
            inner, access = self._scan_advance(inner, st)
            return ("s", inner), st, (), access
        if sub[0] == "w":
            return self._write(pid, arg, sub[1], st)
        sub, access = self._scan_advance(sub, st)
        return sub, st, (), access

    def _write(self, pid, arg, view, st):
        cell = (arg, st[pid][1] + 1, view)
        st = st[:pid] + (cell,) + st[pid + 1:]
        return ("done", OK), st, (), Access(f"M[{pid}]", "write", (cell,), OK)
