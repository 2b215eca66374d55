from __future__ import annotations

from .base import OK, ObjectImpl


class AtomicRegister(ObjectImpl):
    """A register whose read and write take effect in a single step."""

    kind = "atomic"
    methods = ("read", "write")
    atomic = True

    def initial_state(self):
        return self.initial

    def preamble_end(self, method: str) -> str:
        self.check_method(method)
        return "call"

    def iterated(self, k: int):
        raise TypeError("atomic registers have no preamble to iterate")

    def apply(self, method: str, arg, st):
        """(st, result) of an instantaneous invocation."""
        self.check_method(method)
        if method == "read":
            return st, st
        return arg, OK
