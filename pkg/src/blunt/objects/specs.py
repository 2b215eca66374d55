"""Sequential specifications as deterministic decision procedures."""

from __future__ import annotations

from dataclasses import dataclass

from .base import OK


@dataclass(frozen=True)
class RegisterSpec:
    initial: object
    kind: str = "register"

    def initial_state(self):
        return self.initial

    def apply(self, state, method: str, arg, proc: int):
        """(next state, return value)."""
        if method == "read":
            return state, state
        if method == "write":
            return arg, OK
        raise ValueError(f"register has no method {method!r}")


@dataclass(frozen=True)
class SnapshotSpec:
    n: int
    initial: object
    kind: str = "snapshot"

    def initial_state(self):
        return (self.initial,) * self.n

    def apply(self, state, method: str, arg, proc: int):
        if method == "scan":
            return state, state
        if method == "update":
            return state[:proc] + (arg,) + state[proc + 1:], OK
        raise ValueError(f"snapshot has no method {method!r}")


def spec_for(impl) -> "RegisterSpec | SnapshotSpec":
    if impl.kind == "snapshot":
        return SnapshotSpec(impl.n, impl.initial)
    return RegisterSpec(impl.initial)
