"""Value domain shared by programs, objects and histories.

Register values are ints, the bottom value ``BOT`` (the initial value of an
unwritten register) or tuples of those (snapshot views).  ``BOT`` orders
below every int so that message tuples carrying it stay sortable.
"""

from __future__ import annotations


class _Bottom:
    __slots__ = ()
    _instance: "_Bottom | None" = None

    def __new__(cls) -> "_Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOT"

    def __reduce__(self):
        return (_Bottom, ())

    def __hash__(self) -> int:
        return 0x0B07

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        return other is not self

    def __le__(self, other: object) -> bool:
        return True

    def __gt__(self, other: object) -> bool:
        return False

    def __ge__(self, other: object) -> bool:
        return other is self


BOT = _Bottom()


def to_json(value):
    """Encode a value for JSON: ``BOT`` becomes null, tuples become lists."""
    if value is BOT:
        return None
    if isinstance(value, (tuple, list)):
        return [to_json(v) for v in value]
    return value


def from_json(value):
    if value is None:
        return BOT
    if isinstance(value, list):
        return tuple(from_json(v) for v in value)
    return value


def show(value) -> str:
    if value is BOT:
        return "⊥"
    if isinstance(value, tuple):
        return "(" + ",".join(show(v) for v in value) + ")"
    return str(value)
