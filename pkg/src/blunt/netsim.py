"""Reliable, reorderable message substrate with adversary-chosen delivery.

Message contents are plain tuples ``(tag, obj, dest, *payload)``; the
network wraps them with a unique id and the sender.  Nothing is lost,
duplicated or delivered unless a directive asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass


class NotDeliverable(LookupError):
    pass


@dataclass(frozen=True)
class Message:
    mid: int
    sender: int
    content: tuple

    @property
    def tag(self) -> str:
        return self.content[0]

    @property
    def obj(self) -> int:
        return self.content[1]

    @property
    def dest(self) -> int:
        return self.content[2]

    @property
    def payload(self) -> tuple:
        return self.content[3:]


class Network:
    def __init__(self) -> None:
        self.inflight: dict[int, Message] = {}
        self.sent = 0
        self.delivered = 0

    def send(self, sender: int, content: tuple) -> int:
        mid = self.sent
        self.sent += 1
        self.inflight[mid] = Message(mid, sender, content)
        return mid

    def broadcast(self, sender: int, tag: str, payload: tuple, n: int, obj: int = 0) -> list[int]:
        """One message per destination 0..n-1, the sender included."""
        return [self.send(sender, (tag, obj, dest) + tuple(payload)) for dest in range(n)]

    def deliverable(self, p: int) -> list[int]:
        return [mid for mid, m in self.inflight.items() if m.dest == p]

    def deliver(self, p: int, mid: int) -> Message:
        msg = self.inflight.get(mid)
        if msg is None or msg.dest != p:
            raise NotDeliverable(f"message {mid} is not in flight to process {p}")
        del self.inflight[mid]
        self.delivered += 1
        return msg

    def __len__(self) -> int:
        return len(self.inflight)
