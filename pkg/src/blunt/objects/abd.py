"""Multi-writer ABD register over the asynchronous message substrate.

Every process is both a client and a server.  Object state is
``(servers, sns)``: one ``(val, ts)`` pair per server and each client's
message sequence number.  Timestamps are ``(int, pid)`` tuples compared
lexicographically, initially ``(0, 0)``.

Message contents (the network adds ids and senders):

    ("query",  obj, dest, client, sn)
    ("reply",  obj, dest, sn, val, ts)
    ("update", obj, dest, client, sn, val, ts)
    ("ack",    obj, dest, sn)

Preamble of both methods: the query phase, ending at the step that assigns
the largest-timestamp reply (``query.assign``).
"""

from __future__ import annotations

from .base import BLOCKED, DONE, LOCAL, OK, PRE, SEND, TAIL, ObjectImpl

INITIAL_TS = (0, 0)

QUERY_SEND = "query.send"
QUERY_WAIT = "query.wait"
QUERY_ASSIGN = "query.assign"
UPDATE_SEND = "update.send"
UPDATE_WAIT = "update.wait"


def ts_less(a: tuple, b: tuple) -> bool:
    """Lexicographic order on (integer, process id) timestamps."""
    return tuple(a) < tuple(b)


def quorum(n: int) -> int:
    return n // 2 + 1


def max_reply(pairs):
    """Pair with the largest timestamp; equal timestamps must carry equal values."""
    best = None
    for val, ts in pairs:
        if best is None or ts_less(best[1], ts):
            best = (val, ts)
        elif best[1] == ts and best[0] != val:
            raise AssertionError(f"timestamp {ts} carries two values {best[0]!r} and {val!r}")
    return best


class ABDRegister(ObjectImpl):
    kind = "abd"
    methods = ("read", "write")
    message_passing = True
    quorum = 0

    def preamble_end(self, method: str) -> str:
        self.check_method(method)
        return QUERY_ASSIGN

    def bind(self, name, index, n, initial):
        clone = super().bind(name, index, n, initial)
        clone.quorum = quorum(n)
        return clone

    def initial_state(self):
        return (((self.initial, INITIAL_TS),) * self.n, (0,) * self.n)

    # Query sub-machine:  ("q", sn, count, best)    sn None until sent
    # Update sub-machine: ("u", sn, count, val, ts)
    # Finished:           ("done", result)

    def begin(self, method, phase, pid, arg, locals_):
        if phase == PRE:
            return ("q", None, 0, None)
        if method == "read":
            val, ts = locals_
            return ("u", None, 0, val, ts)
        return ("u", None, 0, arg, (locals_ + 1, pid))

    def peek(self, method, phase, sub, pid, st):
        tag = sub[0]
        if tag == "done":
            return DONE, sub[1]
        if sub[1] is None:
            return SEND, QUERY_SEND if tag == "q" else UPDATE_SEND
        if sub[2] < self.quorum:
            return BLOCKED, QUERY_WAIT if tag == "q" else UPDATE_WAIT
        if tag == "q":
            return LOCAL, QUERY_ASSIGN
        return DONE, sub[3] if method == "read" else OK

    def advance(self, method, phase, sub, pid, arg, st):
        servers, sns = st
        tag = sub[0]
        if sub[1] is None:
            sn = sns[pid] + 1
            st = (servers, sns[:pid] + (sn,) + sns[pid + 1:])
            if tag == "q":
                sends = tuple(("query", self.index, q, pid, sn) for q in range(self.n))
                return ("q", sn, 0, None), st, sends, None
            sends = tuple(("update", self.index, q, pid, sn, sub[3], sub[4]) for q in range(self.n))
            return ("u", sn, 0, sub[3], sub[4]), st, sends, None
        # query.assign
        val, ts = sub[3]
        return ("done", (val, ts) if method == "read" else ts[0]), st, (), None

    # A reply is fixed when its query is handled; delivering it late only
    # delays a client that is blocked anyway, so queries and their replies
    # are delivered together by the search.
    fused_tags = ("query",)

    def forced_delivery(self, content, frames) -> bool:
        # acks are indistinguishable: only the one completing the quorum has
        # a visible effect, so the earlier ones can go at once
        if content[0] != "ack" or self.is_stale(content, frames):
            return False
        return frames[content[2]].sub[2] + 1 < self.quorum

    def shared_part(self, st):
        # sequence numbers are client-private
        return st[0]

    def timestamp(self, fr):
        """Timestamp chosen by a pending invocation, once its tail has begun."""
        if fr.stage == TAIL and fr.sub[0] == "u":
            return fr.sub[4]
        return None

    def handle(self, content, st):
        servers, sns = st
        tag = content[0]
        q = content[2]
        val, ts = servers[q]
        if tag == "query":
            _, obj, _, client, sn = content
            return st, (("reply", obj, client, sn, val, ts),)
        _, obj, _, client, sn, v, u = content
        if ts_less(ts, u):
            servers = servers[:q] + ((v, u),) + servers[q + 1:]
            st = (servers, sns)
        return st, (("ack", obj, client, sn),)

    def receive(self, sub, content):
        if content[0] == "reply":
            # the wait ends at a quorum; later replies are ignored
            if sub[0] != "q" or sub[1] != content[3] or sub[2] >= self.quorum:
                return sub
            pair = (content[4], content[5])
            best = pair if sub[3] is None else max_reply((sub[3], pair))
            return ("q", sub[1], sub[2] + 1, best)
        if sub[0] != "u" or sub[1] != content[3] or sub[2] >= self.quorum:
            return sub
        return ("u", sub[1], sub[2] + 1, sub[3], sub[4])

    def is_stale(self, content, frames) -> bool:
        """True when delivering ``content`` can no longer change any state."""
        tag = content[0]
        if tag == "update":
            return False
        if tag == "query":
            client, sn, want = content[3], content[4], "q"
        else:
            client, sn, want = content[2], content[3], "q" if tag == "reply" else "u"
        fr = frames[client]
        if fr is None or fr.obj != self.index or fr.stage not in (PRE, TAIL):
            return True
        sub = fr.sub
        if not (isinstance(sub, tuple) and sub[0] == want and sub[1] == sn):
            return True
        return sub[2] >= self.quorum
