"""Object implementations factored into an effect-free preamble and a tail.

Every method of a non-atomic object is a pair of small state machines.  The
preamble machine runs from the call and finishes by producing the method's
locals; the tail machine starts from those locals and finishes with the
return value.  ``ObjectImpl`` subclasses describe the machines; the
invocation frame and the k-fold preamble iteration are driven generically by
``frame_next`` / ``frame_step`` so the transformation applies unchanged to
every object.

Step kinds reported by a machine:

``local``    touches only the invoking process
``send``     only adds messages to the network (commutes with everything)
``base``     one access to an atomic base register (shared)
``blocked``  waiting for messages
``done``     finished; ``peek`` returns the result instead of a label
"""

from __future__ import annotations

from typing import NamedTuple, Optional

LOCAL = "local"
SEND = "send"
BASE = "base"
BLOCKED = "blocked"
DONE = "done"
ORAND = "orand"
RETURN = "return"

PRE = "pre"
PICK = "pick"
TAIL = "tail"
RET = "ret"

OK = "ok"

CALL_LABEL = "call"
PICK_LABEL = "pick"
RETURN_LABEL = "return"


class NonPositiveK(ValueError):
    pass


class UnknownMethod(KeyError):
    pass


class WrongWriter(RuntimeError):
    pass


class Frame(NamedTuple):
    """A pending invocation.  ``store`` holds the locals of finished
    preamble iterations; ``it`` is the 1-based current iteration."""

    obj: int
    inv: tuple
    method: str
    arg: object
    stage: str
    it: int
    store: tuple
    sub: object


class Access(NamedTuple):
    """One base-object access, reported for logging and effect auditing."""

    name: str
    op: str
    args: tuple
    result: object


class ObjectImpl:
    """Base class.  Subclasses set ``kind`` and the method machines.

    ``k`` is None for the original object; an int k >= 1 means every method
    iterates its preamble k times and then draws which iteration to keep
    (the draw happens even for k = 1).
    """

    kind = "object"
    methods: tuple[str, ...] = ()
    read_method = "read"
    write_method = "write"
    message_passing = False
    atomic = False

    def __init__(self, name: str = "", index: int = 0, n: int = 0, initial=None, k: Optional[int] = None):
        if k is not None and k < 1:
            raise NonPositiveK(f"k must be >= 1, got {k}")
        self.name = name
        self.index = index
        self.n = n
        self.initial = initial
        self.k = k

    # -- configuration -----------------------------------------------------

    def bind(self, name: str, index: int, n: int, initial) -> "ObjectImpl":
        """A copy of this implementation attached to object slot ``index``."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.name, clone.index, clone.n, clone.initial = name, index, n, initial
        return clone

    def iterated(self, k: int) -> "ObjectImpl":
        if k < 1:
            raise NonPositiveK(f"k must be >= 1, got {k}")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.k = k
        return clone

    @property
    def label(self) -> str:
        return self.kind if self.k is None else f"{self.kind}^{self.k}"

    def preamble_end(self, method: str) -> str:
        """Control point closing the declared preamble of ``method``."""
        raise NotImplementedError

    def preamble_mapping(self) -> dict[str, str]:
        if self.k is not None:
            return {m: PICK_LABEL for m in self.methods}
        return {m: self.preamble_end(m) for m in self.methods}

    def check_method(self, method: str) -> None:
        if method not in self.methods:
            raise UnknownMethod(method)

    # -- state -------------------------------------------------------------

    def initial_state(self):
        raise NotImplementedError

    # -- machines (override) -------------------------------------------------

    def begin(self, method: str, phase: str, pid: int, arg, locals_):
        raise NotImplementedError

    def peek(self, method: str, phase: str, sub, pid: int, st):
        """(kind, label) of the next step, or (DONE, result)."""
        raise NotImplementedError

    def advance(self, method: str, phase: str, sub, pid: int, arg, st):
        """Take the next step: (sub, st, sends, access)."""
        raise NotImplementedError

    # -- message passing (override when message_passing) ---------------------

    def handle(self, content, st):
        """Server-side handler: (st, sends)."""
        raise NotImplementedError

    def receive(self, sub, content):
        """Client-side receipt by the pending invocation's machine."""
        return sub

    def is_stale(self, content, frames) -> bool:
        return False

    # -- search hints --------------------------------------------------------
    # Both describe reductions that never lower the optimal adversary's value.

    # tags whose handler output is delivered right after the handler runs
    fused_tags: tuple[str, ...] = ()

    def forced_delivery(self, content, frames) -> bool:
        """True when delivering ``content`` at once loses the adversary nothing."""
        return False

    def shared_part(self, st):
        """The part of the object state other processes can observe."""
        return st

    def timestamp(self, fr: "Frame"):
        """Timestamp an invocation has committed to, for objects that have them."""
        return None


# -- generic frame driver ------------------------------------------------------


def frame_start(impl: ObjectImpl, inv, method: str, arg, pid: int, st) -> Frame:
    impl.check_method(method)
    fr = Frame(impl.index, inv, method, arg, PRE, 1, (), impl.begin(method, PRE, pid, arg, None))
    return settle(impl, fr, pid, st)


def settle(impl: ObjectImpl, fr: Frame, pid: int, st) -> Frame:
    """Advance through finished machines without taking steps."""
    while True:
        if fr.stage == PRE:
            kind, res = impl.peek(fr.method, PRE, fr.sub, pid, st)
            if kind != DONE:
                return fr
            store = fr.store + (res,)
            iterations = 1 if impl.k is None else impl.k
            if fr.it < iterations:
                fr = fr._replace(it=fr.it + 1, store=store, sub=impl.begin(fr.method, PRE, pid, fr.arg, None))
            elif impl.k is not None:
                return fr._replace(stage=PICK, store=store, sub=None)
            else:
                fr = fr._replace(stage=TAIL, store=store, sub=impl.begin(fr.method, TAIL, pid, fr.arg, res))
        elif fr.stage == TAIL:
            kind, res = impl.peek(fr.method, TAIL, fr.sub, pid, st)
            if kind != DONE:
                return fr
            return fr._replace(stage=RET, sub=res)
        else:
            return fr


def frame_next(impl: ObjectImpl, fr: Frame, pid: int, st):
    """(kind, label) for the invocation's next step."""
    if fr.stage == PICK:
        return ORAND, PICK_LABEL
    if fr.stage == RET:
        return RETURN, RETURN_LABEL
    return impl.peek(fr.method, fr.stage, fr.sub, pid, st)


def frame_step(impl: ObjectImpl, fr: Frame, pid: int, st, rand=None):
    """Take one step: (frame, st, sends, access).  For PICK, ``rand`` is the
    1-based chosen iteration."""
    if fr.stage == PICK:
        locals_ = fr.store[rand - 1]
        fr = fr._replace(stage=TAIL, sub=impl.begin(fr.method, TAIL, pid, fr.arg, locals_))
        return settle(impl, fr, pid, st), st, (), None
    sub, st, sends, access = impl.advance(fr.method, fr.stage, fr.sub, pid, fr.arg, st)
    return settle(impl, fr._replace(sub=sub), pid, st), st, sends, access


def transform_k(impl: ObjectImpl, k: int) -> ObjectImpl:
    """The preamble-iterating version of ``impl``: each method runs its
    preamble ``k`` times, draws j uniformly from 1..k and continues its tail
    with the locals of iteration j."""
    return impl.iterated(k)
