from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from blunt.netsim import Message, Network, NotDeliverable


def test_broadcast_reaches_every_process_including_sender():
    net = Network()
    mids = net.broadcast(1, "query", (7,), n=3)
    assert len(mids) == 3
    assert sorted(net.inflight[m].dest for m in mids) == [0, 1, 2]
    assert all(net.inflight[m].sender == 1 for m in mids)
    assert net.inflight[mids[0]].payload == (7,)


def test_message_fields():
    m = Message(4, 2, ("reply", 0, 1, "x", 9))
    assert (m.tag, m.obj, m.dest, m.payload) == ("reply", 0, 1, ("x", 9))


def test_deliver_removes_exactly_one_message():
    net = Network()
    a = net.send(0, ("ack", 0, 1))
    b = net.send(0, ("ack", 0, 1))
    assert net.deliver(1, b).mid == b
    assert list(net.inflight) == [a]
    assert net.delivered == 1


def test_deliver_to_wrong_process_or_twice_is_rejected():
    net = Network()
    m = net.send(0, ("ack", 0, 2))
    with pytest.raises(NotDeliverable):
        net.deliver(1, m)
    net.deliver(2, m)
    with pytest.raises(NotDeliverable):
        net.deliver(2, m)


def test_deliverable_filters_by_destination():
    net = Network()
    net.broadcast(0, "update", (1,), n=4)
    assert len(net.deliverable(3)) == 1
    assert len(net) == 4


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=30), st.randoms(use_true_random=False))
def test_every_message_delivered_once_in_any_order(sends, rnd):
    """Reliable and reorderable: any delivery order drains the network and
    hands out each message exactly once."""
    net = Network()
    mids = [net.send(s, ("m", 0, d, i)) for i, (s, d) in enumerate(sends)]
    order = list(mids)
    rnd.shuffle(order)
    got = [net.deliver(net.inflight[m].dest, m).content[3] for m in order]
    assert sorted(got) == list(range(len(sends)))
    assert len(net) == 0 and net.delivered == net.sent == len(sends)
