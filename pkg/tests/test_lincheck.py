from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from blunt.core import Action
from blunt.lincheck import (
    KERNEL, LinEntry, Linearization, MalformedHistory, NotComplete, TreeNode, abd_canonical_linearization,
    canonical_prefix_check, check_all_objects, check_linearizable, check_strong_linearizable,
    check_tail_strong, enumerate_tree, fuzz_linearizability, is_linearization_of, operations,
    writers_reader_program,
)
from blunt.lincheck.history import replay
from blunt.lincheck.trees import ExecutionTree
from blunt.objects import ABDRegister, RegisterSpec, SnapshotSpec, make_impl
from blunt.values import BOT
from oracles import brute_linearizable

ZERO = RegisterSpec(0)
PI_ABD = {"read": "query.assign", "write": "query.assign"}


def call(p, method, arg=None, obj="R", site=0):
    return Action("call", (p, site, 0), obj, method, arg, None)


def ret(p, method, value, arg=None, obj="R", site=0):
    return Action("return", (p, site, 0), obj, method, arg, value)


KERNELS = ["python"] + (["compiled"] if KERNEL == "compiled" else [])


@pytest.mark.parametrize("kernel", KERNELS)
def test_three_basic_histories(kernel):
    h1 = [call(0, "write", 1), ret(0, "write", "ok", 1), call(1, "read"), ret(1, "read", 1)]
    h2 = [call(0, "write", 1), ret(0, "write", "ok", 1), call(1, "read"), ret(1, "read", 0)]
    h3 = [call(0, "write", 1), call(1, "read"), ret(1, "read", 0), ret(0, "write", "ok", 1)]
    assert check_linearizable(h1, ZERO, kernel)[0]
    assert not check_linearizable(h2, ZERO, kernel)[0]
    ok, lin = check_linearizable(h3, ZERO, kernel)
    assert ok and [e.method for e in lin] == ["read", "write"]


def test_pending_write_may_take_effect_or_not():
    h = [call(0, "write", 1), call(1, "read"), ret(1, "read", 1)]
    ok, lin = check_linearizable(h, ZERO)
    assert ok and lin.invs() == ((0, 0, 0), (1, 0, 0))
    h = [call(0, "write", 1), call(1, "read"), ret(1, "read", 0)]
    ok, lin = check_linearizable(h, ZERO)
    assert ok and lin.invs() == ((1, 0, 0),)


def test_new_old_inversion_rejected():
    h = [call(0, "write", 1), call(1, "read"), ret(1, "read", 1),
         call(2, "read"), ret(2, "read", 0), ret(0, "write", "ok", 1)]
    assert not check_linearizable(h, ZERO)[0]


def test_snapshot_history():
    spec = SnapshotSpec(2, 0)
    h = [call(0, "update", 5, obj="S"), ret(0, "update", "ok", 5, obj="S"),
         call(1, "scan", obj="S"), ret(1, "scan", (5, 0), obj="S")]
    assert check_linearizable(h, spec)[0]
    h[-1] = ret(1, "scan", (0, 5), obj="S")
    assert not check_linearizable(h, spec)[0]


@pytest.mark.parametrize("h", [
    [call(0, "read"), call(0, "read", site=1)],
    [ret(0, "read", 1)],
    [call(0, "read"), ret(0, "read", 0), ret(0, "read", 0)],
    [call(0, "read"), call(0, "read")],
    [Action("crash", (0, 0, 0), "R", "read", None, None)],
])
def test_malformed_histories(h):
    with pytest.raises(MalformedHistory):
        check_linearizable(h, ZERO)


def test_mixed_objects_must_be_projected():
    h = [call(0, "write", 1), ret(0, "write", "ok", 1), call(1, "read", obj="S"), ret(1, "read", 0, obj="S")]
    with pytest.raises(MalformedHistory):
        check_linearizable(h, ZERO)
    res = check_all_objects(h, {"R": ZERO, "S": ZERO})
    assert res["R"][0] and res["S"][0]


def test_is_linearization_of_checks_every_rule():
    h = [call(0, "write", 1), ret(0, "write", "ok", 1), call(1, "read"), ret(1, "read", 1)]
    good = Linearization((LinEntry((0, 0, 0), "write", 1, "ok"), LinEntry((1, 0, 0), "read", None, 1)))
    assert is_linearization_of(good, h, ZERO)
    assert not is_linearization_of(Linearization(good.entries[::-1]), h, ZERO)
    assert not is_linearization_of(Linearization(good.entries[:1]), h, ZERO)
    assert good.is_prefix_of(good) and Linearization(good.entries[:1]).is_prefix_of(good)
    assert good.to_json()[1] == {"inv": [1, 0, 0], "method": "read", "arg": None, "value": 1}


# -- property: kernels agree with each other and with brute force ---------------------

@st.composite
def histories(draw):
    """Random well-formed register histories with up to six operations."""
    nprocs = draw(st.integers(1, 3))
    plans = []
    wval = 0
    for p in range(nprocs):
        ops = []
        for i in range(draw(st.integers(0, 2))):
            if draw(st.booleans()):
                wval += 1
                ops.append(("write", wval, "ok"))
            else:
                ops.append(("read", None, draw(st.integers(0, 3))))
        plans.append(ops)
    acts = []
    cursor = [0] * nprocs
    open_ = [False] * nprocs
    while True:
        movable = [p for p in range(nprocs) if open_[p] or cursor[p] < len(plans[p])]
        if not movable:
            break
        p = draw(st.sampled_from(movable))
        method, arg, value = plans[p][cursor[p]]
        if open_[p]:
            if draw(st.integers(0, 9)) == 0 and cursor[p] == len(plans[p]) - 1:
                open_[p] = False  # leave the last call pending
                cursor[p] += 1
                continue
            acts.append(Action("return", (p, cursor[p], 0), "R", method, arg, value))
            open_[p] = False
            cursor[p] += 1
        else:
            acts.append(Action("call", (p, cursor[p], 0), "R", method, arg, None))
            open_[p] = True
    return acts


@settings(max_examples=300, deadline=None)
@given(histories())
def test_kernels_agree_with_brute_force(h):
    want = brute_linearizable(operations(h), ZERO)
    for kernel in KERNELS:
        ok, lin = check_linearizable(h, ZERO, kernel)
        assert ok == want
        if ok:
            assert is_linearization_of(lin, h, ZERO)
            assert replay(lin.entries, ZERO) is not None


# -- fuzzing ---------------------------------------------------------------------

@pytest.mark.parametrize("kind,k", [("abd", 1), ("abd-k", 2), ("snapshot", 1), ("va", 1), ("il", 1),
                                    ("snapshot", 2), ("va", 3)])
def test_fuzzing_small(kind, k):
    res = fuzz_linearizability(kind, 60, seed=11, k=k)
    assert res.ok, res.failures[:1]


class QuorumOfOne(ABDRegister):
    """ABD with non-intersecting quorums: reads can miss completed writes."""

    def bind(self, name, index, n, initial):
        clone = super().bind(name, index, n, initial)
        clone.quorum = 1
        return clone


def test_fuzzing_catches_quorum_of_one():
    res = fuzz_linearizability("abd", 300, seed=0, impl=QuorumOfOne())
    assert not res.ok
    assert res.failures[0]["history"]


# -- execution trees ---------------------------------------------------------------

@pytest.fixture(scope="module")
def abd_tree():
    return enumerate_tree(writers_reader_program(), make_impl("abd"), depth=10)


def test_tree_nodes_extend_their_parents(abd_tree):
    for parent, child in abd_tree.edges():
        assert child.history[: len(parent.history)] == parent.history
        assert parent.marks <= child.marks
        assert child.depth == parent.depth + 1


def test_sequential_tree_is_strongly_linearizable():
    tree = enumerate_tree(writers_reader_program(), make_impl("atomic"), depth=20)
    assert not tree.truncated
    assert check_strong_linearizable(tree, RegisterSpec(BOT)).ok


def test_singleton_tree_matches_plain_check():
    h = (call(0, "write", 1), ret(0, "write", "ok", 1), call(1, "read"), ret(1, "read", 0))
    tree = ExecutionTree([TreeNode(0, h, frozenset(), (), 0)])
    assert check_strong_linearizable(tree, ZERO).ok == check_linearizable(list(h), ZERO)[0] is False
    tree = ExecutionTree([TreeNode(0, h[:3], frozenset(), (), 0)])
    assert check_strong_linearizable(tree, ZERO).ok


def test_abd_tree_is_not_strongly_linearizable(abd_tree):
    verdict = check_strong_linearizable(abd_tree, RegisterSpec(BOT))
    assert not verdict.ok
    w = verdict.witness
    assert w is not None and w["history"]


def test_abd_tree_is_tail_strongly_linearizable(abd_tree):
    verdict = check_tail_strong(abd_tree, RegisterSpec(BOT), PI_ABD)
    assert verdict.ok
    for nid, lin in list(verdict.mapping.items())[:200]:
        assert is_linearization_of(lin, abd_tree.nodes[nid].history, RegisterSpec(BOT))


def test_tail_strong_with_call_mapping_is_strong(abd_tree):
    spec = RegisterSpec(BOT)
    assert check_tail_strong(abd_tree, spec, {"read": "call", "write": "call"}).ok \
        == check_strong_linearizable(abd_tree, spec).ok


def test_tail_strong_with_return_mapping_is_plain_linearizability(abd_tree):
    assert check_tail_strong(abd_tree, RegisterSpec(BOT), {"read": "return", "write": "return"}).ok


def test_canonical_linearization_is_prefix_preserving(abd_tree):
    res = canonical_prefix_check(abd_tree, RegisterSpec(BOT), PI_ABD)
    assert res["ok"] and res["pairs"] > 1000


def _mutant(key, keep_all=False):
    def linearize(node, spec):
        stamps = dict(node.stamps)
        ops = operations(node.history)
        done = [tuple(stamps[o.inv]) for o in ops if o.ret is not None]
        top = max(done) if done else None
        chosen = [o for o in ops if keep_all or (top is not None and tuple(stamps[o.inv]) <= top)]
        chosen.sort(key=lambda o: key(o, stamps))
        state, entries = spec.initial_state(), []
        for o in chosen:
            state, r = spec.apply(state, o.method, o.arg, o.proc)
            entries.append(LinEntry(o.inv, o.method, o.arg, r))
        return Linearization(tuple(entries))
    return linearize


@pytest.mark.parametrize("mutant", [
    _mutant(lambda o, s: (tuple(s[o.inv]), o.method == "write", o.call)),          # reads first
    _mutant(lambda o, s: (tuple(s[o.inv]), o.method != "write", o.call), True),    # keeps pending writes
    _mutant(lambda o, s: o.call),                                                   # call order
    _mutant(lambda o, s: (s[o.inv][0], o.method != "write", o.call)),               # ignores writer ids
])
def test_canonical_order_mutants_fail(abd_tree, mutant):
    assert not canonical_prefix_check(abd_tree, RegisterSpec(BOT), PI_ABD, linearize=mutant)["ok"]


def test_canonical_linearization_examples():
    w, r = (0, 0, 0), (2, 0, 0)
    hist = (Action("call", w, "R", "write", 0, None), Action("call", r, "R", "read", None, None),
            Action("return", w, "R", "write", 0, "ok"))
    node = TreeNode(0, hist, frozenset(), ((w, (1, 0)), (r, (1, 0))), 0)
    assert abd_canonical_linearization(node, RegisterSpec(BOT)).invs() == (w, r)
    # a pending write above every returned timestamp is left out
    w2 = (1, 0, 0)
    hist2 = hist + (Action("call", w2, "R", "write", 1, None),)
    node = TreeNode(0, hist2, frozenset(), ((w, (1, 0)), (r, (1, 0)), (w2, (2, 1))), 0)
    assert abd_canonical_linearization(node, RegisterSpec(BOT)).invs() == (w, r)
    with pytest.raises(NotComplete):
        abd_canonical_linearization(TreeNode(0, hist2, frozenset(), ((w, (1, 0)),), 0), RegisterSpec(BOT))
