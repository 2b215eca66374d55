from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from blunt.adversary.policies import RandomPolicy, Sequential
from blunt.core import SeededTape, TERMINATED, project_history, run
from blunt.lincheck import check_linearizable
from blunt.objects import (
    OK, PICK_LABEL, ABDRegister, NonPositiveK, RegisterSpec, SnapshotSpec, UnknownMethod, WrongWriter,
    audit_effect_free, make_impl, max_reply, quorum, spec_for, transform_k, ts_less,
)
from blunt.progdsl import InvocationId, parse_program
from blunt.values import BOT

PAIR = parse_program("""\
object X = 0
process 0
  write X 5
  read a X
process 1
  read b X
  write X 7
process 2
  read c X
""")


def test_quorum_sizes_intersect():
    for n in range(1, 12):
        q = quorum(n)
        assert 2 * q > n and q <= n


def test_timestamps_order_lexicographically():
    assert ts_less((1, 2), (2, 0))
    assert ts_less((1, 0), (1, 1))
    assert not ts_less((1, 1), (1, 1))


def test_max_reply_picks_largest_timestamp_and_checks_consistency():
    assert max_reply([(3, (1, 0)), (4, (2, 1)), (5, (2, 0))]) == (4, (2, 1))
    with pytest.raises(AssertionError):
        max_reply([(3, (1, 0)), (4, (1, 0))])


def test_register_spec():
    spec = RegisterSpec(BOT)
    s = spec.initial_state()
    s, r = spec.apply(s, "write", 3, 0)
    assert r == OK
    assert spec.apply(s, "read", None, 1) == (3, 3)
    with pytest.raises(ValueError):
        spec.apply(s, "inc", None, 0)


def test_snapshot_spec_updates_own_component():
    spec = SnapshotSpec(3, 0)
    s, _ = spec.apply(spec.initial_state(), "update", 9, 1)
    assert spec.apply(s, "scan", None, 0)[1] == (0, 9, 0)


def test_k_must_be_positive():
    with pytest.raises(NonPositiveK):
        transform_k(ABDRegister(), 0)
    with pytest.raises(NonPositiveK):
        ABDRegister(k=-1)


def test_unknown_method():
    with pytest.raises(UnknownMethod):
        ABDRegister().preamble_end("cas")


def test_preamble_mappings():
    assert ABDRegister().preamble_mapping() == {"read": "query.assign", "write": "query.assign"}
    assert transform_k(ABDRegister(), 3).preamble_mapping() == {"read": PICK_LABEL, "write": PICK_LABEL}
    assert make_impl("snapshot").preamble_mapping() == {"scan": "scan.result", "update": "call"}
    assert make_impl("snapshot", extended_update=True).preamble_mapping()["update"] == "scan.result"
    assert make_impl("va").preamble_mapping() == {"read": "read.choose", "write": "write.ts"}
    assert make_impl("il").preamble_mapping() == {"read": "read.choose", "write": "call"}
    assert make_impl("abd-k", k=2).label == "abd^2"


def test_atomic_cannot_be_iterated():
    with pytest.raises(TypeError):
        transform_k(make_impl("atomic"), 2)


def test_il_rejects_second_writer():
    with pytest.raises(WrongWriter):
        run(PAIR, make_impl("il"), Sequential())


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown object kind"):
        make_impl("cas")


@pytest.mark.parametrize("kind,k", [("atomic", 1), ("abd", 1), ("abd-k", 2), ("abd-k", 3), ("va", 1)])
def test_sequential_run_reads_last_write(kind, k):
    e = run(PAIR, make_impl(kind, k=k), Sequential(), tape=SeededTape(0))
    vals = {a.inv: a.value for a in project_history(e).actions if a.kind == "return"}
    assert vals[InvocationId(0, 1)] == 5
    assert vals[InvocationId(1, 0)] == 5
    assert vals[InvocationId(2, 0)] == 7
    assert e.terminal == (TERMINATED,) * 3


def test_iterated_preamble_draws_an_iteration():
    e = run(PAIR, make_impl("abd-k", k=3), Sequential(), tape=SeededTape(1))
    draws = [s for s in e.steps if s.kind == "random"]
    assert len(draws) == 5  # one per invocation
    assert all(s.payload["domain"] == [1, 2, 3] and s.payload["origin"] == "object" for s in draws)
    iters = {s.payload.get("iter") for s in e.steps if s.kind == "send" and s.payload.get("iter")}
    assert iters == {1, 2, 3}


def test_snapshot_scan_sees_updates():
    prog = parse_program("""\
object S = 0
process 0
  write S 4
process 1
  write S 6
process 2
  read v S
""")
    e = run(prog, make_impl("snapshot"), Sequential())
    ret = [a for a in project_history(e).actions if a.kind == "return" and a.method == "scan"]
    assert ret[0].value == (4, 6, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["abd", "abd-k", "snapshot", "va"]))
def test_random_runs_are_linearizable(seed, kind):
    impl = make_impl(kind, k=2)
    prog = PAIR
    e = run(prog, impl, RandomPolicy(seed, deliver_weight=0.4), tape=SeededTape(seed))
    ok, _ = check_linearizable(project_history(e), spec_for(impl.bind("X", 0, 3, 0)))
    assert ok


# -- effect-free preambles -------------------------------------------------------

DECLARED = [
    ("abd", {}, "read"), ("abd", {}, "write"),
    ("snapshot", {}, "scan"), ("snapshot", {}, "update"),
    ("snapshot", {"extended_update": True}, "update"),
    ("va", {}, "read"), ("va", {}, "write"),
    ("il", {}, "read"), ("il", {}, "write"),
]


@pytest.mark.parametrize("kind,opts,method", DECLARED)
def test_declared_preambles_are_effect_free(kind, opts, method):
    report = audit_effect_free(make_impl(kind, **opts), method)
    assert report.ok, report.violations[:3]
    assert report.invocations > 0


def test_iterated_preamble_is_effect_free():
    impl = make_impl("abd-k", k=2)
    assert audit_effect_free(impl, "write").ok
    assert audit_effect_free(impl, "read").ok


@pytest.mark.parametrize("end", ["update.send", "return"])
def test_abd_write_with_update_phase_in_preamble_fails(end):
    report = audit_effect_free(make_impl("abd"), "write", pm={"read": "query.assign", "write": end})
    assert not report.ok
    assert {v["site"] for v in report.violations} >= {"update.send"}


def test_va_write_including_the_store_fails():
    assert not audit_effect_free(make_impl("va"), "write", pm={"read": "read.choose", "write": "write.val"}).ok


def test_end_past_return_is_an_error():
    with pytest.raises(ValueError):
        audit_effect_free(make_impl("abd"), "read", pm={"read": "nowhere", "write": "query.assign"})
