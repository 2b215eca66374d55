"""End-to-end acceptance checks, one test per criterion.

Each test records a verdict line that the terminal summary prints, then
asserts.  The ABD^2 search explores about 2.7 million configurations and
dominates the running time (roughly half an hour on one core).
"""

from __future__ import annotations

import sys
import time
from fractions import Fraction

import pytest

from blunt.adversary import expectimax, monte_carlo, prob_x_lower_bound, theorem_bound
from blunt.adversary.exact import exact_policy_value
from blunt.adversary.outcomes import outcome_set
from blunt.adversary.policies import POLICIES, WrongConfiguration, crafted_abd_weakener_policy
from blunt.core import LOOP_FOREVER, outcome_of, run
from blunt.lincheck import (
    canonical_prefix_check, check_strong_linearizable, check_tail_strong, enumerate_tree,
    fuzz_linearizability, writers_reader_program,
)
from blunt.objects import RegisterSpec, audit_effect_free, make_impl
from blunt.progdsl import parse_program, weakener, weakener_bad
from blunt.values import BOT
from conftest import ACCEPTANCE

HALF = Fraction(1, 2)
FIVE_EIGHTHS = Fraction(5, 8)
SEVEN_EIGHTHS = Fraction(7, 8)
MC_TRIALS = 2000
FUZZ_RUNS = 10_000


def verdict(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = (ok, detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}", file=sys.stderr)


@pytest.fixture(scope="module")
def abd2():
    """Optimal search on the weakener with ABD^2 plus Monte Carlo batches
    under every shipped policy and the searched one."""
    impl = make_impl("abd-k", k=2)
    t0 = time.time()
    sr = expectimax(weakener(), impl, weakener_bad(), budget=10**7)
    elapsed = time.time() - t0
    policies = {}
    for name, factory in POLICIES.items():
        policies[name] = factory()
    policies["optimal"] = sr.policy
    batches = {}
    for name, pol in policies.items():
        try:
            batches[name] = monte_carlo(weakener(), impl, pol, MC_TRIALS, 2024, weakener_bad())
        except WrongConfiguration:
            continue  # policy written for another object
    exact = {}
    for name in ("operation-order", "sequential", "round-robin", "optimal"):
        exact[name] = exact_policy_value(weakener(), impl, policies[name], weakener_bad()).value
    return sr, elapsed, batches, exact


def test_criterion_1_atomic_baseline():
    t0 = time.time()
    res = expectimax(weakener(), make_impl("atomic"), weakener_bad())
    elapsed = time.time() - t0
    ok = res.exhausted and res.value == HALF and elapsed < 10
    verdict(1, ok, f"atomic value {res.value} in {elapsed:.2f}s")
    assert res.value == HALF and res.exhausted
    assert elapsed < 10


def test_criterion_2_abd_zero_termination():
    impl = make_impl("abd")
    branches = []
    for coin in (0, 1):
        e = run(weakener(), impl, crafted_abd_weakener_policy(), tape=[coin])
        branches.append(weakener_bad()(outcome_of(e).values) and e.terminal[2] == LOOP_FOREVER)
    exact = exact_policy_value(weakener(), impl, crafted_abd_weakener_policy(), weakener_bad()).value
    sr = expectimax(weakener(), impl, weakener_bad(), budget=10**8, por=True)
    ok = all(branches) and exact == 1 and sr.value == 1
    verdict(2, ok, f"crafted branches {branches}, exact {exact}, search {sr.value} ({sr.stats.nodes} nodes)")
    assert all(branches)
    assert exact == 1
    assert sr.value == 1


def test_criterion_3_abd2_window(abd2):
    sr, elapsed, batches, exact = abd2
    if sr.exhausted:
        p_star, how = sr.value, f"exact search, {sr.stats.nodes} nodes, {elapsed:.0f}s"
        # the extracted policy, replayed on every tape, must achieve the value
        in_window = HALF <= p_star <= FIVE_EIGHTHS and exact["optimal"] == p_star
        how += f"; searched policy replayed exactly: {exact['optimal']}"
    else:
        # certified lower bound: the partial search or an exactly evaluated policy
        p_star = max([sr.value, *exact.values()])
        how = f"budget exhausted; certified lower bound over {sorted(exact)}"
        in_window = HALF <= p_star and all(
            b.estimate < float(FIVE_EIGHTHS) + b.half_width for b in batches.values())
    envelope = {name: b.estimate for name, b in batches.items()}
    below = all(b.estimate < float(FIVE_EIGHTHS) + b.half_width for b in batches.values())
    ok = in_window and below
    verdict(3, ok, f"p* = {p_star} ({how}); MC estimates {envelope}")
    assert in_window
    assert below


def test_criterion_4_generic_bound(abd2):
    _, _, batches, _ = abd2
    exact_bound = theorem_bound(HALF, 1, 3, 1, 2)
    px = prob_x_lower_bound(3, 1, 2)
    ks = [1, 2, 3, 5, 10, 100, 1000, 10**4, 10**6]
    bounds = [theorem_bound(HALF, 1, 3, 1, k) for k in ks]
    monotone = all(a >= b for a, b in zip(bounds, bounds[1:]))
    near = abs(bounds[-1] - HALF) <= Fraction(1, 10**5)
    measured = all(b.estimate <= float(SEVEN_EIGHTHS) + b.half_width for b in batches.values())
    ok = exact_bound == SEVEN_EIGHTHS and px == Fraction(1, 4) and monotone and near and measured
    verdict(4, ok, f"bound {exact_bound}, Pr[X] >= {px}, k=10^6 gap {float(bounds[-1] - HALF):.2e}, "
                   f"max measured {max(b.estimate for b in batches.values()):.4f}")
    assert exact_bound == SEVEN_EIGHTHS
    assert px == Fraction(1, 4)
    assert monotone and near
    assert measured


def test_criterion_5_linearizability_fuzzing():
    cases = [("abd", 1), ("abd-k", 2), ("abd-k", 3), ("snapshot", 1), ("va", 1), ("il", 1)]
    results = {}
    for kind, k in cases:
        r = fuzz_linearizability(kind, FUZZ_RUNS, seed=0, k=k)
        results[f"{kind}^{k}" if kind == "abd-k" else kind] = (r.passed, r.runs)
    ok = all(p == n == FUZZ_RUNS for p, n in results.values())
    verdict(5, ok, f"passed/runs {results}")
    assert ok


def test_criterion_6_tail_strong_linearizability():
    spec = RegisterSpec(BOT)
    pm = {"read": "query.assign", "write": "query.assign"}
    tree = enumerate_tree(writers_reader_program(), make_impl("abd"), depth=20)
    tail = check_tail_strong(tree, spec, pm)
    canon = canonical_prefix_check(tree, spec, pm)
    strong = check_strong_linearizable(tree, spec)
    has_witness = strong.witness is not None and bool(strong.witness.get("history"))
    ok = tail.ok and canon["ok"] and not strong.ok and has_witness
    verdict(6, ok, f"tree {len(tree)} nodes (truncated={tree.truncated}); tail {tail.ok}; "
                   f"canonical prefix pairs {canon['pairs']} ok={canon['ok']}; strong {strong.ok} with witness")
    assert tail.ok
    assert canon["ok"]
    assert not strong.ok and has_witness


def test_criterion_7_effect_free_preambles():
    declared = [
        (make_impl("abd"), "read"), (make_impl("abd"), "write"),
        (make_impl("snapshot"), "scan"), (make_impl("snapshot"), "update"),
        (make_impl("va"), "read"), (make_impl("va"), "write"),
        (make_impl("il"), "read"), (make_impl("il"), "write"),
    ]
    passed = {f"{impl.kind}.{m}": audit_effect_free(impl, m).ok for impl, m in declared}
    wrong = audit_effect_free(make_impl("abd"), "write", pm={"read": "query.assign", "write": "update.send"})
    ok = all(passed.values()) and not wrong.ok
    verdict(7, ok, f"declared {passed}; mis-declared ABD write rejected: {not wrong.ok}")
    assert all(passed.values())
    assert not wrong.ok


SMALL = parse_program("""\
program two-by-two
object R = 0
process 0
  write R 1
  write R 2
process 1
  read a R
  read b R
""")


def test_criterion_8_model_identities(abd2):
    _, _, batches, _ = abd2
    impls = {"atomic": make_impl("atomic"), "abd": make_impl("abd"), "abd^2": make_impl("abd-k", k=2)}
    same = True
    sizes = {}
    for name, prog in (("two-by-two", SMALL), ("writers-reader", writers_reader_program())):
        sets = {}
        for label, impl in impls.items():
            outs, truncated = outcome_set(prog, impl, depth=200)
            assert not truncated
            sets[label] = outs
        same = same and len({s for s in sets.values()}) == 1
        sizes[name] = len(sets["atomic"])
    atomic = expectimax(weakener(), make_impl("atomic"), weakener_bad()).value
    abd = expectimax(weakener(), make_impl("abd"), weakener_bad()).value
    identity = all(b.decomposition().holds for b in batches.values())
    ok = same and abd >= atomic and identity
    verdict(8, ok, f"outcome sets equal {same} (sizes {sizes}); search abd {abd} >= atomic {atomic}; "
                   f"decomposition identity on {len(batches)} batches {identity}")
    assert same
    assert abd >= atomic
    assert identity
