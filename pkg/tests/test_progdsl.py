from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from blunt.progdsl import (
    BinOp, Const, If, InvocationId, LoopForever, Not, Program, ProgramSyntaxError, Random, ReadObj,
    Terminate, Var, WriteObj, compile_program, eval_expr, format_expr, format_program,
    _cexpr, max_random_steps, parse_expr, parse_program, weakener, weakener_bad,
)
from blunt.values import BOT

WEAKENER_TEXT = """\
program weakener
object R = bot
object C = -1
process 0
  write R 0
process 1
  write R 1
  random c in {0, 1}
  write C c
process 2
  read u1 R
  read u2 R
  read c C
  if u1 == c and u2 == 1 - c
    loop
  else
    terminate
  end
"""


def test_text_form_matches_builtin_weakener():
    assert parse_program(WEAKENER_TEXT) == weakener()


def test_format_then_parse_is_identity_on_weakener():
    assert parse_program(format_program(weakener())) == weakener()


def test_syntax_errors_carry_line_numbers():
    with pytest.raises(ProgramSyntaxError) as info:
        parse_program("program p\nobject R = 0\nprocess 0\n  frobnicate R\n")
    assert info.value.lineno == 4


def test_object_initial_value_must_be_constant():
    with pytest.raises(ProgramSyntaxError):
        parse_program("object R = x\nprocess 0\n  read a R\n")


def test_unknown_object_rejected():
    with pytest.raises(ValueError, match="unknown object"):
        parse_program("object R = 0\nprocess 0\n  read a S\n")


def test_use_before_assignment_rejected():
    with pytest.raises(ValueError, match="before assignment"):
        parse_program("object R = 0\nprocess 0\n  write R x\n")


def test_variable_assigned_on_one_branch_only_is_unusable_after():
    text = """\
object R = 0
process 0
  read a R
  if a == 0
    random b in {0, 1}
  end
  write R b
"""
    with pytest.raises(ValueError):
        parse_program(text)


def test_processes_must_be_numbered_densely():
    with pytest.raises(ValueError):
        parse_program("object R = 0\nprocess 1\n  read a R\n")


def test_max_random_steps_takes_worst_branch():
    text = """\
object R = 0
process 0
  random a in {0, 1}
  if a == 1
    random b in {0, 1}
    random d in {0, 1}
  else
    loop
  end
process 1
  random x in {1, 2, 3}
"""
    assert max_random_steps(parse_program(text)) == 3
    assert max_random_steps(weakener()) == 1


@pytest.mark.parametrize("text,env,value", [
    ("1 - c", {"c": 0}, 1),
    ("u1 == c and u2 == 1 - c", {"u1": 0, "u2": 1, "c": 0}, True),
    ("not a", {"a": 0}, True),
    ("a + 2 * b", {"a": 1, "b": 3}, 7),
    ("x == bot", {"x": BOT}, True),
])
def test_expression_evaluation(text, env, value):
    assert evaluate(text, env) == value


def evaluate(text, env):
    slots: dict = {}
    code = _cexpr(parse_expr(text), slots)
    frame = [None] * len(slots)
    for name, i in slots.items():
        frame[i] = env[name]
    return eval_expr(code, frame)


def test_bot_compares_and_absorbs_arithmetic():
    assert evaluate("u == 0", {"u": BOT}) is False
    assert evaluate("u + 1", {"u": BOT}) is BOT
    assert evaluate("u < 1", {"u": BOT}) is False


def test_compiled_code_uses_slots():
    code = compile_program(weakener())
    assert len(code) == 3
    assert set(code[2].var_names) == {"u1", "u2", "c"}


def test_weakener_bad_predicate():
    bad = weakener_bad()
    u1, u2, c = InvocationId(2, 0), InvocationId(2, 1), InvocationId(2, 2)
    assert bad({u1: 0, u2: 1, c: 0})
    assert bad({u1: 1, u2: 0, c: 1})
    assert not bad({u1: 0, u2: 1, c: 1})
    assert not bad({u1: BOT, u2: 1, c: 0})
    # decided as soon as the reads of R rule it out
    assert bad.early({u1: 0, u2: 0}) is False
    assert bad.early({u1: BOT}) is False
    assert bad.early({u1: 0, u2: 1}) is None


# -- property: formatting round-trips ------------------------------------------

names = st.sampled_from(["a", "b", "c"])


@st.composite
def blocks(draw, depth=0, assigned=frozenset()):
    body = []
    assigned = set(assigned)
    for _ in range(draw(st.integers(0, 4))):
        choice = draw(st.integers(0, 4 if depth < 2 else 2))
        if choice == 0:
            v = draw(names)
            body.append(ReadObj(v, draw(st.sampled_from(["R", "S"]))))
            assigned.add(v)
        elif choice == 1:
            v = draw(names)
            dom = tuple(sorted(draw(st.sets(st.integers(0, 3), min_size=1, max_size=3))))
            body.append(Random(v, dom))
            assigned.add(v)
        elif choice == 2:
            if assigned and draw(st.booleans()):
                e = BinOp("+", Var(draw(st.sampled_from(sorted(assigned)))), Const(draw(st.integers(0, 5))))
            else:
                e = Const(draw(st.integers(-2, 5)))
            body.append(WriteObj(draw(st.sampled_from(["R", "S"])), e))
        elif choice == 3 and assigned:
            cond = BinOp("==", Var(draw(st.sampled_from(sorted(assigned)))), Const(draw(st.integers(0, 2))))
            if draw(st.booleans()):
                cond = Not(cond)
            then = draw(blocks(depth + 1, frozenset(assigned)))
            orelse = draw(blocks(depth + 1, frozenset(assigned)))
            body.append(If(cond, then, orelse))
        elif choice == 4:
            body.append(draw(st.sampled_from([LoopForever(), Terminate()])))
            break
    return tuple(body)


@st.composite
def programs(draw):
    procs = tuple(draw(blocks()) for _ in range(draw(st.integers(1, 3))))
    return Program("gen", (("R", 0), ("S", BOT)), procs)


@settings(max_examples=150, deadline=None)
@given(programs())
def test_format_parse_roundtrip(prog):
    assert parse_program(format_program(prog)) == prog


@settings(max_examples=150, deadline=None)
@given(st.recursive(
    st.integers(-3, 9).map(Const) | names.map(Var),
    lambda inner: st.builds(BinOp, st.sampled_from(["+", "-", "*", "==", "!=", "<", "and", "or"]), inner, inner)
    | inner.map(Not),
    max_leaves=8,
))
def test_expression_format_parse_roundtrip(e):
    assert parse_expr(format_expr(e)) == e
