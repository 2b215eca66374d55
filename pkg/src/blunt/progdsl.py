"""Loop-free randomized client programs and bad-outcome predicates.

A program is a fixed number of processes, each a list of instructions over
shared objects declared with initial values.  The only looping construct is
the ``loop`` sink, so the number of ``random`` steps on any path is finite.

Text form (one process per section, one instruction per line)::

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

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Union

from .values import BOT, show


class ProgramSyntaxError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class InvocationId(NamedTuple):
    """Syntax-derived invocation identifier: process, site, prior visits."""

    proc: int
    site: int
    occ: int = 0


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: object


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Const, Var, BinOp, Not]

_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul}
_CMP = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}
_AST_OPS = {
    ast.Add: "+", ast.Sub: "-", ast.Mult: "*",
    ast.Eq: "==", ast.NotEq: "!=", ast.Lt: "<", ast.LtE: "<=", ast.Gt: ">", ast.GtE: ">=",
    ast.And: "and", ast.Or: "or",
}
_PRECEDENCE = {"or": 1, "and": 2, "not": 3, "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
               "+": 5, "-": 5, "*": 6}


def parse_expr(text: str) -> Expr:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad expression {text!r}") from exc
    return _from_ast(tree.body)


def _from_ast(node) -> Expr:
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return Const(node.value)
    if isinstance(node, ast.Name):
        return Const(BOT) if node.id == "bot" else Var(node.id)
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            inner = _from_ast(node.operand)
            if isinstance(inner, Const) and isinstance(inner.value, int):
                return Const(-inner.value)
            return BinOp("-", Const(0), inner)
        if isinstance(node.op, ast.Not):
            return Not(_from_ast(node.operand))
    if isinstance(node, ast.BinOp) and type(node.op) in _AST_OPS:
        return BinOp(_AST_OPS[type(node.op)], _from_ast(node.left), _from_ast(node.right))
    if isinstance(node, ast.BoolOp):
        op = _AST_OPS[type(node.op)]
        out = _from_ast(node.values[0])
        for v in node.values[1:]:
            out = BinOp(op, out, _from_ast(v))
        return out
    if isinstance(node, ast.Compare) and len(node.ops) == 1:
        return BinOp(_AST_OPS[type(node.ops[0])], _from_ast(node.left), _from_ast(node.comparators[0]))
    raise ValueError(f"unsupported expression syntax: {ast.dump(node)}")


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, Const):
        return "bot" if e.value is BOT else str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Not):
        s = "not " + format_expr(e.operand, _PRECEDENCE["not"])
        prec = _PRECEDENCE["not"]
    else:
        prec = _PRECEDENCE[e.op]
        # comparisons chain in the surface syntax, so a nested one needs parentheses
        left = prec + 1 if prec == _PRECEDENCE["=="] else prec
        s = f"{format_expr(e.left, left)} {e.op} {format_expr(e.right, prec + 1)}"
    return f"({s})" if prec < parent else s


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Not):
        return expr_vars(e.operand)
    return set()


# -- instructions ------------------------------------------------------------


@dataclass(frozen=True)
class WriteObj:
    obj: str
    expr: Expr


@dataclass(frozen=True)
class ReadObj:
    var: str
    obj: str


@dataclass(frozen=True)
class Random:
    var: str
    domain: tuple


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class LoopForever:
    pass


@dataclass(frozen=True)
class Terminate:
    pass


Instruction = Union[WriteObj, ReadObj, Random, If, LoopForever, Terminate]


@dataclass(frozen=True)
class Program:
    name: str
    objects: tuple  # ((name, initial value), ...)
    processes: tuple  # one instruction tuple per process

    @property
    def n(self) -> int:
        return len(self.processes)

    @property
    def object_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.objects)

    def initial_value(self, name: str):
        return dict(self.objects)[name]

    def validate(self) -> None:
        names = set(self.object_names)
        for pid, body in enumerate(self.processes):
            assigned: set[str] = set()
            _check_block(body, names, assigned, pid)


def _check_block(body, names, assigned, pid) -> set[str]:
    for ins in body:
        if isinstance(ins, (WriteObj, ReadObj)) and ins.obj not in names:
            raise ValueError(f"process {pid}: unknown object {ins.obj!r}")
        if isinstance(ins, WriteObj):
            _check_vars(ins.expr, assigned, pid)
        elif isinstance(ins, ReadObj):
            assigned.add(ins.var)
        elif isinstance(ins, Random):
            if not ins.domain:
                raise ValueError(f"process {pid}: empty random domain")
            assigned.add(ins.var)
        elif isinstance(ins, If):
            _check_vars(ins.cond, assigned, pid)
            a = _check_block(ins.then, names, set(assigned), pid)
            b = _check_block(ins.orelse, names, set(assigned), pid)
            assigned |= a & b
    return assigned


def _check_vars(e, assigned, pid) -> None:
    missing = expr_vars(e) - assigned
    if missing:
        raise ValueError(f"process {pid}: variables read before assignment: {sorted(missing)}")


def max_random_steps(program: Program) -> int:
    """Largest number of program ``random`` instructions on any path."""

    def block(body) -> int:
        total = 0
        for ins in body:
            if isinstance(ins, Random):
                total += 1
            elif isinstance(ins, If):
                total += max(block(ins.then), block(ins.orelse))
            elif isinstance(ins, (LoopForever, Terminate)):
                break
        return total

    return max((block(body) for body in program.processes), default=0)


# -- text format -------------------------------------------------------------


def parse_program(text: str) -> Program:
    name = "program"
    objects: list[tuple[str, object]] = []
    procs: dict[int, list] = {}
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, ln) for no, ln in lines if ln]
    pos = 0
    current: Optional[int] = None
    while pos < len(lines):
        no, ln = lines[pos]
        head, _, rest = ln.partition(" ")
        if head == "program":
            name = rest.strip() or name
            pos += 1
        elif head == "object":
            oname, eq, init = rest.partition("=")
            if not eq:
                raise ProgramSyntaxError(no, "expected 'object NAME = VALUE'")
            init_e = parse_expr(init)
            if not isinstance(init_e, Const):
                raise ProgramSyntaxError(no, "initial value must be a constant")
            objects.append((oname.strip(), init_e.value))
            pos += 1
        elif head == "process":
            try:
                current = int(rest.rstrip(":"))
            except ValueError:
                raise ProgramSyntaxError(no, "expected 'process N'") from None
            if current in procs:
                raise ProgramSyntaxError(no, f"duplicate process {current}")
            body, pos = _parse_block(lines, pos + 1, stop=("process",))
            procs[current] = body
        else:
            raise ProgramSyntaxError(no, f"unexpected {head!r}")
    if sorted(procs) != list(range(len(procs))):
        raise ValueError("processes must be numbered 0..n-1")
    prog = Program(name, tuple(objects), tuple(tuple(procs[i]) for i in range(len(procs))))
    prog.validate()
    return prog


def _parse_block(lines, pos, stop):
    body: list = []
    while pos < len(lines):
        no, ln = lines[pos]
        head, _, rest = ln.partition(" ")
        rest = rest.strip()
        if head in stop:
            return body, pos
        pos += 1
        if head == "write":
            obj, _, e = rest.partition(" ")
            body.append(WriteObj(obj, _expr(e, no)))
        elif head == "read":
            parts = rest.split()
            if len(parts) != 2:
                raise ProgramSyntaxError(no, "expected 'read VAR OBJ'")
            body.append(ReadObj(parts[0], parts[1]))
        elif head == "random":
            var, _, dom = rest.partition(" in ")
            dom = dom.strip()
            if not (dom.startswith("{") and dom.endswith("}")):
                raise ProgramSyntaxError(no, "expected 'random VAR in {v, ...}'")
            vals = tuple(_const(v, no) for v in dom[1:-1].split(",") if v.strip())
            if not vals:
                raise ProgramSyntaxError(no, "empty random domain")
            body.append(Random(var.strip(), vals))
        elif head == "if":
            then, pos = _parse_block(lines, pos, stop=("else", "end"))
            orelse: list = []
            if pos < len(lines) and lines[pos][1] == "else":
                orelse, pos = _parse_block(lines, pos + 1, stop=("end",))
            if pos >= len(lines) or lines[pos][1] != "end":
                raise ProgramSyntaxError(no, "unterminated if")
            pos += 1
            body.append(If(_expr(rest, no), tuple(then), tuple(orelse)))
        elif head == "loop":
            body.append(LoopForever())
        elif head == "terminate":
            body.append(Terminate())
        else:
            raise ProgramSyntaxError(no, f"unknown instruction {head!r}")
    return body, pos


def _expr(text: str, no: int) -> Expr:
    try:
        return parse_expr(text)
    except ValueError as exc:
        raise ProgramSyntaxError(no, str(exc)) from None


def _const(text: str, no: int):
    e = _expr(text, no)
    if not isinstance(e, Const):
        raise ProgramSyntaxError(no, f"not a constant: {text.strip()!r}")
    return e.value


def format_program(program: Program) -> str:
    out = [f"program {program.name}"]
    for name, init in program.objects:
        out.append(f"object {name} = {format_expr(Const(init))}")
    for pid, body in enumerate(program.processes):
        out.append(f"process {pid}")
        _format_block(body, 1, out)
    return "\n".join(out) + "\n"


def _format_block(body, depth, out) -> None:
    pad = "  " * depth
    for ins in body:
        if isinstance(ins, WriteObj):
            out.append(f"{pad}write {ins.obj} {format_expr(ins.expr)}")
        elif isinstance(ins, ReadObj):
            out.append(f"{pad}read {ins.var} {ins.obj}")
        elif isinstance(ins, Random):
            dom = ", ".join(format_expr(Const(v)) for v in ins.domain)
            out.append(f"{pad}random {ins.var} in {{{dom}}}")
        elif isinstance(ins, If):
            out.append(f"{pad}if {format_expr(ins.cond)}")
            _format_block(ins.then, depth + 1, out)
            if ins.orelse:
                out.append(f"{pad}else")
                _format_block(ins.orelse, depth + 1, out)
            out.append(f"{pad}end")
        elif isinstance(ins, LoopForever):
            out.append(f"{pad}loop")
        else:
            out.append(f"{pad}terminate")


# -- compilation to flat code ------------------------------------------------
#
# Each process body is flattened in source order; the index of an instruction
# in the flat code is its site.  Opcodes:
#   ("write", obj_index, expr)     ("read", obj_index, slot)
#   ("random", domain, slot)       ("branch", cond, else_target)
#   ("jump", target)  ("loop",)  ("halt",)
# Expressions compile to nested tuples over variable slots.


@dataclass(frozen=True)
class CompiledProcess:
    code: tuple
    var_names: tuple[str, ...]


def compile_program(program: Program) -> tuple[CompiledProcess, ...]:
    objs = {name: i for i, (name, _) in enumerate(program.objects)}
    out = []
    for body in program.processes:
        slots: dict[str, int] = {}
        code: list = []
        _flatten(body, code, slots, objs)
        out.append(CompiledProcess(tuple(code), tuple(sorted(slots, key=slots.get))))
    return tuple(out)


def _slot(slots, name) -> int:
    if name not in slots:
        slots[name] = len(slots)
    return slots[name]


def _cexpr(e: Expr, slots):
    if isinstance(e, Const):
        return ("c", e.value)
    if isinstance(e, Var):
        return ("v", _slot(slots, e.name))
    if isinstance(e, Not):
        return ("not", _cexpr(e.operand, slots))
    return (e.op, _cexpr(e.left, slots), _cexpr(e.right, slots))


def _flatten(body, code, slots, objs) -> None:
    for ins in body:
        if isinstance(ins, WriteObj):
            code.append(("write", objs[ins.obj], _cexpr(ins.expr, slots)))
        elif isinstance(ins, ReadObj):
            code.append(("read", objs[ins.obj], _slot(slots, ins.var)))
        elif isinstance(ins, Random):
            code.append(("random", tuple(ins.domain), _slot(slots, ins.var)))
        elif isinstance(ins, If):
            at = len(code)
            code.append(None)
            _flatten(ins.then, code, slots, objs)
            if ins.orelse:
                jump_at = len(code)
                code.append(None)
                else_at = len(code)
                _flatten(ins.orelse, code, slots, objs)
                code[jump_at] = ("jump", len(code))
            else:
                else_at = len(code)
            code[at] = ("branch", _cexpr(ins.cond, slots), else_at)
        elif isinstance(ins, LoopForever):
            code.append(("loop",))
        else:
            code.append(("halt",))


def eval_expr(e, env):
    tag = e[0]
    if tag == "c":
        return e[1]
    if tag == "v":
        return env[e[1]]
    if tag == "not":
        return not eval_expr(e[1], env)
    if tag == "and":
        return bool(eval_expr(e[1], env)) and bool(eval_expr(e[2], env))
    if tag == "or":
        return bool(eval_expr(e[1], env)) or bool(eval_expr(e[2], env))
    a = eval_expr(e[1], env)
    b = eval_expr(e[2], env)
    if tag in _CMP:
        if tag in ("==", "!="):
            return _CMP[tag](a, b)
        if a is BOT or b is BOT:
            return False  # bottom is unordered for programs
        try:
            return _CMP[tag](a, b)
        except TypeError:
            return False
    if a is BOT or b is BOT or not isinstance(a, int) or not isinstance(b, int):
        return BOT  # bottom absorbs arithmetic
    return _ARITH[tag](a, b)


# -- bad-outcome predicates --------------------------------------------------


@dataclass(frozen=True)
class BadPredicate:
    """Decidable predicate over outcomes (maps from invocation id to value).

    ``holds`` is total on outcomes.  ``decide`` sees a partial outcome and
    answers True/False once the answer can no longer change, else None;
    invocations outside ``watched`` never influence the verdict.
    """

    name: str
    holds: Callable[[Mapping[InvocationId, object]], bool]
    decide: Callable[[Mapping[InvocationId, object]], Optional[bool]] = field(default=None)
    watched: Optional[frozenset] = None

    def early(self, partial: Mapping[InvocationId, object]) -> Optional[bool]:
        if self.decide is not None:
            return self.decide(partial)
        if self.watched is not None and all(i in partial for i in self.watched):
            return bool(self.holds(partial))
        return None

    def __call__(self, outcome: Mapping[InvocationId, object]) -> bool:
        return bool(self.holds(outcome))


def weakener() -> Program:
    """Three processes sharing R (written by p0, p1) and C (written by p1)."""
    return Program(
        "weakener",
        (("R", BOT), ("C", -1)),
        (
            (WriteObj("R", Const(0)),),
            (WriteObj("R", Const(1)), Random("c", (0, 1)), WriteObj("C", Var("c"))),
            (
                ReadObj("u1", "R"),
                ReadObj("u2", "R"),
                ReadObj("c", "C"),
                If(
                    BinOp("and",
                          BinOp("==", Var("u1"), Var("c")),
                          BinOp("==", Var("u2"), BinOp("-", Const(1), Var("c")))),
                    (LoopForever(),),
                    (Terminate(),),
                ),
            ),
        ),
    )


WEAKENER_U1 = InvocationId(2, 0)
WEAKENER_U2 = InvocationId(2, 1)
WEAKENER_C = InvocationId(2, 2)


def _weakener_holds(outcome) -> bool:
    u1 = outcome.get(WEAKENER_U1, BOT)
    u2 = outcome.get(WEAKENER_U2, BOT)
    c = outcome.get(WEAKENER_C, BOT)
    if not all(isinstance(x, int) and not isinstance(x, bool) for x in (u1, u2, c)):
        return False
    return u1 == c and u2 == 1 - c


def _weakener_decide(partial) -> Optional[bool]:
    u1 = partial.get(WEAKENER_U1)
    u2 = partial.get(WEAKENER_U2)
    c = partial.get(WEAKENER_C)
    if u1 is not None and not isinstance(u1, int):
        return False
    if u1 is not None and u2 is not None and (not isinstance(u2, int) or u2 != 1 - u1):
        return False
    if u1 is not None and u2 is not None and c is not None:
        return _weakener_holds(partial)
    return None


def weakener_bad() -> BadPredicate:
    return BadPredicate(
        "weakener-loops",
        _weakener_holds,
        _weakener_decide,
        frozenset({WEAKENER_U1, WEAKENER_U2, WEAKENER_C}),
    )


def describe_outcome(outcome: Mapping[InvocationId, object]) -> str:
    return ", ".join(f"p{i.proc}@{i.site}={show(v)}" for i, v in sorted(outcome.items()))
