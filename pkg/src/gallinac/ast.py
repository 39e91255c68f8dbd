"""Deep embedding: expression and command trees, programs, well-formedness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from .state import WORD_MOD

# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class EFVar:
    name: str


@dataclass(frozen=True)
class EUnit:
    pass


@dataclass(frozen=True)
class EBool:
    b: bool


@dataclass(frozen=True)
class ENat:
    n: int

    def __post_init__(self):
        if not 0 <= self.n < WORD_MOD:
            raise ValueError(f"literal {self.n} is not a word")


@dataclass(frozen=True)
class ENull:
    pass


@dataclass(frozen=True)
class ENot:
    e: Expr


@dataclass(frozen=True)
class EBin:
    """Binary operator; ``op`` is one of ``BINOPS``."""

    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        if self.op not in BINOPS:
            raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True)
class EPtrShiftFw:
    ptr: Expr
    by: Expr


BINOPS = ("add", "sub", "eq", "neq", "and", "or", "lt")

Expr = Union[EFVar, EUnit, EBool, ENat, ENull, ENot, EBin, EPtrShiftFw]


def EAdd(a, b):
    return EBin("add", a, b)


def ESub(a, b):
    return EBin("sub", a, b)


def EEq(a, b):
    return EBin("eq", a, b)


def ENeq(a, b):
    return EBin("neq", a, b)


def EAnd(a, b):
    return EBin("and", a, b)


def EOr(a, b):
    return EBin("or", a, b)


def ELt(a, b):
    return EBin("lt", a, b)


# -- commands ----------------------------------------------------------------


@dataclass(frozen=True)
class CRet:
    e: Expr


@dataclass(frozen=True)
class CBind:
    name: str
    first: Cmd
    rest: Cmd


@dataclass(frozen=True)
class CSeq:
    first: Cmd
    rest: Cmd


@dataclass(frozen=True)
class CCall:
    fn: str
    args: tuple[Expr, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class CIf:
    cond: Expr
    then: Cmd
    orelse: Cmd


@dataclass(frozen=True)
class CWhile:
    cond: Cmd
    body: Cmd


@dataclass(frozen=True)
class CVar:
    name: str
    init: Cmd
    body: Cmd


@dataclass(frozen=True)
class CReadVar:
    name: str


@dataclass(frozen=True)
class CWriteVar:
    name: str
    e: Expr


@dataclass(frozen=True)
class CAlloc:
    n: int
    init: Expr


@dataclass(frozen=True)
class CReadPtr:
    ptr: Expr


@dataclass(frozen=True)
class CWritePtr:
    ptr: Expr
    e: Expr


@dataclass(frozen=True)
class CFree:
    ptr: Expr


@dataclass(frozen=True)
class CFail:
    pass


@dataclass(frozen=True)
class CLoop:
    pass


Cmd = Union[CRet, CBind, CSeq, CCall, CIf, CWhile, CVar, CReadVar, CWriteVar,
            CAlloc, CReadPtr, CWritePtr, CFree, CFail, CLoop]


@dataclass(frozen=True)
class FunDef:
    params: tuple[str, ...]
    body: Cmd

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))


@dataclass(frozen=True)
class Program:
    functions: dict = field(default_factory=dict)
    main: Cmd = CRet(EUnit())


# -- traversal helpers -------------------------------------------------------


def sub_exprs(e: Expr) -> tuple:
    if isinstance(e, ENot):
        return (e.e,)
    if isinstance(e, EBin):
        return (e.left, e.right)
    if isinstance(e, EPtrShiftFw):
        return (e.ptr, e.by)
    return ()


def cmd_exprs(c: Cmd) -> tuple:
    if isinstance(c, (CRet, CWriteVar)):
        return (c.e,)
    if isinstance(c, CCall):
        return c.args
    if isinstance(c, CIf):
        return (c.cond,)
    if isinstance(c, CAlloc):
        return (c.init,)
    if isinstance(c, (CReadPtr, CFree)):
        return (c.ptr,)
    if isinstance(c, CWritePtr):
        return (c.ptr, c.e)
    return ()


def sub_cmds(c: Cmd) -> tuple:
    if isinstance(c, (CBind, CSeq)):
        return (c.first, c.rest)
    if isinstance(c, CIf):
        return (c.then, c.orelse)
    if isinstance(c, CWhile):
        return (c.cond, c.body)
    if isinstance(c, CVar):
        return (c.init, c.body)
    return ()


def walk(c: Cmd) -> Iterator[Cmd]:
    """Pre-order iteration over every command node."""
    stack = [c]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(sub_cmds(node)))


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, EFVar):
        return {e.name}
    out: set[str] = set()
    for s in sub_exprs(e):
        out |= expr_vars(s)
    return out


def cmd_size(c: Cmd) -> int:
    return sum(1 for _ in walk(c))


def program_size(p: Program) -> int:
    return cmd_size(p.main) + sum(cmd_size(f.body) for f in p.functions.values())


# -- well-formedness ---------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


def _check_expr(e, temps, where, out):
    for name in sorted(expr_vars(e)):
        if name not in temps:
            out.append(Diagnostic("unbound-temp", f"{name!r} in {where}"))


def _check_cmd(c, temps, store, prog, where, out, calls):
    for e in cmd_exprs(c):
        _check_expr(e, temps, where, out)
    if isinstance(c, CBind):
        _check_cmd(c.first, temps, store, prog, where, out, calls)
        _check_cmd(c.rest, temps | {c.name}, store, prog, where, out, calls)
    elif isinstance(c, CVar):
        _check_cmd(c.init, temps, store, prog, where, out, calls)
        _check_cmd(c.body, temps, store | {c.name}, prog, where, out, calls)
    elif isinstance(c, (CReadVar, CWriteVar)):
        if c.name not in store:
            out.append(Diagnostic("unbound-store-var", f"{c.name!r} in {where}"))
    elif isinstance(c, CCall):
        calls.add(c.fn)
        f = prog.functions.get(c.fn)
        if f is None:
            out.append(Diagnostic("unknown-function", f"{c.fn!r} called in {where}"))
        elif len(f.params) != len(c.args):
            out.append(Diagnostic(
                "arity-mismatch",
                f"{c.fn!r} expects {len(f.params)} arguments, got {len(c.args)} in {where}"))
    elif isinstance(c, CAlloc):
        if c.n < 1:
            out.append(Diagnostic("bad-alloc-size", f"alloc of {c.n} cells in {where}"))
    else:
        for sub in sub_cmds(c):
            _check_cmd(sub, temps, store, prog, where, out, calls)


def _find_cycle(graph: dict[str, set[str]]) -> list[str] | None:
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}
    path: list[str] = []

    def visit(n):
        color[n] = GREY
        path.append(n)
        for m in sorted(graph.get(n, ())):
            if m not in color:
                continue
            if color[m] == GREY:
                return path[path.index(m):] + [m]
            if color[m] == WHITE:
                cyc = visit(m)
                if cyc:
                    return cyc
        path.pop()
        color[n] = BLACK
        return None

    for n in sorted(graph):
        if color[n] == WHITE:
            cyc = visit(n)
            if cyc:
                return cyc
    return None


def well_formed(p: Program) -> list[Diagnostic]:
    """Static checks; an empty list means the program is well formed.

    Temporaries (``bind`` names and parameters) and store variables
    (``var`` names) live in separate scopes.  A function body sees only its
    own parameters and variables, never the caller's.  Calls must resolve
    with the right arity and the call graph must be acyclic: loops are the
    only source of unbounded iteration.
    """
    out: list[Diagnostic] = []
    graph: dict[str, set[str]] = {}
    for name in sorted(p.functions):
        f = p.functions[name]
        if len(set(f.params)) != len(f.params):
            out.append(Diagnostic("duplicate-param", f"in function {name!r}"))
        calls: set[str] = set()
        _check_cmd(f.body, frozenset(f.params), frozenset(), p,
                   f"function {name!r}", out, calls)
        graph[name] = calls
    _check_cmd(p.main, frozenset(), frozenset(), p, "main", out, set())
    cyc = _find_cycle(graph)
    if cyc:
        out.append(Diagnostic("recursive-call", " -> ".join(cyc)))
    return out
