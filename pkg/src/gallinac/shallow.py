"""Host-level combinators for writing programs.

Each combinator returns a :class:`ShallowProg` holding the deep command it
stands for, so a program is written once and yields both an executable
meaning (its denotation) and an AST for the compiler.  Plain Python ints and
bools are accepted wherever an expression is expected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from . import ast as A
from .denote import denote_cmd
from .sexpr import ser_cmd
from .state import State


@dataclass(frozen=True)
class ShallowProg:
    deep: A.Cmd
    meta: tuple = field(default=(), compare=False)

    def run(self, state: State | None = None, fuel: int = 1000,
            prog: A.Program | None = None):
        return denote_cmd(self.deep, prog, state or State(), fuel)

    def __str__(self):
        return ser_cmd(self.deep)


def _where():
    f = sys._getframe(2)
    return (f.f_code.co_filename, f.f_lineno)


def _wrap(c: A.Cmd) -> ShallowProg:
    return ShallowProg(c, _where())


_EXPR_TYPES = (A.EFVar, A.EUnit, A.EBool, A.ENat, A.ENull, A.ENot, A.EBin, A.EPtrShiftFw)
_CMD_TYPES = (A.CRet, A.CBind, A.CSeq, A.CCall, A.CIf, A.CWhile, A.CVar, A.CReadVar,
              A.CWriteVar, A.CAlloc, A.CReadPtr, A.CWritePtr, A.CFree, A.CFail, A.CLoop)


def expr(x) -> A.Expr:
    if isinstance(x, bool):
        return A.EBool(x)
    if isinstance(x, int):
        return A.ENat(x)
    if isinstance(x, _EXPR_TYPES):
        return x
    raise TypeError(f"expected an expression, got {x!r}")


def cmd(x) -> A.Cmd:
    if isinstance(x, ShallowProg):
        return x.deep
    if isinstance(x, _CMD_TYPES):
        return x
    raise TypeError(f"expected a command, got {x!r}")


def _ident(x) -> str:
    if not isinstance(x, str):
        raise TypeError(f"expected a name, got {x!r}")
    return x


# -- expressions -------------------------------------------------------------

unit = A.EUnit()
null = A.ENull()


def fvar(name: str) -> A.Expr:
    return A.EFVar(_ident(name))


def nat(n: int) -> A.Expr:
    return A.ENat(n)


def boolean(b: bool) -> A.Expr:
    return A.EBool(bool(b))


def not_(e) -> A.Expr:
    return A.ENot(expr(e))


def _bin(op):
    def build(a, b) -> A.Expr:
        return A.EBin(op, expr(a), expr(b))
    build.__name__ = op
    return build


add = _bin("add")
sub = _bin("sub")
eq = _bin("eq")
neq = _bin("neq")
and_ = _bin("and")
or_ = _bin("or")
lt = _bin("lt")


def shift(p, k) -> A.Expr:
    return A.EPtrShiftFw(expr(p), expr(k))


# -- commands ----------------------------------------------------------------


def ret(e) -> ShallowProg:
    return _wrap(A.CRet(expr(e)))


def bind(name: str, first, rest) -> ShallowProg:
    return _wrap(A.CBind(_ident(name), cmd(first), cmd(rest)))


def seq(first, *rest) -> ShallowProg:
    """``first ;; r1 ;; r2 ...``, right-nested."""
    if not rest:
        raise TypeError("seq needs at least two commands")
    cmds = [cmd(first), *map(cmd, rest)]
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = A.CSeq(c, out)
    return _wrap(out)


def call(fn: str, *args) -> ShallowProg:
    return _wrap(A.CCall(_ident(fn), tuple(map(expr, args))))


def if_(cond, then, orelse) -> ShallowProg:
    return _wrap(A.CIf(expr(cond), cmd(then), cmd(orelse)))


def while_(cond, body) -> ShallowProg:
    return _wrap(A.CWhile(cmd(cond), cmd(body)))


def var_(name: str, init, body) -> ShallowProg:
    return _wrap(A.CVar(_ident(name), cmd(init), cmd(body)))


def read_var(name: str) -> ShallowProg:
    return _wrap(A.CReadVar(_ident(name)))


def write_var(name: str, e) -> ShallowProg:
    return _wrap(A.CWriteVar(_ident(name), expr(e)))


def alloc(n: int, e) -> ShallowProg:
    if not isinstance(n, int) or isinstance(n, bool):
        raise TypeError(f"alloc size must be a literal natural, got {n!r}")
    return _wrap(A.CAlloc(n, expr(e)))


def read_ptr(p) -> ShallowProg:
    return _wrap(A.CReadPtr(expr(p)))


def write_ptr(p, e) -> ShallowProg:
    return _wrap(A.CWritePtr(expr(p), expr(e)))


def free(p) -> ShallowProg:
    return _wrap(A.CFree(expr(p)))


def fail() -> ShallowProg:
    return _wrap(A.CFail())


def loop() -> ShallowProg:
    return _wrap(A.CLoop())


def program(main, **defs) -> A.Program:
    """``defs`` maps a function name to ``(params, body)``."""
    functions = {n: A.FunDef(tuple(map(_ident, params)), cmd(body))
                 for n, (params, body) in defs.items()}
    return A.Program(functions, cmd(main))


# -- list reversal -----------------------------------------------------------


def deref_next() -> ShallowProg:
    """Load the ``next`` field of the node held in ``node``."""
    return bind("ptr", read_var("node"),
                bind("val", read_ptr(shift(fvar("ptr"), 1)),
                     ret(fvar("val"))))


def reverse_cond() -> ShallowProg:
    return bind("curr", read_var("node"),
                ret(not_(eq(fvar("curr"), null))))


def reverse_program() -> ShallowProg:
    """In-place reversal of the list whose head is the temporary ``ptr``.

    Nodes are two cells: the value at offset 0, the next pointer at 1.
    Returns the new head.
    """
    helper_next = deref_next()
    cond = reverse_cond()
    body = bind("curr", read_var("node"),
                bind("next", helper_next,
                     bind("prev", read_var("new_next"),
                          seq(write_ptr(shift(fvar("curr"), 1), fvar("prev")),
                              write_var("node", fvar("next")),
                              write_var("new_next", fvar("curr"))))))
    return var_("node", ret(fvar("ptr")),
                var_("new_next", ret(null),
                     seq(while_(cond, body),
                         read_var("new_next"))))


def build_list(values, head: str, rest) -> ShallowProg:
    """Allocate a list holding ``values``, bind its head to ``head``, run ``rest``."""
    values = list(values)
    if not values:
        return bind(head, ret(null), rest)
    names = [f"{head}{i}" for i in range(len(values))]
    out = bind(head, ret(fvar(names[0])), rest)
    for i in range(len(values)):
        nxt = fvar(names[i + 1]) if i + 1 < len(values) else null
        out = bind(names[i], alloc(2, nat(values[i])),
                   seq(write_ptr(shift(fvar(names[i]), 1), nxt), out))
    return out


def reverse_list_program(values) -> A.Program:
    """``reverse`` as a function, called from a main that builds the list."""
    return program(build_list(values, "lst", call("reverse", fvar("lst"))),
                   reverse=(("ptr",), reverse_program()))
