"""Fueled denotational semantics.

A denotation is a function ``(State, Fuel) -> Approx``.  The monad carries
state, failure (``Failed``) and non-termination (``BOTTOM``).  A ``while``
is the least fixed point of :func:`while_f`; it is approximated from below
by giving the run a budget of loop unfoldings.  Each time a loop head is
entered one unit is spent, and an empty budget yields ``BOTTOM``.  Raising
the budget walks up the Kleene chain ``BOTTOM, F(BOTTOM), F(F(BOTTOM)), ...``.
"""

from __future__ import annotations

from typing import Callable

from . import ast as A
from .state import (
    BOTTOM, UNIT, Approx, Bool, Done, Failed, Fault, Nat, Ptr, State, Store,
    heap_alloc, heap_free, heap_load, heap_store, ptr_shift, wrap,
)

NON_BOOL_COND = "while condition is not a boolean"


class Fuel:
    """Global budget of loop unfoldings shared by every loop of a run.

    ``writes`` optionally collects every heap cell written, for callers that
    need a write log (the frame-rule guard).
    """

    def __init__(self, budget: int, log_writes: bool = False):
        if budget < 0:
            raise ValueError("fuel must be non-negative")
        self.remaining = budget
        self.used = 0
        self.writes: set | None = set() if log_writes else None

    def take(self) -> bool:
        if self.remaining == 0:
            return False
        self.remaining -= 1
        self.used += 1
        return True


Denotation = Callable[[State, Fuel], Approx]


# -- expressions -------------------------------------------------------------


def _type_error(op, *vals):
    return Fault(f"type error: {op} applied to " + ", ".join(map(str, vals)))


def eval_expr(e, s: State):
    """Evaluate a pure expression.  Raises :class:`Fault` on error."""
    if isinstance(e, A.ENat):
        return Nat(e.n)
    if isinstance(e, A.EFVar):
        try:
            return s.env[e.name]
        except KeyError:
            raise Fault(f"unbound temporary {e.name!r}") from None
    if isinstance(e, A.EBin):
        a = eval_expr(e.left, s)
        b = eval_expr(e.right, s)
        return binop(e.op, a, b)
    if isinstance(e, A.EBool):
        return Bool(e.b)
    if isinstance(e, A.EUnit):
        return UNIT
    if isinstance(e, A.ENull):
        return Ptr(0, 0)
    if isinstance(e, A.ENot):
        v = eval_expr(e.e, s)
        if not isinstance(v, Bool):
            raise _type_error("not", v)
        return Bool(not v.b)
    if isinstance(e, A.EPtrShiftFw):
        p = eval_expr(e.ptr, s)
        k = eval_expr(e.by, s)
        if not isinstance(k, Nat):
            raise _type_error("ptr-shift", p, k)
        return ptr_shift(s.heap, p, k.n)
    raise TypeError(f"not an expression: {e!r}")


def binop(op: str, a, b):
    if op in ("add", "sub", "lt"):
        if not (isinstance(a, Nat) and isinstance(b, Nat)):
            raise _type_error(op, a, b)
        if op == "add":
            return wrap(a.n + b.n)
        if op == "sub":
            return Nat(max(a.n - b.n, 0))
        return Bool(a.n < b.n)
    if op in ("and", "or"):
        if not (isinstance(a, Bool) and isinstance(b, Bool)):
            raise _type_error(op, a, b)
        return Bool(a.b and b.b) if op == "and" else Bool(a.b or b.b)
    if op in ("eq", "neq"):
        if type(a) is not type(b):
            raise _type_error(op, a, b)
        same = a == b
        return Bool(same if op == "eq" else not same)
    raise ValueError(op)


# -- monad -------------------------------------------------------------------


def ret(v) -> Denotation:
    return lambda s, fuel: Done(v, s)


def bind(m: Denotation, k: Callable[..., Denotation]) -> Denotation:
    def run(s, fuel):
        r = m(s, fuel)
        if not isinstance(r, Done):
            return r
        return k(r.value)(r.state, fuel)
    return run


def fail(reason: str = "fail") -> Denotation:
    return lambda s, fuel: Failed(reason)


def bottom(s, fuel) -> Approx:
    return BOTTOM


def while_f(cond: Denotation, w: Denotation, body: Denotation) -> Denotation:
    """One unfolding: if ``cond`` then ``body ;; w`` else ``ret unit``."""
    def run(s, fuel):
        r = cond(s, fuel)
        if not isinstance(r, Done):
            return r
        if not isinstance(r.value, Bool):
            return Failed(NON_BOOL_COND)
        if not r.value.b:
            return Done(UNIT, r.state)
        r2 = body(r.state, fuel)
        if not isinstance(r2, Done):
            return r2
        return w(r2.state, fuel)
    return run


def kleene_iterate(cond: Denotation, body: Denotation, n: int) -> Denotation:
    """The n-th Kleene approximant ``while_f^n(bottom)``, independent of fuel."""
    w: Denotation = bottom
    for _ in range(n):
        w = while_f(cond, w, body)
    return w


def fix_while(cond: Denotation, body: Denotation) -> Denotation:
    """Fueled least fixed point of ``while_f``, spending one unit per head."""
    def run(s, fuel):
        while True:
            if not fuel.take():
                return BOTTOM
            r = cond(s, fuel)
            if not isinstance(r, Done):
                return r
            if not isinstance(r.value, Bool):
                return Failed(NON_BOOL_COND)
            if not r.value.b:
                return Done(UNIT, r.state)
            r = body(r.state, fuel)
            if not isinstance(r, Done):
                return r
            s = r.state
    return run


# -- commands ----------------------------------------------------------------


def _atomic(c, s: State, writes=None):
    """Leaf commands shared with the operational machine: ``(value, state)``."""
    if isinstance(c, A.CRet):
        return eval_expr(c.e, s), s
    if isinstance(c, A.CReadVar):
        return s.store.lookup(c.name), s
    if isinstance(c, A.CWriteVar):
        v = eval_expr(c.e, s)
        return UNIT, s.with_store(s.store.write(c.name, v))
    if isinstance(c, A.CReadPtr):
        return heap_load(s.heap, eval_expr(c.ptr, s)), s
    if isinstance(c, A.CWritePtr):
        p = eval_expr(c.ptr, s)
        v = eval_expr(c.e, s)
        heap = heap_store(s.heap, p, v)
        if writes is not None:
            writes.add((p.block, p.offset))
        return UNIT, s.with_heap(heap)
    if isinstance(c, A.CAlloc):
        v = eval_expr(c.init, s)
        heap, p = heap_alloc(s.heap, c.n, v)
        return p, s.with_heap(heap)
    if isinstance(c, A.CFree):
        p = eval_expr(c.ptr, s)
        heap = heap_free(s.heap, p)
        if writes is not None:
            writes.update(k for k in s.heap.cells if k[0] == p.block)
        return UNIT, s.with_heap(heap)
    raise TypeError(c)


ATOMIC = (A.CRet, A.CReadVar, A.CWriteVar, A.CReadPtr, A.CWritePtr, A.CAlloc, A.CFree)


def cond_value(e, s: State) -> bool:
    v = eval_expr(e, s)
    if not isinstance(v, Bool):
        raise Fault(f"if condition is not a boolean: {v}")
    return v.b


def enter_call(prog: A.Program, c: A.CCall, s: State) -> tuple[A.FunDef, State]:
    """Callee state: caller's heap, parameters as temporaries, empty store."""
    f = prog.functions.get(c.fn)
    if f is None:
        raise Fault(f"call to unknown function {c.fn!r}")
    if len(f.params) != len(c.args):
        raise Fault(f"arity mismatch calling {c.fn!r}")
    args = [eval_expr(e, s) for e in c.args]
    return f, State(Store(), s.heap, dict(zip(f.params, args)))


class _Compiler:
    def __init__(self, prog: A.Program):
        self.prog = prog
        self.cache: dict[int, Denotation] = {}
        self.funcs: dict[str, Denotation] = {}

    def function(self, name: str) -> Denotation:
        d = self.funcs.get(name)
        if d is None:
            d = self.funcs[name] = self.cmd(self.prog.functions[name].body)
        return d

    def cmd(self, c) -> Denotation:
        if isinstance(c, ATOMIC):
            def run(s, fuel, c=c):
                try:
                    v, s2 = _atomic(c, s, fuel.writes)
                except Fault as exc:
                    return Failed(str(exc))
                return Done(v, s2)
            return run

        if isinstance(c, A.CBind):
            first, rest, x = self.cmd(c.first), self.cmd(c.rest), c.name

            def run(s, fuel):
                r = first(s, fuel)
                if not isinstance(r, Done):
                    return r
                r2 = rest(r.state.bind(x, r.value), fuel)
                if not isinstance(r2, Done):
                    return r2
                return Done(r2.value, r2.state.with_env(s.env))
            return run

        if isinstance(c, A.CSeq):
            first, rest = self.cmd(c.first), self.cmd(c.rest)

            def run(s, fuel):
                r = first(s, fuel)
                if not isinstance(r, Done):
                    return r
                return rest(r.state, fuel)
            return run

        if isinstance(c, A.CIf):
            then, orelse, e = self.cmd(c.then), self.cmd(c.orelse), c.cond

            def run(s, fuel):
                try:
                    b = cond_value(e, s)
                except Fault as exc:
                    return Failed(str(exc))
                return then(s, fuel) if b else orelse(s, fuel)
            return run

        if isinstance(c, A.CWhile):
            return fix_while(self.cmd(c.cond), self.cmd(c.body))

        if isinstance(c, A.CVar):
            init, body, x = self.cmd(c.init), self.cmd(c.body), c.name

            def run(s, fuel):
                r = init(s, fuel)
                if not isinstance(r, Done):
                    return r
                s1 = r.state
                r2 = body(s1.with_store(s1.store.push(x, r.value)), fuel)
                if not isinstance(r2, Done):
                    return r2
                s2 = r2.state
                return Done(r2.value, s2.with_store(s2.store.pop()))
            return run

        if isinstance(c, A.CCall):
            def run(s, fuel, c=c):
                try:
                    _, callee = enter_call(self.prog, c, s)
                except Fault as exc:
                    return Failed(str(exc))
                r = self.function(c.fn)(callee, fuel)
                if not isinstance(r, Done):
                    return r
                return Done(r.value, State(s.store, r.state.heap, s.env))
            return run

        if isinstance(c, A.CFail):
            return fail()
        if isinstance(c, A.CLoop):
            return bottom
        raise TypeError(f"not a command: {c!r}")


def denote(c, prog: A.Program | None = None) -> Denotation:
    """Compile a command to its denotation."""
    return _Compiler(prog or A.Program()).cmd(c)


def denote_cmd(c, prog: A.Program | None, s: State, fuel: int) -> Approx:
    return denote(c, prog)(s, Fuel(fuel))


def denote_program(prog: A.Program, s: State | None = None, fuel: int = 1000) -> Approx:
    return denote_cmd(prog.main, prog, s or State(), fuel)


def fuel_needed(c, prog: A.Program | None, s: State, cap: int) -> int | None:
    """Least fuel giving a non-bottom outcome, or None if ``cap`` is not enough."""
    d = denote(c, prog)
    f = Fuel(cap)
    if d(s, f) is BOTTOM:
        return None
    # the outcome is reached exactly when every unfolding it used was granted
    return f.used


def kleene_chain(c, prog: A.Program | None, s: State, max_fuel: int) -> list[Approx]:
    d = denote(c, prog)
    return [d(s, Fuel(n)) for n in range(max_fuel + 1)]


def unfold_while(c: A.CWhile, fresh: str = "%cond") -> A.Cmd:
    """One syntactic unfolding of a loop, the ``If``-expansion of ``while_f``."""
    return A.CBind(fresh, c.cond,
                   A.CIf(A.EFVar(fresh), A.CSeq(c.body, c), A.CRet(A.EUnit())))
