"""Cminor-lite: untyped structured statements over block memory.

Each function declares a stack size in words; a stack block of that size is
allocated on entry (only when non-zero) and freed on return, and locals are
loads and stores at constant offsets from the stack pointer.  Loops are
infinite ``loop`` statements left through ``exit n``, which leaves ``n + 1``
enclosing ``block`` statements.  Allocation, deallocation and abort are
built-in statements standing in for external calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import ir as I
from .sexpr import name as _quote
from .state import (
    BOTTOM, Approx, Done, Failed, Fault, Heap, Ptr, heap_alloc, heap_free,
    heap_load, heap_store,
)

# -- syntax ------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    w: int


@dataclass(frozen=True)
class Temp:
    id: int


@dataclass(frozen=True)
class AddrStack:
    ofs: int


@dataclass(frozen=True)
class Load:
    addr: object


@dataclass(frozen=True)
class Unop:
    op: str
    e: object


@dataclass(frozen=True)
class Binop:
    op: str
    a: object
    b: object


CmExpr = Union[Const, Temp, AddrStack, Load, Unop, Binop]


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Assign:
    temp: int
    e: CmExpr


@dataclass(frozen=True)
class Store:
    addr: CmExpr
    e: CmExpr


@dataclass(frozen=True)
class Call:
    dest: int
    fn: int
    args: tuple


@dataclass(frozen=True)
class Alloc:
    dest: int
    n: int
    e: CmExpr


@dataclass(frozen=True)
class Free:
    addr: CmExpr


@dataclass(frozen=True)
class Seq:
    first: object
    rest: object


@dataclass(frozen=True)
class If:
    cond: CmExpr
    then: object
    orelse: object


@dataclass(frozen=True)
class Loop:
    body: object


@dataclass(frozen=True)
class Block:
    body: object


@dataclass(frozen=True)
class Exit:
    n: int = 0


@dataclass(frozen=True)
class Return:
    e: CmExpr


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class CmFunction:
    id: int
    name: str
    params: tuple
    temps: tuple
    stack_size: int
    body: object


# -- lowering ----------------------------------------------------------------


def _seq(*stmts):
    stmts = [s for s in stmts if not isinstance(s, Skip)]
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


class _Lowering:
    def __init__(self, fn: I.IrFunction, fresh):
        self.fn = fn
        self.fresh = fresh
        self.temps = list(fn.temps)

    def temp(self) -> int:
        t = self.fresh()
        self.temps.append(t)
        return t

    def slot(self, lid) -> CmExpr:
        return AddrStack(self.fn.locals.index(lid))

    def expr(self, e) -> CmExpr:
        if isinstance(e, I.IConst):
            return Const(e.w)
        if isinstance(e, I.ITemp):
            return Temp(e.id)
        if isinstance(e, I.IUnop):
            return Unop(e.op, self.expr(e.e))
        if isinstance(e, I.IShift):
            return Binop("addp", self.expr(e.ptr), self.expr(e.by))
        if isinstance(e, I.IBinop):
            a, b = self.expr(e.a), self.expr(e.b)
            if e.op == "subsat":
                # truncated subtraction: (a - b) * (b <= a)
                return Binop("mul", Binop("sub", a, b), Binop("leu", b, a))
            return Binop(e.op, a, b)
        raise TypeError(e)

    def cmd(self, c, dest: int):
        """Statement computing ``c`` and leaving its value in temp ``dest``."""
        if isinstance(c, I.IRet):
            return Assign(dest, self.expr(c.e))
        if isinstance(c, I.IBind):
            return _seq(self.cmd(c.first, c.temp), self.cmd(c.rest, dest))
        if isinstance(c, I.ISeq):
            return _seq(self.cmd(c.first, self.temp()), self.cmd(c.rest, dest))
        if isinstance(c, I.IIf):
            return If(self.expr(c.cond), self.cmd(c.then, dest), self.cmd(c.orelse, dest))
        if isinstance(c, I.IWhile):
            ct = self.temp()
            body = _seq(self.cmd(c.cond, ct),
                        If(Temp(ct), Skip(), Exit(0)),
                        self.cmd(c.body, self.temp()))
            return _seq(Block(Loop(body)), Assign(dest, Const(0)))
        if isinstance(c, I.IVar):
            t = self.temp()
            return _seq(self.cmd(c.init, t), Store(self.slot(c.local), Temp(t)),
                        self.cmd(c.body, dest))
        if isinstance(c, I.IReadVar):
            return Assign(dest, Load(self.slot(c.local)))
        if isinstance(c, I.IWriteVar):
            return _seq(Store(self.slot(c.local), self.expr(c.e)), Assign(dest, Const(0)))
        if isinstance(c, I.ICall):
            return Call(dest, c.fn, tuple(self.expr(a) for a in c.args))
        if isinstance(c, I.IAlloc):
            return Alloc(dest, c.n, self.expr(c.e))
        if isinstance(c, I.IReadPtr):
            return Assign(dest, Load(self.expr(c.ptr)))
        if isinstance(c, I.IWritePtr):
            return _seq(Store(self.expr(c.ptr), self.expr(c.e)), Assign(dest, Const(0)))
        if isinstance(c, I.IFree):
            return _seq(Free(self.expr(c.ptr)), Assign(dest, Const(0)))
        if isinstance(c, I.IFail):
            return Abort()
        if isinstance(c, I.ILoop):
            return Loop(Skip())
        raise TypeError(c)


def lower_to_cminor(p: I.IrProgram) -> dict[int, CmFunction]:
    """One Cminor-lite function per IR function; fresh temps follow the IR ids."""
    counter = [p.max_id()]

    def fresh():
        counter[0] += 1
        return counter[0]

    out = {}
    for fid in sorted(p.functions):
        fn = p.functions[fid]
        lw = _Lowering(fn, fresh)
        rt = lw.temp()
        body = _seq(lw.cmd(fn.body, rt), Return(Temp(rt)))
        out[fid] = CmFunction(fid, fn.name, fn.params, tuple(lw.temps), len(fn.locals), body)
    return out


def exits_enclosed(s, depth: int = 0) -> bool:
    """Every ``exit n`` sits inside at least ``n + 1`` blocks."""
    if isinstance(s, Exit):
        return s.n < depth
    if isinstance(s, Block):
        return exits_enclosed(s.body, depth + 1)
    if isinstance(s, Loop):
        return exits_enclosed(s.body, depth)
    if isinstance(s, Seq):
        return exits_enclosed(s.first, depth) and exits_enclosed(s.rest, depth)
    if isinstance(s, If):
        return exits_enclosed(s.then, depth) and exits_enclosed(s.orelse, depth)
    return True


def locals_at_constant_offsets(fn: CmFunction) -> bool:
    """Stack addresses only appear as constants inside the declared frame."""
    ok = True

    def ex(e):
        nonlocal ok
        if isinstance(e, AddrStack):
            ok = ok and 0 <= e.ofs < fn.stack_size
        elif isinstance(e, Load):
            ex(e.addr)
        elif isinstance(e, Unop):
            ex(e.e)
        elif isinstance(e, Binop):
            ex(e.a)
            ex(e.b)

    def st(s):
        if isinstance(s, (Assign,)):
            ex(s.e)
        elif isinstance(s, Store):
            ex(s.addr)
            ex(s.e)
        elif isinstance(s, Call):
            for a in s.args:
                ex(a)
        elif isinstance(s, Alloc):
            ex(s.e)
        elif isinstance(s, (Free,)):
            ex(s.addr)
        elif isinstance(s, Return):
            ex(s.e)
        elif isinstance(s, Seq):
            st(s.first)
            st(s.rest)
        elif isinstance(s, If):
            ex(s.cond)
            st(s.then)
            st(s.orelse)
        elif isinstance(s, (Loop, Block)):
            st(s.body)

    st(fn.body)
    return ok


# -- interpreter -------------------------------------------------------------


@dataclass
class CmState:
    temps: dict = field(default_factory=dict)
    memory: Heap = field(default_factory=Heap)
    stack_blocks: frozenset = frozenset()
    entries: int = 0
    stacked_entries: int = 0                    # entries of functions with a stack
    stack_allocs: int = 0
    stack_frees: int = 0
    steps: int = 0


class _OutOfSteps(Exception):
    pass


class _Exit(Exception):
    def __init__(self, n):
        self.n = n


class _Return(Exception):
    def __init__(self, v):
        self.v = v


def _binop(mem: Heap, op: str, a, b):
    # "addp" is pointer arithmetic: bounds checked against the block
    if op == "addp":
        return I.word_shift(mem, a, b)
    return I.word_binop(op, a, b)


class _Run:
    def __init__(self, fns: dict, memory: Heap, budget: int):
        self.fns = fns
        self.st = CmState(memory=memory)
        self.budget = budget
        self.stack_blocks: set[int] = set()

    def tick(self):
        if self.st.steps >= self.budget:
            raise _OutOfSteps
        self.st.steps += 1

    def expr(self, e, temps, sp):
        if isinstance(e, Const):
            return e.w
        if isinstance(e, Temp):
            return temps.get(e.id, 0)
        if isinstance(e, Binop):
            return _binop(self.st.memory, e.op, self.expr(e.a, temps, sp), self.expr(e.b, temps, sp))
        if isinstance(e, Load):
            return heap_load(self.st.memory, I.word_pointer(self.expr(e.addr, temps, sp)))
        if isinstance(e, AddrStack):
            if sp is None:
                raise Fault("stack address in a function without a stack")
            return Ptr(sp, e.ofs)
        if isinstance(e, Unop):
            return int(not I.word_truth(self.expr(e.e, temps, sp)))
        raise TypeError(e)

    def call(self, fn: CmFunction, args):
        self.st.entries += 1
        temps = dict(zip(fn.params, args))
        sp = None
        if fn.stack_size > 0:
            self.st.stacked_entries += 1
            self.st.memory, p = heap_alloc(self.st.memory, fn.stack_size, 0)
            sp = p.block
            self.stack_blocks.add(sp)
            self.st.stack_allocs += 1
        try:
            self.stmt(fn.body, temps, sp)
            v = 0
        except _Return as r:
            v = r.v
        except _Exit:
            raise Fault("exit outside of any block")
        if sp is not None:
            self.st.memory = heap_free(self.st.memory, Ptr(sp, 0))
            self.st.stack_frees += 1
        return v

    def stmt(self, s, temps, sp):
        self.tick()
        if isinstance(s, Assign):
            temps[s.temp] = self.expr(s.e, temps, sp)
        elif isinstance(s, Seq):
            self.stmt(s.first, temps, sp)
            self.stmt(s.rest, temps, sp)
        elif isinstance(s, Store):
            addr = I.word_pointer(self.expr(s.addr, temps, sp))
            v = self.expr(s.e, temps, sp)
            self.st.memory = heap_store(self.st.memory, addr, v)
        elif isinstance(s, If):
            branch = s.then if I.word_truth(self.expr(s.cond, temps, sp)) else s.orelse
            self.stmt(branch, temps, sp)
        elif isinstance(s, Loop):
            while True:
                self.stmt(s.body, temps, sp)
                self.tick()
        elif isinstance(s, Block):
            try:
                self.stmt(s.body, temps, sp)
            except _Exit as e:
                if e.n > 0:
                    raise _Exit(e.n - 1) from None
        elif isinstance(s, Exit):
            raise _Exit(s.n)
        elif isinstance(s, Call):
            args = [self.expr(a, temps, sp) for a in s.args]
            temps[s.dest] = self.call(self.fns[s.fn], args)
        elif isinstance(s, Alloc):
            v = self.expr(s.e, temps, sp)
            self.st.memory, p = heap_alloc(self.st.memory, s.n, v)
            temps[s.dest] = p
        elif isinstance(s, Free):
            self.st.memory = heap_free(self.st.memory, I.word_pointer(self.expr(s.addr, temps, sp)))
        elif isinstance(s, Return):
            raise _Return(self.expr(s.e, temps, sp))
        elif isinstance(s, Abort):
            raise Fault("fail")
        elif isinstance(s, Skip):
            pass
        else:
            raise TypeError(s)


def run_cminor(fns: dict, entry: int, inputs: Heap | None = None,
               step_budget: int = 100_000) -> Approx:
    r = _Run(fns, inputs if inputs is not None else Heap(), step_budget)
    try:
        v = r.call(fns[entry], [])
    except _OutOfSteps:
        return BOTTOM
    except Fault as exc:
        return Failed(str(exc))
    r.st.stack_blocks = frozenset(r.stack_blocks)
    return Done(v, r.st)


# -- textual dump ------------------------------------------------------------


def show_expr(e) -> str:
    if isinstance(e, Const):
        return str(e.w)
    if isinstance(e, Temp):
        return f"t{e.id}"
    if isinstance(e, AddrStack):
        return f"(stack {e.ofs})"
    if isinstance(e, Load):
        return f"(load {show_expr(e.addr)})"
    if isinstance(e, Unop):
        return f"({e.op} {show_expr(e.e)})"
    if isinstance(e, Binop):
        return f"({e.op} {show_expr(e.a)} {show_expr(e.b)})"
    raise TypeError(e)


def _show(s, ind, out):
    pad = "  " * ind
    if isinstance(s, Seq):
        _show(s.first, ind, out)
        _show(s.rest, ind, out)
    elif isinstance(s, Assign):
        out.append(f"{pad}t{s.temp} = {show_expr(s.e)};")
    elif isinstance(s, Store):
        out.append(f"{pad}store {show_expr(s.addr)} = {show_expr(s.e)};")
    elif isinstance(s, Call):
        args = ", ".join(map(show_expr, s.args))
        out.append(f"{pad}t{s.dest} = f{s.fn}({args});")
    elif isinstance(s, Alloc):
        out.append(f"{pad}t{s.dest} = alloc({s.n}, {show_expr(s.e)});")
    elif isinstance(s, Free):
        out.append(f"{pad}free({show_expr(s.addr)});")
    elif isinstance(s, If):
        out.append(f"{pad}if {show_expr(s.cond)} {{")
        _show(s.then, ind + 1, out)
        out.append(f"{pad}}} else {{")
        _show(s.orelse, ind + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, Loop):
        out.append(f"{pad}loop {{")
        _show(s.body, ind + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, Block):
        out.append(f"{pad}block {{")
        _show(s.body, ind + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, Exit):
        out.append(f"{pad}exit {s.n};")
    elif isinstance(s, Return):
        out.append(f"{pad}return {show_expr(s.e)};")
    elif isinstance(s, Abort):
        out.append(f"{pad}abort;")
    elif isinstance(s, Skip):
        out.append(f"{pad}skip;")
    else:
        raise TypeError(s)


def dump_cminor(fns: dict, entry: int | None = None) -> str:
    out = []
    if entry is not None:
        out.append(f"entry f{entry}")
    for fid in sorted(fns):
        f = fns[fid]
        params = " ".join(f"t{t}" for t in f.params)
        out.append(f"function f{fid} {_quote(f.name)} params({params}) stack_size {f.stack_size}")
        _show(f.body, 1, out)
    return "\n".join(out) + "\n"
