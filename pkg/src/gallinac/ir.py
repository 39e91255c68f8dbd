"""Numeric intermediate representation.

Names become positive integers.  ``bind`` names and parameters become
temporaries; ``var`` names become word slots in a frame block allocated at
function entry, so every local access is a memory access.  Values are
untyped: booleans and unit are words, null is the word 0, and pointers keep
their block provenance.

Shadowing is resolved during lowering: a name gets one id per shadowing
depth, so an inner binding never clobbers the outer one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import ast as A
from .sexpr import name as _quote
from .state import (
    BOTTOM, WORD_MOD, Approx, Bool, Done, Failed, Fault, Heap, Nat, Ptr,
    State, Unit, heap_alloc, heap_free, heap_load, heap_store, ptr_shift,
)

# -- syntax ------------------------------------------------------------------


@dataclass(frozen=True)
class IConst:
    w: int


@dataclass(frozen=True)
class ITemp:
    id: int


@dataclass(frozen=True)
class IUnop:
    op: str
    e: object


@dataclass(frozen=True)
class IBinop:
    op: str
    a: object
    b: object


@dataclass(frozen=True)
class IShift:
    ptr: object
    by: object


IExpr = Union[IConst, ITemp, IUnop, IBinop, IShift]


@dataclass(frozen=True)
class IRet:
    e: IExpr


@dataclass(frozen=True)
class IBind:
    temp: int
    first: object
    rest: object


@dataclass(frozen=True)
class ISeq:
    first: object
    rest: object


@dataclass(frozen=True)
class ICall:
    fn: int
    args: tuple


@dataclass(frozen=True)
class IIf:
    cond: IExpr
    then: object
    orelse: object


@dataclass(frozen=True)
class IWhile:
    cond: object
    body: object


@dataclass(frozen=True)
class IVar:
    local: int
    init: object
    body: object


@dataclass(frozen=True)
class IReadVar:
    local: int


@dataclass(frozen=True)
class IWriteVar:
    local: int
    e: IExpr


@dataclass(frozen=True)
class IAlloc:
    n: int
    e: IExpr


@dataclass(frozen=True)
class IReadPtr:
    ptr: IExpr


@dataclass(frozen=True)
class IWritePtr:
    ptr: IExpr
    e: IExpr


@dataclass(frozen=True)
class IFree:
    ptr: IExpr


@dataclass(frozen=True)
class IFail:
    pass


@dataclass(frozen=True)
class ILoop:
    pass


@dataclass(frozen=True)
class IrFunction:
    id: int
    name: str
    params: tuple
    temps: tuple
    locals: tuple          # slot order: locals[i] lives at frame offset i
    body: object


@dataclass
class IrProgram:
    functions: dict        # id -> IrFunction
    main: int
    symbols: dict          # key -> id; keys are ("fun", name), ("entry", "main"),
                           # ("temp", name, depth), ("local", name, depth)

    @property
    def names(self) -> dict:
        return {v: k for k, v in self.symbols.items()}

    def max_id(self) -> int:
        return max(self.symbols.values(), default=0)


# -- lowering ----------------------------------------------------------------


class LoweringError(Exception):
    pass


_BINOPS = {"add": "add", "sub": "subsat", "eq": "eq", "neq": "ne",
           "and": "and", "or": "or", "lt": "ltu"}


class _Numbering:
    def __init__(self):
        self.symbols: dict = {}

    def id(self, key) -> int:
        if key not in self.symbols:
            self.symbols[key] = len(self.symbols) + 1
        return self.symbols[key]


class _FnLowering:
    def __init__(self, numbering: _Numbering, funcs: dict):
        self.num = numbering
        self.funcs = funcs
        self.temps: list[int] = []
        self.locals: list[int] = []
        self.local_keys: dict[int, tuple] = {}

    def _temp(self, name, depth):
        t = self.num.id(("temp", name, depth))
        if t not in self.temps:
            self.temps.append(t)
        return t

    def _local(self, name, depth):
        lid = self.num.id(("local", name, depth))
        if lid not in self.locals:
            self.locals.append(lid)
            self.local_keys[lid] = (name, depth)
        return lid

    def expr(self, e, tscope):
        if isinstance(e, A.EFVar):
            if e.name not in tscope:
                raise LoweringError(f"unbound temporary {e.name!r}")
            return ITemp(tscope[e.name][0])
        if isinstance(e, A.ENat):
            return IConst(e.n)
        if isinstance(e, A.EBool):
            return IConst(int(e.b))
        if isinstance(e, (A.EUnit, A.ENull)):
            return IConst(0)
        if isinstance(e, A.ENot):
            return IUnop("notbool", self.expr(e.e, tscope))
        if isinstance(e, A.EBin):
            return IBinop(_BINOPS[e.op], self.expr(e.left, tscope), self.expr(e.right, tscope))
        if isinstance(e, A.EPtrShiftFw):
            return IShift(self.expr(e.ptr, tscope), self.expr(e.by, tscope))
        raise TypeError(e)

    def cmd(self, c, ts, vs):
        """``ts``/``vs`` map a name to (id, depth) for temporaries/locals."""
        if isinstance(c, A.CRet):
            return IRet(self.expr(c.e, ts))
        if isinstance(c, A.CBind):
            first = self.cmd(c.first, ts, vs)
            depth = ts[c.name][1] + 1 if c.name in ts else 0
            t = self._temp(c.name, depth)
            return IBind(t, first, self.cmd(c.rest, {**ts, c.name: (t, depth)}, vs))
        if isinstance(c, A.CSeq):
            return ISeq(self.cmd(c.first, ts, vs), self.cmd(c.rest, ts, vs))
        if isinstance(c, A.CCall):
            if c.fn not in self.funcs:
                raise LoweringError(f"unknown function {c.fn!r}")
            return ICall(self.funcs[c.fn], tuple(self.expr(a, ts) for a in c.args))
        if isinstance(c, A.CIf):
            return IIf(self.expr(c.cond, ts), self.cmd(c.then, ts, vs), self.cmd(c.orelse, ts, vs))
        if isinstance(c, A.CWhile):
            return IWhile(self.cmd(c.cond, ts, vs), self.cmd(c.body, ts, vs))
        if isinstance(c, A.CVar):
            init = self.cmd(c.init, ts, vs)
            depth = vs[c.name][1] + 1 if c.name in vs else 0
            lid = self._local(c.name, depth)
            return IVar(lid, init, self.cmd(c.body, ts, {**vs, c.name: (lid, depth)}))
        if isinstance(c, (A.CReadVar, A.CWriteVar)):
            if c.name not in vs:
                raise LoweringError(f"unbound store variable {c.name!r}")
            lid = vs[c.name][0]
            if isinstance(c, A.CReadVar):
                return IReadVar(lid)
            return IWriteVar(lid, self.expr(c.e, ts))
        if isinstance(c, A.CAlloc):
            return IAlloc(c.n, self.expr(c.init, ts))
        if isinstance(c, A.CReadPtr):
            return IReadPtr(self.expr(c.ptr, ts))
        if isinstance(c, A.CWritePtr):
            return IWritePtr(self.expr(c.ptr, ts), self.expr(c.e, ts))
        if isinstance(c, A.CFree):
            return IFree(self.expr(c.ptr, ts))
        if isinstance(c, A.CFail):
            return IFail()
        if isinstance(c, A.CLoop):
            return ILoop()
        raise TypeError(c)


def lower_to_ir(p: A.Program) -> IrProgram:
    """Number every name and lower each function (and main) to IR."""
    diags = A.well_formed(p)
    if diags:
        raise LoweringError("ill-formed program: " + "; ".join(map(str, diags)))
    num = _Numbering()
    order = sorted(p.functions)
    funcs = {name: num.id(("fun", name)) for name in order}
    main_id = num.id(("entry", "main"))
    out = {}
    for name, fid, params, body in [(n, funcs[n], p.functions[n].params, p.functions[n].body)
                                    for n in order] + [("main", main_id, (), p.main)]:
        fl = _FnLowering(num, funcs)
        pids = tuple(fl._temp(x, 0) for x in params)
        ir_body = fl.cmd(body, {x: (t, 0) for x, t in zip(params, pids)}, {})
        out[fid] = IrFunction(fid, name, pids, tuple(fl.temps), tuple(fl.locals), ir_body)
    return IrProgram(out, main_id, num.symbols)


# -- values ------------------------------------------------------------------


def lower_value(v, m: dict | None = None):
    """Source value to word; pointers are renamed through block map ``m``."""
    if isinstance(v, Nat):
        return v.n
    if isinstance(v, Bool):
        return int(v.b)
    if isinstance(v, Unit):
        return 0
    if isinstance(v, Ptr):
        if v.is_null:
            return 0
        return Ptr(m[v.block] if m is not None else v.block, v.offset)
    raise TypeError(v)


def lower_heap(h: Heap) -> Heap:
    """Initial target memory for a source heap, keeping block ids."""
    return Heap({k: lower_value(v) for k, v in h.cells.items()}, h.blocks, h.next_block)


def value_related(v, w, m: dict) -> bool:
    if isinstance(v, Ptr) and not v.is_null:
        return isinstance(w, Ptr) and m.get(v.block) == w.block and w.offset == v.offset
    if isinstance(w, Ptr):
        return False
    return lower_value(v) == w


def word_truth(w) -> bool:
    return not (isinstance(w, int) and w == 0)


def word_binop(op: str, a, b):
    """Word-level operators shared by the untyped stages."""
    if op in ("eq", "ne"):
        same = a == b
        return int(same if op == "eq" else not same)
    if not (isinstance(a, int) and isinstance(b, int)):
        raise Fault(f"type error: {op} on {a}, {b}")
    if op == "add":
        return (a + b) % WORD_MOD
    if op == "sub":
        return (a - b) % WORD_MOD
    if op == "subsat":
        return max(a - b, 0)
    if op == "mul":
        return (a * b) % WORD_MOD
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "ltu":
        return int(a < b)
    if op == "leu":
        return int(a <= b)
    raise ValueError(op)


def word_shift(mem: Heap, p, k):
    if isinstance(p, int):
        raise Fault("pointer arithmetic on null" if p == 0 else f"pointer arithmetic on {p}")
    if not isinstance(k, int):
        raise Fault(f"type error: shift by {k}")
    return ptr_shift(mem, p, k)


def word_pointer(w):
    """Word used as an address: 0 is null."""
    if isinstance(w, int):
        return Ptr(0, 0) if w == 0 else w
    return w


# -- interpreter -------------------------------------------------------------


@dataclass
class IrState:
    temps: dict = field(default_factory=dict)
    memory: Heap = field(default_factory=Heap)
    frame: int | None = None                     # block of the active frame
    frame_blocks: frozenset = frozenset()        # every frame block ever allocated
    locals: dict = field(default_factory=dict)   # (name, depth) -> frame offset


class _Bottom(Exception):
    pass


class _Run:
    def __init__(self, p: IrProgram, memory: Heap, fuel: int):
        self.p = p
        self.mem = memory
        self.fuel = fuel
        self.frame_blocks: set[int] = set()
        self.names = p.names

    def expr(self, e, temps):
        if isinstance(e, IConst):
            return e.w
        if isinstance(e, ITemp):
            try:
                return temps[e.id]
            except KeyError:
                raise Fault(f"unset temporary t{e.id}") from None
        if isinstance(e, IBinop):
            return word_binop(e.op, self.expr(e.a, temps), self.expr(e.b, temps))
        if isinstance(e, IUnop):
            return int(not word_truth(self.expr(e.e, temps)))
        if isinstance(e, IShift):
            return word_shift(self.mem, self.expr(e.ptr, temps), self.expr(e.by, temps))
        raise TypeError(e)

    def call(self, fn: IrFunction, args) -> object:
        temps = dict(zip(fn.params, args))
        frame = None
        if fn.locals:
            self.mem, fp = heap_alloc(self.mem, len(fn.locals), 0)
            frame = fp.block
            self.frame_blocks.add(frame)
        v = self.cmd(fn.body, temps, frame, fn)
        if frame is not None:
            self.mem = heap_free(self.mem, Ptr(frame, 0))
        return v

    def _slot(self, fn, frame, lid) -> Ptr:
        return Ptr(frame, fn.locals.index(lid))

    def cmd(self, c, temps, frame, fn):
        if isinstance(c, IRet):
            return self.expr(c.e, temps)
        if isinstance(c, IBind):
            temps[c.temp] = self.cmd(c.first, temps, frame, fn)
            return self.cmd(c.rest, temps, frame, fn)
        if isinstance(c, ISeq):
            self.cmd(c.first, temps, frame, fn)
            return self.cmd(c.rest, temps, frame, fn)
        if isinstance(c, IIf):
            branch = c.then if word_truth(self.expr(c.cond, temps)) else c.orelse
            return self.cmd(branch, temps, frame, fn)
        if isinstance(c, IWhile):
            while True:
                if self.fuel == 0:
                    raise _Bottom
                self.fuel -= 1
                if not word_truth(self.cmd(c.cond, temps, frame, fn)):
                    return 0
                self.cmd(c.body, temps, frame, fn)
        if isinstance(c, IVar):
            v = self.cmd(c.init, temps, frame, fn)
            self.mem = heap_store(self.mem, self._slot(fn, frame, c.local), v)
            return self.cmd(c.body, temps, frame, fn)
        if isinstance(c, IReadVar):
            return heap_load(self.mem, self._slot(fn, frame, c.local))
        if isinstance(c, IWriteVar):
            v = self.expr(c.e, temps)
            self.mem = heap_store(self.mem, self._slot(fn, frame, c.local), v)
            return 0
        if isinstance(c, ICall):
            args = [self.expr(a, temps) for a in c.args]
            return self.call(self.p.functions[c.fn], args)
        if isinstance(c, IAlloc):
            v = self.expr(c.e, temps)
            self.mem, p = heap_alloc(self.mem, c.n, v)
            return p
        if isinstance(c, IReadPtr):
            return heap_load(self.mem, word_pointer(self.expr(c.ptr, temps)))
        if isinstance(c, IWritePtr):
            p = word_pointer(self.expr(c.ptr, temps))
            v = self.expr(c.e, temps)
            self.mem = heap_store(self.mem, p, v)
            return 0
        if isinstance(c, IFree):
            self.mem = heap_free(self.mem, word_pointer(self.expr(c.ptr, temps)))
            return 0
        if isinstance(c, IFail):
            raise Fault("fail")
        if isinstance(c, ILoop):
            raise _Bottom
        raise TypeError(c)


def run_ir(p: IrProgram, inputs: Heap | None = None, fuel: int = 1000) -> Approx:
    """Run the entry function; ``inputs`` is the initial (lowered) memory."""
    r = _Run(p, inputs if inputs is not None else Heap(), fuel)
    try:
        v = r.call(p.functions[p.main], [])
    except _Bottom:
        return BOTTOM
    except Fault as exc:
        return Failed(str(exc))
    return Done(v, IrState({}, r.mem, None, frozenset(r.frame_blocks), {}))


# -- state relation ----------------------------------------------------------


def block_map(src: Heap, tgt: Heap, frame_blocks=frozenset()) -> dict | None:
    """Pair source blocks with target non-frame blocks in allocation order."""
    sb = sorted(src.blocks)
    tb = sorted(b for b in tgt.blocks if b not in frame_blocks)
    if len(sb) != len(tb):
        return None
    return dict(zip(sb, tb))


def _shadow_depths(store) -> list[tuple[str, int, object]]:
    seen: dict[str, int] = {}
    out = []
    for name, v in store.bindings:
        d = seen.get(name, 0)
        seen[name] = d + 1
        out.append((name, d, v))
    return out


def relate_states(src: State, tgt: IrState, m: dict) -> bool:
    """Source state and target state agree up to the block renaming ``m``."""
    if m is None or len(set(m.values())) != len(m):
        return False
    frames = tgt.frame_blocks | ({tgt.frame} if tgt.frame is not None else set())
    if any(b in frames for b in m.values()):
        return False
    for b, info in src.heap.blocks.items():
        tinfo = tgt.memory.blocks.get(m.get(b))
        if tinfo is None or tinfo != info:
            return False
    for (b, i), v in src.heap.cells.items():
        w = tgt.memory.cells.get((m[b], i), _MISSING)
        if w is _MISSING or not value_related(v, w, m):
            return False
    extra = sum(1 for (b, _) in tgt.memory.cells if b not in frames)
    if extra != len(src.heap.cells):
        return False
    for name, depth, v in _shadow_depths(src.store):
        off = tgt.locals.get((name, depth))
        if off is None or tgt.frame is None:
            return False
        w = tgt.memory.cells.get((tgt.frame, off), _MISSING)
        if w is _MISSING or not value_related(v, w, m):
            return False
    return True


_MISSING = object()


# -- textual dump ------------------------------------------------------------


def show_iexpr(e) -> str:
    if isinstance(e, IConst):
        return str(e.w)
    if isinstance(e, ITemp):
        return f"t{e.id}"
    if isinstance(e, IUnop):
        return f"({e.op} {show_iexpr(e.e)})"
    if isinstance(e, IBinop):
        return f"({e.op} {show_iexpr(e.a)} {show_iexpr(e.b)})"
    if isinstance(e, IShift):
        return f"(shift {show_iexpr(e.ptr)} {show_iexpr(e.by)})"
    raise TypeError(e)


def _show_cmd(c, ind: int, out: list):
    pad = "  " * ind
    if isinstance(c, IRet):
        out.append(f"{pad}ret {show_iexpr(c.e)}")
    elif isinstance(c, IBind):
        out.append(f"{pad}bind t{c.temp}")
        _show_cmd(c.first, ind + 1, out)
        _show_cmd(c.rest, ind + 1, out)
    elif isinstance(c, ISeq):
        out.append(f"{pad}seq")
        _show_cmd(c.first, ind + 1, out)
        _show_cmd(c.rest, ind + 1, out)
    elif isinstance(c, ICall):
        out.append(f"{pad}call f{c.fn}" + "".join(" " + show_iexpr(a) for a in c.args))
    elif isinstance(c, IIf):
        out.append(f"{pad}if {show_iexpr(c.cond)}")
        _show_cmd(c.then, ind + 1, out)
        _show_cmd(c.orelse, ind + 1, out)
    elif isinstance(c, IWhile):
        out.append(f"{pad}while")
        _show_cmd(c.cond, ind + 1, out)
        _show_cmd(c.body, ind + 1, out)
    elif isinstance(c, IVar):
        out.append(f"{pad}var l{c.local}")
        _show_cmd(c.init, ind + 1, out)
        _show_cmd(c.body, ind + 1, out)
    elif isinstance(c, IReadVar):
        out.append(f"{pad}read-var l{c.local}")
    elif isinstance(c, IWriteVar):
        out.append(f"{pad}write-var l{c.local} {show_iexpr(c.e)}")
    elif isinstance(c, IAlloc):
        out.append(f"{pad}alloc {c.n} {show_iexpr(c.e)}")
    elif isinstance(c, IReadPtr):
        out.append(f"{pad}read-ptr {show_iexpr(c.ptr)}")
    elif isinstance(c, IWritePtr):
        out.append(f"{pad}write-ptr {show_iexpr(c.ptr)} {show_iexpr(c.e)}")
    elif isinstance(c, IFree):
        out.append(f"{pad}free {show_iexpr(c.ptr)}")
    elif isinstance(c, IFail):
        out.append(f"{pad}fail")
    elif isinstance(c, ILoop):
        out.append(f"{pad}loop")
    else:
        raise TypeError(c)


def _sym(key) -> str:
    if key[0] in ("temp", "local"):
        return f"{key[0]} {_quote(key[1])}#{key[2]}"
    return f"{key[0]} {_quote(key[1])}"


def dump_ir(p: IrProgram) -> str:
    out = []
    for key, i in sorted(p.symbols.items(), key=lambda kv: kv[1]):
        out.append(f"sym {i} {_sym(key)}")
    out.append(f"entry f{p.main}")
    for fid in sorted(p.functions):
        f = p.functions[fid]
        out.append(f"f{fid} {f.name} params({' '.join(f't{t}' for t in f.params)}) "
                   f"temps({' '.join(f't{t}' for t in f.temps)}) "
                   f"locals({' '.join(f'l{x}' for x in f.locals)})")
        _show_cmd(f.body, 1, out)
    return "\n".join(out) + "\n"
