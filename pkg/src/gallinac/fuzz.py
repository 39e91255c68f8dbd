"""Random typed programs and the differential harness over all four stages.

Programs are generated with a small type discipline (nat, bool, unit and
pointers to blocks of a known size) so a source type error never happens:
the untyped stages could not see one.  Errors that do remain are the
interesting ones, out-of-bounds shifts, use-after-free and explicit ``fail``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
from dataclasses import dataclass, field

from . import ast as A
from .cminor import exits_enclosed, lower_to_cminor, run_cminor
from .denote import denote, fuel_needed, Fuel, unfold_while
from .ir import block_map, lower_heap, lower_to_ir, relate_states, run_ir, value_related
from .opsem import run_steps_counted
from .sexpr import serialize
from .state import (
    BOTTOM, Approx, Done, Failed, Heap, Nat, State, approx_leq, heap_alloc, heap_free,
)

log = logging.getLogger(__name__)

NAT, BOOL, UNIT = "nat", "bool", "unit"


def ptr_type(n: int) -> tuple:
    return ("ptr", n)


def is_ptr(t) -> bool:
    return isinstance(t, tuple) and t[0] == "ptr"


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 3
    max_loops: int = 3
    loop_bias: float = 0.9
    max_functions: int = 2
    max_iter: int = 3           # counter loops run at most this many times
    nat_pool: int = 6
    prologue_cells: int = 8
    size: int = 14
    fuel: int = 500
    steps: int = 50_000
    rare: float = 0.02          # weight of fail / loop / free / out-of-bounds


@dataclass
class _Ctx:
    temps: dict = field(default_factory=dict)
    store: dict = field(default_factory=dict)
    funcs: list = field(default_factory=list)     # (name, param types, result type)

    def with_temp(self, x, t):
        return _Ctx({**self.temps, x: t}, self.store, self.funcs)

    def with_var(self, x, t):
        return _Ctx(self.temps, {**self.store, x: t}, self.funcs)

    def without_var(self, x):
        return _Ctx(self.temps, {k: v for k, v in self.store.items() if k != x}, self.funcs)

    def of_type(self, t):
        return sorted(x for x, u in self.temps.items() if u == t)

    def ptrs(self):
        return sorted((x, u) for x, u in self.temps.items() if is_ptr(u))


class _Gen:
    TEMPS = ("x0", "x1", "x2", "x3")
    VARS = ("v0", "v1", "v2")

    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.loops_left = cfg.max_loops
        self.counters = 0

    def chance(self, p: float) -> bool:
        return self.rng.random() < p

    def nat_lit(self):
        if self.chance(0.05):
            return A.ENat(2 ** 32 - 1 - self.rng.randrange(3))
        return A.ENat(self.rng.randrange(self.cfg.nat_pool))

    # -- expressions --

    def expr(self, t, ctx: _Ctx, d: int = 2):
        r = self.rng
        if t == UNIT:
            return A.EUnit()
        if is_ptr(t):
            xs = ctx.of_type(t)
            if xs and not self.chance(self.cfg.rare):
                return A.EFVar(r.choice(xs))
            return A.ENull()
        xs = ctx.of_type(t)
        pick = r.random()
        if xs and pick < 0.35:
            return A.EFVar(r.choice(xs))
        if d <= 0 or pick < 0.6:
            return self.nat_lit() if t == NAT else A.EBool(r.random() < 0.5)
        if t == NAT:
            return A.EBin(r.choice(("add", "sub")), self.expr(NAT, ctx, d - 1), self.expr(NAT, ctx, d - 1))
        kind = r.randrange(5)
        if kind == 0:
            return A.ENot(self.expr(BOOL, ctx, d - 1))
        if kind == 1:
            return A.EBin(r.choice(("and", "or")), self.expr(BOOL, ctx, d - 1), self.expr(BOOL, ctx, d - 1))
        if kind == 2 and ctx.ptrs():
            x, u = r.choice(ctx.ptrs())
            return A.EBin(r.choice(("eq", "neq")), A.EFVar(x), self.expr(u, ctx, 0))
        return A.EBin(r.choice(("eq", "neq", "lt")), self.expr(NAT, ctx, d - 1), self.expr(NAT, ctx, d - 1))

    def cell(self, ctx: _Ctx):
        """Address of a cell of some pointer temporary, or None."""
        ps = ctx.ptrs()
        if not ps:
            return None
        x, (_, n) = self.rng.choice(ps)
        k = n if self.chance(self.cfg.rare) else self.rng.randrange(n)
        if k == 0 and self.chance(0.5):
            return A.EFVar(x)
        return A.EPtrShiftFw(A.EFVar(x), A.ENat(k))

    # -- commands --

    def atomic(self, t, ctx: _Ctx):
        r = self.rng
        opts = [lambda: A.CRet(self.expr(t, ctx))]
        if t == UNIT:
            vars_ = sorted(ctx.store)
            if vars_:
                opts.append(lambda: self._write_var(ctx, r.choice(vars_)))
            if ctx.ptrs():
                opts.append(lambda: A.CWritePtr(self.cell(ctx), self.expr(NAT, ctx)))
            if ctx.ptrs() and self.chance(self.cfg.rare * 2):
                return A.CFree(A.EFVar(r.choice(ctx.ptrs())[0]))
        else:
            vs = sorted(x for x, u in ctx.store.items() if u == t)
            if vs:
                opts.append(lambda: A.CReadVar(r.choice(vs)))
            if t == NAT and ctx.ptrs():
                opts.append(lambda: A.CReadPtr(self.cell(ctx)))
            if is_ptr(t):
                opts.append(lambda: A.CAlloc(t[1], self.expr(NAT, ctx)))
        return r.choice(opts)()

    def _write_var(self, ctx, x):
        return A.CWriteVar(x, self.expr(ctx.store[x], ctx))

    def some_type(self, ctx: _Ctx):
        r = self.rng.random()
        if r < 0.45:
            return NAT
        if r < 0.65:
            return BOOL
        if r < 0.8:
            return UNIT
        return ptr_type(self.rng.randint(1, 3))

    def cmd(self, t, ctx: _Ctx, depth: int, size: int):
        r = self.rng
        if self.chance(self.cfg.rare / 2):
            return A.CFail() if r.random() < 0.6 else A.CLoop()
        if size <= 1:
            return self.atomic(t, ctx)
        kinds = ["atomic", "bind", "bind", "seq", "var"]
        if depth > 0:
            kinds += ["if"]
            if self.loops_left > 0:
                kinds += ["while"]
        calls = [f for f in ctx.funcs if f[2] == t]
        if calls:
            kinds += ["call"]
        k = r.choice(kinds)
        if k == "atomic":
            return self.atomic(t, ctx)
        left = r.randint(1, size - 1)
        if k == "bind":
            u = self.some_type(ctx)
            x = r.choice(self.TEMPS)
            first = self.cmd(u, ctx, depth, left)
            return A.CBind(x, first, self.cmd(t, ctx.with_temp(x, u), depth, size - left))
        if k == "seq":
            return A.CSeq(self.cmd(UNIT, ctx, depth, left), self.cmd(t, ctx, depth, size - left))
        if k == "var":
            u = NAT if r.random() < 0.7 else self.some_type(ctx)
            x = r.choice(self.VARS)
            init = self.cmd(u, ctx, depth, min(left, 2))
            return A.CVar(x, init, self.cmd(t, ctx.with_var(x, u), depth, size - left))
        if k == "if":
            return A.CIf(self.expr(BOOL, ctx), self.cmd(t, ctx, depth - 1, left),
                         self.cmd(t, ctx, depth - 1, max(1, size - left)))
        if k == "while":
            w = self.loop(ctx, depth, left)
            if t == UNIT and r.random() < 0.5:
                return w
            return A.CSeq(w, self.cmd(t, ctx, depth, max(1, size - left)))
        name, params, _ = r.choice(calls)
        return A.CCall(name, tuple(self.expr(p, ctx) for p in params))

    def loop(self, ctx: _Ctx, depth: int, size: int):
        """A ``while``; usually counter-bounded so it terminates."""
        self.loops_left -= 1
        r = self.rng
        if r.random() < self.cfg.loop_bias:
            i = f"i{self.counters}"
            self.counters += 1
            dec = A.CBind("c", A.CReadVar(i), A.CWriteVar(i, A.EBin("sub", A.EFVar("c"), A.ENat(1))))
            cond = A.CBind("c", A.CReadVar(i), A.CRet(A.EBin("lt", A.ENat(0), A.EFVar("c"))))
            body = A.CSeq(self.cmd(UNIT, ctx, depth - 1, max(1, size - 1)), dec)
            k = A.ENat(r.randint(0, self.cfg.max_iter))
            return A.CVar(i, A.CRet(k), A.CWhile(cond, body))
        cond = self.cmd(BOOL, ctx, 0, 2)
        return A.CWhile(cond, self.cmd(UNIT, ctx, depth - 1, max(1, size - 1)))

    def prologue(self, ctx: _Ctx):
        """Allocations heading ``main``: ``[(name, size, init)]`` and the context."""
        cells = self.cfg.prologue_cells
        out = []
        for j in range(self.rng.randint(1, 3)):
            n = self.rng.randint(1, 3)
            if n > cells:
                break
            cells -= n
            out.append((f"p{j}", n, self.nat_lit()))
            ctx = ctx.with_temp(f"p{j}", ptr_type(n))
        return out, ctx

    def program(self) -> A.Program:
        cfg = self.cfg
        funcs = []
        defs = {}
        for j in range(self.rng.randint(0, cfg.max_functions) if cfg.max_depth > 0 else 0):
            params = tuple(self.some_type(_Ctx()) for _ in range(self.rng.randint(0, 2)))
            names = tuple(f"a{k}" for k in range(len(params)))
            res = self.some_type(_Ctx())
            ctx = _Ctx(dict(zip(names, params)), {}, list(funcs))
            body = self.cmd(res, ctx, cfg.max_depth - 1, cfg.size // 2)
            name = f"f{j}"
            defs[name] = A.FunDef(names, body)
            funcs.append((name, params, res))
        allocs, ctx = self.prologue(_Ctx({}, {}, funcs))
        body = self.cmd(self.some_type(ctx), ctx, cfg.max_depth, cfg.size)
        return A.Program(defs, wrap_prologue(allocs, body))


def wrap_prologue(allocs, body):
    for name, n, init in reversed(allocs):
        body = A.CBind(name, A.CAlloc(n, init), body)
    return body


def gen_state(rng: random.Random) -> State:
    """Initial state: a few pre-existing blocks, some already freed."""
    heap = Heap()
    for _ in range(rng.randint(0, 2)):
        heap, p = heap_alloc(heap, rng.randint(1, 2), Nat(rng.randrange(4)))
        if rng.random() < 0.4:
            heap = heap_free(heap, p)
    return State(heap=heap)


def case_rng(seed: int, index: int) -> random.Random:
    return random.Random(f"gallinac:{seed}:{index}")


def gen_program(cfg: GenConfig) -> tuple[A.Program, State]:
    """A well-formed program and an initial state, determined by ``cfg.seed``."""
    rng = random.Random(f"gallinac-program:{cfg.seed}")
    p = _Gen(cfg, rng).program()
    return p, gen_state(rng)


def gen_loop_instance(cfg: GenConfig):
    """``(program, loop)`` where ``main`` runs ``loop`` once after a loop-free prologue.

    The loop is counter-bounded, so it terminates unless its body fails.
    Returns ``(with_while, with_unfolding)``: the two mains differ only in
    the loop being replaced by one syntactic unfolding.
    """
    rng = random.Random(f"gallinac-loop:{cfg.seed}")
    g = _Gen(dataclasses.replace(cfg, loop_bias=1.0, rare=0.0), rng)
    allocs, ctx = g.prologue(_Ctx())
    i = "i"
    dec = A.CBind("c", A.CReadVar(i), A.CWriteVar(i, A.EBin("sub", A.EFVar("c"), A.ENat(1))))
    cond = A.CBind("c", A.CReadVar(i), A.CRet(A.EBin("lt", A.ENat(0), A.EFVar("c"))))
    g.loops_left = 1
    body = A.CSeq(g.cmd(UNIT, ctx, 2, 6), dec)
    w = A.CWhile(cond, body)
    k = A.ENat(rng.randint(1, 4))
    with_w = wrap_prologue(allocs, A.CVar(i, A.CRet(k), w))
    with_u = wrap_prologue(allocs, A.CVar(i, A.CRet(k), unfold_while(w)))
    return A.Program({}, with_w), A.Program({}, with_u)


# -- differential run --------------------------------------------------------


def kind(r: Approx) -> str:
    if r is BOTTOM:
        return "bottom"
    return "failed" if isinstance(r, Failed) else "done"


def show(r: Approx) -> str:
    if r is BOTTOM:
        return "bottom"
    if isinstance(r, Failed):
        return f"failed {r.reason}"
    return f"done {r.value}"


@dataclass
class DiffVerdict:
    verdict: str                       # agree | disagree | all-bottom
    outcomes: dict = field(default_factory=dict)
    details: list = field(default_factory=list)
    program: str = ""
    seed: int | None = None
    retried: bool = False
    failure_preserved: bool = True

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Budgets:
    fuel: int = 500
    steps: int = 50_000
    cm_steps: int = 200_000

    def scaled(self, k: int) -> Budgets:
        return Budgets(self.fuel * k, self.steps * k, self.cm_steps * k)


def _run_all(p: A.Program, s0: State, b: Budgets):
    d = denote(p.main, p)(s0, Fuel(b.fuel))
    o, _ = run_steps_counted(p.main, p, s0, b.steps)
    q = lower_to_ir(p)
    i = run_ir(q, lower_heap(s0.heap), b.fuel)
    fns = lower_to_cminor(q)
    c = run_cminor(fns, q.main, lower_heap(s0.heap), b.cm_steps)
    return {"denote": d, "opsem": o, "ir": i, "cminor": c}, fns


def _compare(res: dict, fns: dict) -> tuple[list, bool]:
    """Problems found between terminating stages, and failure preservation."""
    d, o, i, c = res["denote"], res["opsem"], res["ir"], res["cminor"]
    out = []
    preserved = True
    if d is not BOTTOM and o is not BOTTOM and d != o:
        out.append(f"denote/opsem: {show(d)} vs {show(o)}")
    if d is not BOTTOM and i is not BOTTOM:
        if kind(d) != kind(i):
            out.append(f"source/ir: {show(d)} vs {show(i)}")
        elif isinstance(d, Done):
            m = block_map(d.state.heap, i.state.memory, i.state.frame_blocks)
            if m is None or not value_related(d.value, i.value, m):
                out.append(f"source/ir: values {d.value} vs {i.value} not related")
            elif not relate_states(d.state, i.state, m):
                out.append("source/ir: final states not related")
    if i is not BOTTOM and c is not BOTTOM:
        if kind(i) != kind(c):
            out.append(f"ir/cminor: {show(i)} vs {show(c)}")
        elif isinstance(i, Done):
            if i.value != c.value:
                out.append(f"ir/cminor: values {i.value} vs {c.value}")
            if i.state.memory != c.state.memory:
                out.append("ir/cminor: final memories differ")
            st = c.state
            if not st.stack_allocs == st.stack_frees == st.stacked_entries:
                out.append("cminor: stack blocks not freed exactly at return")
    for tgt in (i, c):
        if isinstance(d, Failed) and isinstance(tgt, Done):
            preserved = False
            out.append("failure not preserved: source failed, target done")
    return out, preserved


def differential_run(p: A.Program, s0: State, budgets: Budgets = Budgets(),
                     seed: int | None = None) -> DiffVerdict:
    res, fns = _run_all(p, s0, budgets)
    retried = False
    kinds = {kind(r) for r in res.values()}
    if "bottom" in kinds and len(kinds) > 1:
        # fuel and step budgets are not comparable across stages
        retried = True
        res, fns = _run_all(p, s0, budgets.scaled(10))
        kinds = {kind(r) for r in res.values()}
    details, preserved = _compare(res, fns)
    if not all(exits_enclosed(f.body) for f in fns.values()):
        details.append("cminor: exit outside of a block")
    if "bottom" in kinds and len(kinds) > 1:
        details.append("bottom vs terminating after 10x budgets: "
                       + ", ".join(f"{k}={show(v)}" for k, v in res.items()))
    if details:
        verdict = "disagree"
    elif kinds == {"bottom"}:
        verdict = "all-bottom"
    else:
        verdict = "agree"
    return DiffVerdict(verdict, {k: show(v) for k, v in res.items()}, details,
                       serialize(p), seed, retried, preserved)


# -- Kleene chain checks -----------------------------------------------------


def check_kleene(p: A.Program, s0: State, cap: int = 64) -> list[str]:
    """Monotonicity and stabilisation of the fuel chain; returns violations."""
    d = denote(p.main, p)
    need = fuel_needed(p.main, p, s0, cap)
    top = cap if need is None else min(cap, need + 3)
    chain = [d(s0, Fuel(n)) for n in range(top + 1)]
    out = []
    for n in range(top):
        if not approx_leq(chain[n], chain[n + 1]):
            out.append(f"not monotone at fuel {n}")
    if need is not None:
        if need > 0 and chain[need - 1] is not BOTTOM:
            out.append(f"fuel {need - 1} already defined")
        if any(chain[n] != chain[need] for n in range(need, top + 1)):
            out.append(f"chain does not stabilise from fuel {need}")
    elif any(r is not BOTTOM for r in chain):
        out.append("defined below the cap but fuel_needed found nothing")
    return out


# -- shrinking ---------------------------------------------------------------


def _cmd_fields(c):
    return [f.name for f in dataclasses.fields(c) if isinstance(getattr(c, f.name), _CMDS)]


_CMDS = (A.CRet, A.CBind, A.CSeq, A.CCall, A.CIf, A.CWhile, A.CVar, A.CReadVar,
         A.CWriteVar, A.CAlloc, A.CReadPtr, A.CWritePtr, A.CFree, A.CFail, A.CLoop)


def _variants(c):
    """Commands one removal smaller than ``c``."""
    for fname in _cmd_fields(c):
        yield getattr(c, fname)
    if not isinstance(c, A.CRet):
        yield A.CRet(A.EUnit())
    for fname in _cmd_fields(c):
        for sub in _variants(getattr(c, fname)):
            yield dataclasses.replace(c, **{fname: sub})


def shrink(p: A.Program, s0: State, still_fails, max_attempts: int = 1000) -> A.Program:
    """Greedy subterm removal keeping well-formedness and the failure."""
    attempts = 0
    improved = True
    while improved and attempts < max_attempts:
        improved = False
        cands = [dataclasses.replace(p, main=m) for m in _variants(p.main)]
        for name in sorted(p.functions):
            f = p.functions[name]
            cands += [A.Program({**p.functions, name: A.FunDef(f.params, b)}, p.main)
                      for b in _variants(f.body)]
            rest = {k: v for k, v in p.functions.items() if k != name}
            cands.append(A.Program(rest, p.main))
        for q in cands:
            if attempts >= max_attempts:
                break
            if A.program_size(q) >= A.program_size(p) or A.well_formed(q):
                continue
            attempts += 1
            if still_fails(q, s0):
                p = q
                improved = True
                break
    return p


# -- batch validation --------------------------------------------------------


def validate(count: int, seed: int, budgets: Budgets = Budgets(),
             cfg: GenConfig = GenConfig(), shrink_failures: bool = True) -> dict:
    """Run ``count`` generated cases; the report is ordered by case index."""
    cases = []
    tally = {"agree": 0, "disagree": 0, "all-bottom": 0}
    preserved = True
    for k in range(count):
        case_seed = seed * 1_000_003 + k
        p, s0 = gen_program(dataclasses.replace(cfg, seed=case_seed))
        v = differential_run(p, s0, budgets, case_seed)
        tally[v.verdict] += 1
        preserved = preserved and v.failure_preserved
        entry = {"index": k, "seed": case_seed, "verdict": v.verdict,
                 "outcomes": v.outcomes, "retried": v.retried}
        if v.verdict == "disagree":
            entry["details"] = v.details
            entry["program"] = v.program
            if shrink_failures:
                small = shrink(p, s0, lambda q, s: differential_run(q, s, budgets).verdict == "disagree")
                entry["shrunk"] = serialize(small)
            log.warning("case %d (seed %d) disagrees: %s", k, case_seed, "; ".join(v.details))
        cases.append(entry)
    return {"count": count, "seed": seed,
            "budgets": dataclasses.asdict(budgets),
            "tally": tally, "failure_preserved": preserved,
            "ok": tally["disagree"] == 0 and preserved, "cases": cases}


def write_report(report: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
