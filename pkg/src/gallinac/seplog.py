"""Separation logic over concrete states.

Assertions are evaluated directly on a :class:`State`.  Every spatial
assertion is heap-exact: ``emp`` and ``pointsto`` describe the whole heap
they are given, and ``star`` searches the ordered partitions of the heap.
``pure`` is the one atom that leaves the heap unconstrained.  ``wand``
quantifies over an explicit finite universe of extension heaps supplied by
the caller, since quantifying over all heaps is not executable.

Expressions inside assertions read temporaries first and fall back to store
variables, so an assertion can mention either kind of name.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from . import ast as A
from .denote import Fuel, denote, eval_expr
from .state import (
    BOTTOM, TRUE, Done, Failed, Fault, Heap, Nat, Ptr, State, Store, heap_alloc,
    heap_free, partitions,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class PointsTo:
    addr: A.Expr
    val: A.Expr


@dataclass(frozen=True)
class Star:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Wand:
    left: "Assertion"
    right: "Assertion"


@dataclass(frozen=True)
class Pure:
    e: A.Expr


@dataclass(frozen=True)
class ListSeg:
    """List from ``start`` to ``end``; nodes hold a value at 0, next at 1."""

    start: A.Expr
    end: A.Expr
    values: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))


Assertion = Union[Emp, PointsTo, Star, Wand, Pure, ListSeg]


@dataclass(frozen=True)
class Triple:
    pre: Assertion
    cmd: A.Cmd
    result: str
    post: Assertion


def stars(*parts: Assertion) -> Assertion:
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Star(p, out)
    return out


def free_names(a: Assertion) -> set[str]:
    if isinstance(a, PointsTo):
        return A.expr_vars(a.addr) | A.expr_vars(a.val)
    if isinstance(a, (Star, Wand)):
        return free_names(a.left) | free_names(a.right)
    if isinstance(a, Pure):
        return A.expr_vars(a.e)
    if isinstance(a, ListSeg):
        out = A.expr_vars(a.start) | A.expr_vars(a.end)
        for v in a.values:
            out |= A.expr_vars(v)
        return out
    return set()


# -- semantics ---------------------------------------------------------------


def _scope(s: State) -> State:
    if not s.store.bindings:
        return s
    env = {}
    for n, v in s.store.bindings:
        env[n] = v
    env.update(s.env)
    return s.with_env(env)


def _ev(e, s: State):
    return eval_expr(e, _scope(s))


class CheckerError(Exception):
    pass


def holds(a: Assertion, s: State, universe: Iterable[Heap] = (), cache: dict | None = None) -> bool:
    """Decide ``a`` on ``s``.  Expression errors make the assertion false."""
    if cache is not None:
        key = (a, s)
        hit = cache.get(key)
        if hit is None:
            hit = cache[key] = _holds(a, s, universe, cache)
        return hit
    return _holds(a, s, universe, cache)


def _holds(a, s, universe, cache) -> bool:
    cells = s.heap.cells
    try:
        if isinstance(a, Emp):
            return not cells
        if isinstance(a, Pure):
            return _ev(a.e, s) == TRUE
        if isinstance(a, PointsTo):
            if len(cells) != 1:
                return False
            p = _ev(a.addr, s)
            v = _ev(a.val, s)
            return isinstance(p, Ptr) and not p.is_null and cells.get((p.block, p.offset), _NO) == v
        if isinstance(a, ListSeg):
            return _listseg(a, s)
    except Fault as exc:
        log.debug("assertion %s is false: %s", a, exc)
        return False
    if isinstance(a, Star):
        try:
            splits = partitions(s.heap)
            for h1, h2 in splits:
                if holds(a.left, s.with_heap(h1), universe, cache) and \
                        holds(a.right, s.with_heap(h2), universe, cache):
                    return True
        except ValueError as exc:
            raise CheckerError(str(exc)) from None
        return False
    if isinstance(a, Wand):
        for ext in universe:
            if cells.keys() & ext.cells.keys():
                continue
            if not holds(a.left, s.with_heap(s.heap.with_cells(ext.cells)), universe, cache):
                continue
            union = dict(cells)
            union.update(ext.cells)
            if not holds(a.right, s.with_heap(s.heap.with_cells(union)), universe, cache):
                return False
        return True
    raise TypeError(f"not an assertion: {a!r}")


_NO = object()


def _listseg(a: ListSeg, s: State) -> bool:
    cur = _ev(a.start, s)
    end = _ev(a.end, s)
    remaining = dict(s.heap.cells)
    for ve in a.values:
        v = _ev(ve, s)
        if not isinstance(cur, Ptr) or cur.is_null or cur == end:
            return False
        here, nxt = (cur.block, cur.offset), (cur.block, cur.offset + 1)
        if remaining.pop(here, _NO) != v:
            return False
        cur = remaining.pop(nxt, _NO)
        if cur is _NO:
            return False
    return not remaining and cur == end


# -- state construction ------------------------------------------------------


class Collision(Exception):
    """Building an assertion needed a cell that is already taken."""


VALUE_POOL = tuple(range(8))


class _Builder:
    def __init__(self, base: State, rng: random.Random, pool, junk: int):
        self.env = dict(base.env)
        for n, v in base.store.bindings:
            self.env.setdefault(n, v)
        self.heap = base.heap
        self.cells = dict(base.heap.cells)
        self.new: set = set()
        self.rng = rng
        self.pool = pool
        self.junk = junk

    def _maybe_junk(self):
        for _ in range(self.rng.randint(0, self.junk)):
            self.heap, p = heap_alloc(self.heap, self.rng.randint(1, 2), Nat(0))
            self.heap = heap_free(self.heap, p)

    def _fresh_block(self, size: int) -> Ptr:
        self._maybe_junk()
        self.heap, p = heap_alloc(self.heap, size, Nat(0))
        return p

    def _state(self) -> State:
        return State(Store(), Heap(self.cells, self.heap.blocks, self.heap.next_block), self.env)

    def value(self, e):
        for name in sorted(A.expr_vars(e)):
            if name not in self.env:
                self.env[name] = Nat(self.rng.choice(self.pool))
        return eval_expr(e, self._state())

    def address(self, e, sizes) -> Ptr:
        if isinstance(e, A.EFVar) and e.name not in self.env:
            self.env[e.name] = self._fresh_block(sizes.get(e.name, 1))
        elif isinstance(e, A.EPtrShiftFw) and isinstance(e.ptr, A.EFVar) \
                and e.ptr.name not in self.env:
            self.env[e.ptr.name] = self._fresh_block(sizes.get(e.ptr.name, 1))
        p = eval_expr(e, self._state())
        if not isinstance(p, Ptr) or p.is_null:
            raise Fault(f"address {p} is not a pointer")
        return p

    def put(self, key, v):
        if key in self.cells:
            raise Collision(f"cell {key} described twice")
        self.cells[key] = v
        self.new.add(key)

    def build(self, a: Assertion, sizes):
        if isinstance(a, (Emp, Pure)):
            return
        if isinstance(a, PointsTo):
            p = self.address(a.addr, sizes)
            self.put((p.block, p.offset), self.value(a.val))
        elif isinstance(a, Star):
            self.build(a.left, sizes)
            self.build(a.right, sizes)
        elif isinstance(a, ListSeg):
            vals = [self.value(v) for v in a.values]
            end = self.value(a.end)
            if not (isinstance(a.start, A.EFVar) and a.start.name not in self.env):
                raise ValueError("list segments are built from an unbound start name")
            nodes = [self._fresh_block(2) for _ in vals]
            self.rng.shuffle(nodes)
            for i, (node, v) in enumerate(zip(nodes, vals)):
                self.put((node.block, 0), v)
                self.put((node.block, 1), nodes[i + 1] if i + 1 < len(nodes) else end)
            self.env[a.start.name] = nodes[0] if nodes else end
        else:
            raise ValueError(f"cannot build states for {type(a).__name__}")


def _shift_sizes(a: Assertion, out: dict):
    if isinstance(a, PointsTo):
        e = a.addr
        if isinstance(e, A.EPtrShiftFw) and isinstance(e.ptr, A.EFVar) and isinstance(e.by, A.ENat):
            out[e.ptr.name] = max(out.get(e.ptr.name, 1), e.by.n + 1)
    elif isinstance(a, (Star, Wand)):
        _shift_sizes(a.left, out)
        _shift_sizes(a.right, out)
    return out


def extend_state(a: Assertion, base: State, rng: random.Random, pool=VALUE_POOL,
                 junk: int = 1) -> tuple[State, set]:
    """Add cells (and bindings for unbound names) so that ``a`` describes them.

    Returns the new state and the set of cells added.  Raises
    :class:`Collision` when a cell of ``a`` is already present in ``base``.
    """
    b = _Builder(base, rng, pool, junk)
    b.build(a, _shift_sizes(a, {}))
    env = {k: v for k, v in b.env.items() if k not in base.store}
    heap = Heap(b.cells, b.heap.blocks, b.heap.next_block)
    return State(base.store, heap, env), b.new


def gen_states(a: Assertion, rng: random.Random, count: int, *, store_vars=(),
               pool=VALUE_POOL, universe=(), max_tries: int | None = None) -> list[State]:
    """Random states satisfying ``a``, built constructively then filtered.

    Names listed in ``store_vars`` are placed in the store, the rest of the
    free names become temporaries.
    """
    out = []
    tries = 0
    max_tries = max_tries if max_tries is not None else 20 * count
    while len(out) < count and tries < max_tries:
        tries += 1
        try:
            s, _ = extend_state(a, State(), rng, pool)
        except (Collision, Fault):
            continue
        if store_vars:
            store = Store(tuple((n, s.env[n]) for n in store_vars if n in s.env))
            env = {k: v for k, v in s.env.items() if k not in store_vars}
            s = State(store, s.heap, env)
        if holds(a, s, universe):
            out.append(s)
    return out


# -- triples -----------------------------------------------------------------


@dataclass
class Counterexample:
    state: State
    outcome: object
    note: str = ""


@dataclass
class TripleReport:
    states_checked: int = 0
    passes: int = 0
    crash_counterexamples: list = field(default_factory=list)
    post_counterexamples: list = field(default_factory=list)
    inconclusive_bottoms: int = 0
    universe_size: int = 0

    @property
    def ok(self) -> bool:
        return not self.crash_counterexamples and not self.post_counterexamples

    def as_dict(self) -> dict:
        def cx(c):
            return {"state": _show_state(c.state), "outcome": _show_outcome(c.outcome),
                    "note": c.note}
        return {
            "states_checked": self.states_checked,
            "passes": self.passes,
            "crash_counterexamples": [cx(c) for c in self.crash_counterexamples],
            "post_counterexamples": [cx(c) for c in self.post_counterexamples],
            "inconclusive_bottoms": self.inconclusive_bottoms,
            "universe_size": self.universe_size,
        }


def _show_state(s: State) -> str:
    env = ", ".join(f"{k}={v}" for k, v in sorted(s.env.items()))
    store = ", ".join(f"{k}={v}" for k, v in s.store.bindings)
    cells = ", ".join(f"({b},{o})={v}" for (b, o), v in sorted(s.heap.cells.items()))
    return f"env[{env}] store[{store}] heap[{cells}]"


def _show_outcome(r) -> str:
    if isinstance(r, Done):
        return f"done {r.value}"
    if isinstance(r, Failed):
        return f"failed {r.reason}"
    return "bottom"


PostCondition = Union[Assertion, Callable[[object], Assertion]]


def _post_holds(post, result, v, s2, universe) -> bool:
    if callable(post):
        return holds(post(v), s2, universe)
    return holds(post, s2.bind(result, v), universe)


def check_triple(pre: Assertion, c: A.Cmd, post: PostCondition, states: Iterable[State],
                 fuel: int = 1000, *, result: str = "r", prog: A.Program | None = None,
                 universe: Iterable[Heap] = ()) -> TripleReport:
    """Partial correctness of ``{pre} c {post}`` on each state satisfying ``pre``.

    ``post`` is either an assertion in which ``result`` names the returned
    value, or a function from the returned value to an assertion.
    """
    universe = list(universe)
    report = TripleReport(universe_size=len(universe))
    d = denote(c, prog)
    for s in states:
        if not holds(pre, s, universe):
            continue
        report.states_checked += 1
        r = d(s, Fuel(fuel))
        if r is BOTTOM:
            report.inconclusive_bottoms += 1
        elif isinstance(r, Failed):
            report.crash_counterexamples.append(Counterexample(s, r, r.reason))
        elif _post_holds(post, result, r.value, r.state, universe):
            report.passes += 1
        else:
            report.post_counterexamples.append(
                Counterexample(s, r, "postcondition does not hold in the final state"))
    return report


def mod_vars(c: A.Cmd, prog: A.Program | None = None) -> set[str]:
    """Store variables that ``c`` may assign, following calls."""
    out: set[str] = set()
    seen: set[str] = set()
    todo = [c]
    while todo:
        for node in A.walk(todo.pop()):
            if isinstance(node, A.CWriteVar):
                out.add(node.name)
            elif isinstance(node, A.CCall) and prog is not None and node.fn not in seen:
                seen.add(node.fn)
                f = prog.functions.get(node.fn)
                if f is not None:
                    todo.append(f.body)
    return out


class FrameRejected(Exception):
    pass


def frame_check(pre: Assertion, c: A.Cmd, post: PostCondition, frame: Assertion,
                states: Iterable[State], fuel: int = 1000, *, rng: random.Random | None = None,
                result: str = "r", prog: A.Program | None = None,
                universe: Iterable[Heap] = ()) -> TripleReport:
    """Check ``{pre ** frame} c {post ** frame}``.

    ``states`` satisfy ``pre``; each is extended with cells for ``frame``.
    The frame is rejected up front if it names a variable ``c`` assigns, if
    its cells overlap the precondition's, or if ``c`` writes one of them.
    """
    rng = rng or random.Random(0)
    clash = free_names(frame) & mod_vars(c, prog)
    if clash:
        raise FrameRejected(f"frame mentions modified variables {sorted(clash)}")
    d = denote(c, prog)
    framed = []
    for s in states:
        fuel_log = Fuel(fuel, log_writes=True)
        d(s, fuel_log)
        try:
            s2, footprint = extend_state(frame, s, rng)
        except Collision as exc:
            raise FrameRejected(f"frame overlaps the precondition: {exc}") from None
        hit = footprint & fuel_log.writes
        if hit:
            raise FrameRejected(f"command writes frame cells {sorted(hit)}")
        framed.append(s2)
    if callable(post):
        framed_post = lambda v: Star(post(v), frame)  # noqa: E731
    else:
        framed_post = Star(post, frame)
    return check_triple(Star(pre, frame), c, framed_post, framed, fuel,
                        result=result, prog=prog, universe=universe)
