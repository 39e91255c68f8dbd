"""Runtime values, the store, the block heap and the outcome lattice.

Everything here is an immutable value: operations return fresh objects and
never mutate their arguments.  The heap is block structured; a pointer
carries the id of the block it was allocated from (its provenance) plus a
cell offset, and every access is checked against that block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterator, Union

WORD_BITS = 32
WORD_MOD = 1 << WORD_BITS
NULL_BLOCK = 0


class Fault(Exception):
    """A runtime error.  Every semantics turns it into a ``Failed`` outcome."""


class HeapError(Fault):
    pass


# -- values ------------------------------------------------------------------


@dataclass(frozen=True)
class Unit:
    def __str__(self) -> str:
        return "unit"


@dataclass(frozen=True)
class Bool:
    b: bool

    def __str__(self) -> str:
        return "true" if self.b else "false"


@dataclass(frozen=True)
class Nat:
    n: int

    def __post_init__(self):
        if not 0 <= self.n < WORD_MOD:
            raise ValueError(f"natural {self.n} outside [0, 2^{WORD_BITS})")

    def __str__(self) -> str:
        return str(self.n)


@dataclass(frozen=True)
class Ptr:
    block: int
    offset: int = 0

    @property
    def is_null(self) -> bool:
        return self.block == NULL_BLOCK

    def __str__(self) -> str:
        if self.is_null:
            return "null"
        return f"ptr({self.block},{self.offset})"


Pointer = Ptr
Value = Union[Unit, Bool, Nat, Ptr]

UNIT = Unit()
TRUE = Bool(True)
FALSE = Bool(False)
NULL = Ptr(NULL_BLOCK, 0)


def wrap(n: int) -> Nat:
    """Natural with modular (wraparound) word semantics."""
    return Nat(n % WORD_MOD)


# -- store -------------------------------------------------------------------


@dataclass(frozen=True)
class Store:
    """Scoped mutable variables.

    ``bindings`` is a stack; the innermost (last) binding of a name wins,
    so pushing a name shadows it and popping restores the outer one.
    """

    bindings: tuple[tuple[str, Any], ...] = ()

    def lookup(self, name: str):
        for n, v in reversed(self.bindings):
            if n == name:
                return v
        raise Fault(f"unbound store variable {name!r}")

    def __contains__(self, name: str) -> bool:
        return any(n == name for n, _ in self.bindings)

    def push(self, name: str, value) -> Store:
        return Store(self.bindings + ((name, value),))

    def pop(self) -> Store:
        if not self.bindings:
            raise Fault("store scope underflow")
        return Store(self.bindings[:-1])

    def write(self, name: str, value) -> Store:
        for i in range(len(self.bindings) - 1, -1, -1):
            if self.bindings[i][0] == name:
                b = list(self.bindings)
                b[i] = (name, value)
                return Store(tuple(b))
        raise Fault(f"unbound store variable {name!r}")

    def names(self) -> list[str]:
        return [n for n, _ in self.bindings]

    def __len__(self) -> int:
        return len(self.bindings)


# -- heap --------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    size: int
    alive: bool = True


class Heap:
    """Block memory: ``cells`` maps ``(block, offset)`` to a value.

    ``blocks`` records every block ever allocated (freed ones stay, marked
    dead, so ids are never reused).  Instances are treated as immutable.
    """

    __slots__ = ("cells", "blocks", "next_block", "_hash")

    def __init__(self, cells=None, blocks=None, next_block: int | None = None):
        self.cells: dict[tuple[int, int], Any] = dict(cells or {})
        self.blocks: dict[int, Block] = dict(blocks or {})
        if next_block is None:
            next_block = max(self.blocks, default=NULL_BLOCK) + 1
        self.next_block = next_block
        self._hash = None

    def __eq__(self, other):
        if not isinstance(other, Heap):
            return NotImplemented
        return (self.cells == other.cells and self.blocks == other.blocks
                and self.next_block == other.next_block)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((frozenset(self.cells.items()),
                               frozenset(self.blocks.items()), self.next_block))
        return self._hash

    def __repr__(self):
        cells = ", ".join(f"({b},{o})->{v}" for (b, o), v in sorted(self.cells.items()))
        return f"Heap({{{cells}}})"

    def with_cells(self, cells) -> Heap:
        """Same block table, different cell map (a sub-heap or extension)."""
        return Heap(cells, self.blocks, self.next_block)

    def live_blocks(self) -> list[int]:
        return sorted(b for b, info in self.blocks.items() if info.alive)

    def check_bounds(self) -> None:
        for b, i in self.cells:
            info = self.blocks.get(b)
            if info is None or not info.alive or not 0 <= i < info.size:
                raise AssertionError(f"cell ({b},{i}) outside its block")


EMPTY_HEAP = Heap()


def _require_ptr(p) -> Ptr:
    if not isinstance(p, Ptr):
        raise HeapError(f"expected a pointer, got {p}")
    return p


def _check_access(heap: Heap, p) -> tuple[int, int]:
    p = _require_ptr(p)
    if p.is_null:
        raise HeapError("null pointer dereference")
    info = heap.blocks.get(p.block)
    if info is None:
        raise HeapError(f"pointer into unknown block {p.block}")
    if not info.alive:
        raise HeapError(f"use after free of block {p.block}")
    if not 0 <= p.offset < info.size:
        raise HeapError(f"offset {p.offset} outside block {p.block} of size {info.size}")
    return p.block, p.offset


def heap_alloc(heap: Heap, n: int, init) -> tuple[Heap, Ptr]:
    if n < 1:
        raise HeapError(f"cannot allocate a block of {n} cells")
    b = heap.next_block
    cells = dict(heap.cells)
    for i in range(n):
        cells[(b, i)] = init
    blocks = dict(heap.blocks)
    blocks[b] = Block(n, True)
    return Heap(cells, blocks, b + 1), Ptr(b, 0)


def heap_free(heap: Heap, p) -> Heap:
    p = _require_ptr(p)
    if p.is_null:
        raise HeapError("free of null pointer")
    info = heap.blocks.get(p.block)
    if info is None:
        raise HeapError(f"free of unknown block {p.block}")
    if not info.alive:
        raise HeapError(f"double free of block {p.block}")
    if p.offset != 0:
        raise HeapError(f"free of interior pointer at offset {p.offset}")
    cells = {k: v for k, v in heap.cells.items() if k[0] != p.block}
    blocks = dict(heap.blocks)
    blocks[p.block] = Block(info.size, False)
    return Heap(cells, blocks, heap.next_block)


def heap_load(heap: Heap, p):
    key = _check_access(heap, p)
    try:
        return heap.cells[key]
    except KeyError:
        # only reachable on a sub-heap that does not own the cell
        raise HeapError(f"cell {key} not owned by this heap") from None


def heap_store(heap: Heap, p, v) -> Heap:
    key = _check_access(heap, p)
    if key not in heap.cells:
        raise HeapError(f"cell {key} not owned by this heap")
    cells = dict(heap.cells)
    cells[key] = v
    return Heap(cells, heap.blocks, heap.next_block)


def ptr_shift(heap: Heap, p, k: int) -> Ptr:
    """Same-block pointer ``k`` cells further; must stay inside the block."""
    if not isinstance(p, Ptr):
        raise Fault(f"pointer arithmetic on non-pointer {p}")
    if p.is_null:
        raise Fault("pointer arithmetic on null")
    info = heap.blocks.get(p.block)
    if info is None:
        raise Fault(f"pointer into unknown block {p.block}")
    off = p.offset + k
    if off >= info.size:
        raise Fault(f"pointer shift to offset {off} past block {p.block} of size {info.size}")
    return Ptr(p.block, off)


def partition(h: Heap, h1: Heap, h2: Heap) -> bool:
    """``h`` is the disjoint union of ``h1`` and ``h2`` (same block table)."""
    if h1.blocks != h.blocks or h2.blocks != h.blocks:
        return False
    k1, k2 = h1.cells.keys(), h2.cells.keys()
    if k1 & k2:
        return False
    if len(k1) + len(k2) != len(h.cells):
        return False
    return all(h.cells.get(k, _MISSING) == v for k, v in h1.cells.items()) and \
        all(h.cells.get(k, _MISSING) == v for k, v in h2.cells.items())


_MISSING = object()
MAX_PARTITION_CELLS = 16


def partitions(h: Heap) -> Iterator[tuple[Heap, Heap]]:
    """All ordered splits of ``h``'s cells, 2^n of them."""
    keys = sorted(h.cells)
    if len(keys) > MAX_PARTITION_CELLS:
        raise ValueError(f"heap of {len(keys)} cells exceeds the partition bound "
                         f"of {MAX_PARTITION_CELLS}")
    for mask in product((False, True), repeat=len(keys)):
        left = {k: h.cells[k] for k, m in zip(keys, mask) if m}
        right = {k: h.cells[k] for k, m in zip(keys, mask) if not m}
        yield h.with_cells(left), h.with_cells(right)


# -- state -------------------------------------------------------------------


@dataclass(frozen=True, eq=True)
class State:
    store: Store = field(default_factory=Store)
    heap: Heap = field(default_factory=Heap)
    env: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.store, self.heap, frozenset(self.env.items())))

    def with_heap(self, heap: Heap) -> State:
        return State(self.store, heap, self.env)

    def with_store(self, store: Store) -> State:
        return State(store, self.heap, self.env)

    def with_env(self, env: dict) -> State:
        return State(self.store, self.heap, env)

    def bind(self, name: str, value) -> State:
        env = dict(self.env)
        env[name] = value
        return State(self.store, self.heap, env)


# -- outcomes ----------------------------------------------------------------


class Bottom:
    """Not enough fuel (or budget) to observe an outcome."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Bottom"

    def __reduce__(self):
        return (Bottom, ())


BOTTOM = Bottom()


@dataclass(frozen=True)
class Failed:
    reason: str = "fail"


@dataclass(frozen=True)
class Done:
    value: Any
    state: Any


Approx = Union[Bottom, Failed, Done]


def approx_leq(a: Approx, b: Approx) -> bool:
    """Flat order: bottom below everything, every other element maximal."""
    return a is BOTTOM or a == b
