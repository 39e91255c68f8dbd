import pytest
from hypothesis import given, settings, strategies as st

from gallinac.state import (
    BOTTOM, NULL, UNIT, WORD_MOD, Block, Bool, Done, Failed, Fault, Heap, HeapError,
    MAX_PARTITION_CELLS, Nat, Ptr, State, Store, approx_leq, heap_alloc, heap_free,
    heap_load, heap_store, partition, partitions, ptr_shift, wrap,
)


def test_alloc_numbers_blocks_from_one():
    h, p = heap_alloc(Heap(), 2, Nat(0))
    h, q = heap_alloc(h, 1, Nat(5))
    assert (p, q) == (Ptr(1, 0), Ptr(2, 0))
    assert h.cells == {(1, 0): Nat(0), (1, 1): Nat(0), (2, 0): Nat(5)}


def test_freed_block_ids_are_not_reused():
    h, p = heap_alloc(Heap(), 1, UNIT)
    h = heap_free(h, p)
    h, q = heap_alloc(h, 1, UNIT)
    assert q.block == 2
    assert h.blocks[1] == Block(1, False)


@pytest.mark.parametrize("n", [0, -1])
def test_alloc_rejects_empty_blocks(n):
    with pytest.raises(HeapError):
        heap_alloc(Heap(), n, UNIT)


def test_load_store_round_trip():
    h, p = heap_alloc(Heap(), 3, Nat(0))
    q = ptr_shift(h, p, 2)
    h = heap_store(h, q, Bool(True))
    assert heap_load(h, q) == Bool(True)
    assert heap_load(h, p) == Nat(0)


@pytest.mark.parametrize("bad, msg", [
    (NULL, "null"),
    (Ptr(7, 0), "unknown block"),
    (Nat(3), "expected a pointer"),
])
def test_load_errors(bad, msg):
    h, _ = heap_alloc(Heap(), 1, UNIT)
    with pytest.raises(HeapError, match=msg):
        heap_load(h, bad)


def test_use_after_free_and_double_free():
    h, p = heap_alloc(Heap(), 1, UNIT)
    h = heap_free(h, p)
    with pytest.raises(HeapError, match="use after free"):
        heap_load(h, p)
    with pytest.raises(HeapError, match="double free"):
        heap_free(h, p)


def test_free_of_interior_pointer():
    h, p = heap_alloc(Heap(), 2, UNIT)
    with pytest.raises(HeapError, match="interior"):
        heap_free(h, ptr_shift(h, p, 1))


def test_shift_must_stay_inside_block():
    h, p = heap_alloc(Heap(), 2, UNIT)
    assert ptr_shift(h, p, 1) == Ptr(1, 1)
    with pytest.raises(Fault, match="past block"):
        ptr_shift(h, p, 2)
    with pytest.raises(Fault, match="null"):
        ptr_shift(h, NULL, 0)


def test_words_wrap_at_32_bits():
    assert wrap(WORD_MOD + 3) == Nat(3)
    with pytest.raises(ValueError):
        Nat(WORD_MOD)


def test_store_shadowing_push_pop():
    s = Store().push("x", Nat(1)).push("x", Nat(2))
    assert s.lookup("x") == Nat(2)
    assert s.write("x", Nat(3)).pop().lookup("x") == Nat(1)
    assert s.pop().lookup("x") == Nat(1)
    with pytest.raises(Fault):
        Store().lookup("x")


def test_value_printing():
    assert [str(v) for v in (UNIT, Bool(False), Nat(4), NULL, Ptr(2, 1))] == \
        ["unit", "false", "4", "null", "ptr(2,1)"]


# -- outcomes --

outcomes = st.one_of(
    st.just(BOTTOM),
    st.sampled_from(["fail", "other"]).map(Failed),
    st.integers(0, 3).map(lambda n: Done(Nat(n), State())),
)


@given(outcomes)
def test_approx_leq_reflexive(a):
    assert approx_leq(a, a)


@given(outcomes, outcomes)
def test_approx_leq_antisymmetric(a, b):
    if approx_leq(a, b) and approx_leq(b, a):
        assert a == b


@given(outcomes, outcomes, outcomes)
def test_approx_leq_transitive(a, b, c):
    if approx_leq(a, b) and approx_leq(b, c):
        assert approx_leq(a, c)


@given(outcomes)
def test_bottom_is_least(a):
    assert approx_leq(BOTTOM, a)
    if a is not BOTTOM:
        assert not approx_leq(a, BOTTOM)


# -- heap invariants --

ops = st.lists(st.tuples(st.sampled_from(["alloc", "free", "store", "shift"]),
                         st.integers(0, 5), st.integers(0, 4)), max_size=30)


@given(ops)
def test_cells_stay_within_live_blocks(script):
    h = Heap()
    ptrs = []
    for op, a, b in script:
        try:
            if op == "alloc":
                h, p = heap_alloc(h, a % 4 + 1, Nat(b))
                ptrs.append(p)
            elif ptrs and op == "free":
                h = heap_free(h, ptrs[a % len(ptrs)])
            elif ptrs and op == "store":
                h = heap_store(h, ptrs[a % len(ptrs)], Nat(b))
            elif ptrs and op == "shift":
                ptrs.append(ptr_shift(h, ptrs[a % len(ptrs)], b))
        except Fault:
            pass
        h.check_bounds()


@settings(max_examples=50)
@given(st.integers(0, 6))
def test_partition_count_and_union(n):
    h = Heap()
    for i in range(n):
        h, _ = heap_alloc(h, 1, Nat(i))
    splits = list(partitions(h))
    assert len(splits) == 2 ** n
    assert len(set(splits)) == 2 ** n
    for h1, h2 in splits:
        assert partition(h, h1, h2) and partition(h, h2, h1)


def test_partition_rejects_overlap_and_mismatch():
    h, _ = heap_alloc(Heap(), 2, Nat(0))
    assert not partition(h, h, h.with_cells({(1, 0): Nat(0)}))
    assert not partition(h, h.with_cells({(1, 0): Nat(9)}), h.with_cells({(1, 1): Nat(0)}))


def test_partitions_bounded():
    h, _ = heap_alloc(Heap(), MAX_PARTITION_CELLS + 1, UNIT)
    with pytest.raises(ValueError):
        next(partitions(h))
