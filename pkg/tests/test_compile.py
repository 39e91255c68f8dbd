"""IR and Cminor-lite lowering and interpreters."""

import pytest
from hypothesis import given, settings, strategies as st

from gallinac import ast as A
from gallinac import cminor as C
from gallinac import ir as I
from gallinac import shallow as S
from gallinac.denote import denote_program
from gallinac.fuzz import GenConfig, gen_program
from gallinac.sexpr import parse
from gallinac.state import BOTTOM, FALSE, NULL, TRUE, UNIT, Block, Done, Failed, Heap, Nat, Ptr


def compile_both(p):
    q = I.lower_to_ir(p)
    return q, C.lower_to_cminor(q)


def two_locals():
    return S.program(S.var_("a", S.ret(1), S.var_("b", S.ret(2),
                     S.bind("x", S.read_var("a"), S.bind("y", S.read_var("b"),
                            S.ret(S.add(S.fvar("x"), S.fvar("y"))))))))


# -- IR --

def test_ids_are_dense_and_deterministic():
    q = I.lower_to_ir(S.reverse_list_program([1]))
    assert sorted(q.symbols.values()) == list(range(1, q.max_id() + 1))
    assert I.dump_ir(q) == I.dump_ir(I.lower_to_ir(S.reverse_list_program([1])))


def test_shadowed_names_get_separate_slots():
    p = S.program(S.var_("v", S.ret(1), S.var_("v", S.ret(2), S.read_var("v"))))
    q = I.lower_to_ir(p)
    assert len(q.functions[q.main].locals) == 2
    assert I.run_ir(q).value == 2


def test_ir_refuses_ill_formed_input():
    with pytest.raises(I.LoweringError):
        I.lower_to_ir(A.Program({}, A.CRet(A.EFVar("x"))))


def test_lower_value_forms():
    assert [I.lower_value(x) for x in (Nat(4), TRUE, FALSE, UNIT, NULL)] == [4, 1, 0, 0, 0]
    assert I.lower_value(Ptr(2, 1), {2: 5}) == Ptr(5, 1)


def test_frame_block_allocated_and_freed():
    q = I.lower_to_ir(two_locals())
    r = I.run_ir(q)
    assert r.value == 3
    (fb,) = r.state.frame_blocks
    assert not r.state.memory.blocks[fb].alive


def test_relate_states_detects_a_changed_cell():
    p = S.reverse_list_program([1, 2])
    d = denote_program(p)
    i = I.run_ir(I.lower_to_ir(p))
    m = I.block_map(d.state.heap, i.state.memory, i.state.frame_blocks)
    assert I.relate_states(d.state, i.state, m)
    cells = dict(i.state.memory.cells)
    cells[(1, 0)] = 99
    bad = I.IrState(i.state.temps, i.state.memory.with_cells(cells), None,
                    i.state.frame_blocks, {})
    assert not I.relate_states(d.state, bad, m)


def test_ir_fuel_matches_source_fuel():
    p = S.reverse_list_program([1, 2, 3])
    q = I.lower_to_ir(p)
    assert I.run_ir(q, fuel=3) is BOTTOM
    assert isinstance(I.run_ir(q, fuel=4), Done)


def test_golden_ir_dump(fixtures):
    p = parse((fixtures / "deref_next.gac").read_text())
    assert I.dump_ir(I.lower_to_ir(p)) == (fixtures / "deref_next.ir").read_text()


# -- Cminor-lite --

def test_stack_slots_follow_locals():
    q, fns = compile_both(two_locals())
    f = fns[q.main]
    assert f.stack_size == 2
    assert C.locals_at_constant_offsets(f)
    text = C.dump_cminor(fns)
    assert "(stack 0)" in text and "(stack 1)" in text and "(stack 2)" not in text


def test_no_locals_means_no_stack_block():
    q, fns = compile_both(S.program(S.ret(5)))
    assert fns[q.main].stack_size == 0
    r = C.run_cminor(fns, q.main)
    assert r.value == 5 and r.state.stack_allocs == 0 and r.state.memory.blocks == {}


def test_while_becomes_block_loop_exit():
    p = S.program(S.var_("i", S.ret(2), S.while_(
        S.bind("c", S.read_var("i"), S.ret(S.lt(0, S.fvar("c")))),
        S.bind("c", S.read_var("i"), S.write_var("i", S.sub(S.fvar("c"), 1))))))
    q, fns = compile_both(p)
    body = fns[q.main].body
    found = []

    def walk(s):
        if isinstance(s, C.Block) and isinstance(s.body, C.Loop):
            found.append(s.body.body)
        for f in ("first", "rest", "then", "orelse", "body"):
            if hasattr(s, f):
                walk(getattr(s, f))
    walk(body)
    assert len(found) == 1
    loop_body = found[0]
    test = loop_body.rest.first
    assert isinstance(test, C.If) and test.orelse == C.Exit(0)
    assert C.exits_enclosed(body)
    assert C.run_cminor(fns, q.main).value == 0


def test_exit_outside_block_detected():
    assert not C.exits_enclosed(C.Loop(C.Exit(0)))
    assert C.exits_enclosed(C.Block(C.Block(C.Loop(C.Exit(1)))))


def test_truncating_subtraction_lowered():
    q, fns = compile_both(S.program(S.ret(S.sub(2, 7))))
    assert C.run_cminor(fns, q.main).value == 0
    q, fns = compile_both(S.program(S.ret(S.sub(7, 2))))
    assert C.run_cminor(fns, q.main).value == 5


def test_step_budget_gives_bottom():
    q, fns = compile_both(S.program(S.loop()))
    assert C.run_cminor(fns, q.main, step_budget=100) is BOTTOM


def test_abort_fails():
    q, fns = compile_both(S.program(S.fail()))
    assert isinstance(C.run_cminor(fns, q.main), Failed)


def test_shift_of_null_still_faults():
    q, fns = compile_both(S.program(S.read_ptr(S.shift(S.null, 0))))
    assert isinstance(C.run_cminor(fns, q.main), Failed)


def test_calls_allocate_one_stack_per_entry():
    p = S.program(S.seq(S.call("f"), S.call("f")),
                  f=((), S.var_("x", S.ret(1), S.read_var("x"))))
    q, fns = compile_both(p)
    r = C.run_cminor(fns, q.main)
    assert r.state.stack_allocs == r.state.stack_frees == r.state.stacked_entries == 2
    assert r.state.entries == 3


def test_initial_memory_is_kept():
    q, fns = compile_both(S.program(S.ret(1)))
    h = Heap({(1, 0): 3}, {1: Block(1)})
    r = C.run_cminor(fns, q.main, h)
    assert r.state.memory.cells == {(1, 0): 3}


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_ir_and_cminor_agree(seed):
    p, s0 = gen_program(GenConfig(seed=seed))
    q, fns = compile_both(p)
    i = I.run_ir(q, I.lower_heap(s0.heap), 500)
    c = C.run_cminor(fns, q.main, I.lower_heap(s0.heap), 200_000)
    assert all(C.exits_enclosed(f.body) and C.locals_at_constant_offsets(f) for f in fns.values())
    if i is BOTTOM or c is BOTTOM:
        return
    assert type(i) is type(c)
    if isinstance(i, Done):
        assert i.value == c.value and i.state.memory == c.state.memory


def test_golden_cminor_dump(fixtures):
    p = parse((fixtures / "reverse.gac").read_text())
    _, fns = compile_both(p)
    q = I.lower_to_ir(p)
    assert C.dump_cminor(fns, q.main) == (fixtures / "reverse.cminor").read_text()
