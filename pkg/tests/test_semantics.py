"""Denotational semantics, the step machine, and the shallow combinators."""

import pytest
from hypothesis import given, settings, strategies as st

from gallinac import ast as A
from gallinac import shallow as S
from gallinac.denote import (
    NON_BOOL_COND, Fuel, denote, denote_cmd, denote_program, eval_expr, fix_while,
    fuel_needed, kleene_chain, kleene_iterate, unfold_while,
)
from gallinac.fuzz import GenConfig, gen_program
from gallinac.opsem import initial, run_steps, run_steps_counted, step, Terminal
from gallinac.sexpr import parse, ser_cmd
from gallinac.state import (
    BOTTOM, FALSE, NULL, TRUE, Done, Failed, Fault, Nat, Ptr, State, Store,
    approx_leq,
)

rev3 = S.reverse_list_program([1, 2, 3])


def run(c, fuel=100, s=None, prog=None):
    return denote_cmd(S.cmd(c), prog, s or State(), fuel)


# -- expressions --

@pytest.mark.parametrize("e, v", [
    (S.add(2 ** 32 - 1, 2), Nat(1)),
    (S.sub(2, 5), Nat(0)),
    (S.lt(1, 2), TRUE),
    (S.eq(S.null, S.null), TRUE),
    (S.neq(True, False), TRUE),
    (S.and_(True, S.not_(True)), FALSE),
    (S.or_(False, True), TRUE),
])
def test_expression_values(e, v):
    assert eval_expr(e, State()) == v


@pytest.mark.parametrize("e", [S.add(1, True), S.not_(3), S.eq(1, True), S.fvar("x"),
                               S.shift(S.null, 0)])
def test_expression_errors(e):
    with pytest.raises(Fault):
        eval_expr(e, State())


# -- commands --

def test_reversal_needs_fuel_four():
    assert denote_program(rev3, fuel=3) is BOTTOM
    r = denote_program(rev3, fuel=4)
    assert isinstance(r, Done) and r.value == Ptr(1, 0)
    assert fuel_needed(rev3.main, rev3, State(), 100) == 4


def test_fail_propagates_and_stops():
    c = S.seq(S.fail(), S.alloc(1, 0))
    r = run(c)
    assert r == Failed("fail")


def test_loop_is_bottom_at_any_fuel():
    assert all(run(S.loop(), n) is BOTTOM for n in (0, 5, 1000))


def test_while_condition_must_be_boolean():
    assert run(S.while_(S.ret(1), S.ret(S.unit))) == Failed(NON_BOOL_COND)


def test_bind_restores_environment():
    c = S.bind("x", S.ret(1), S.ret(S.fvar("x")))
    r = run(c, s=State(env={"y": Nat(2)}))
    assert r.value == Nat(1) and r.state.env == {"y": Nat(2)}


def test_var_pops_its_binding():
    c = S.var_("v", S.ret(1), S.seq(S.write_var("v", 5), S.read_var("v")))
    r = run(c)
    assert r.value == Nat(5) and r.state.store == Store()


def test_call_gets_fresh_store_and_restores_caller():
    prog = S.program(S.var_("v", S.ret(7), S.bind("r", S.call("f", 3),
                                                    S.bind("w", S.read_var("v"),
                                                           S.ret(S.add(S.fvar("r"), S.fvar("w")))))),
                     f=(("a",), S.var_("v", S.ret(S.fvar("a")), S.read_var("v"))))
    assert denote_program(prog).value == Nat(10)


def test_alloc_free_cycle():
    c = S.bind("p", S.alloc(2, 4), S.seq(S.free(S.fvar("p")), S.read_ptr(S.fvar("p"))))
    r = run(c)
    assert isinstance(r, Failed) and "after free" in r.reason


def test_kleene_iterate_matches_fuel():
    cond = denote(S.cmd(S.bind("c", S.read_var("i"), S.ret(S.lt(0, S.fvar("c"))))))
    body = denote(S.cmd(S.bind("c", S.read_var("i"), S.write_var("i", S.sub(S.fvar("c"), 1)))))
    s = State(store=Store((("i", Nat(3)),)))
    assert kleene_iterate(cond, body, 3)(s, Fuel(100)) is BOTTOM
    r = kleene_iterate(cond, body, 4)(s, Fuel(100))
    assert r == fix_while(cond, body)(s, Fuel(4))
    assert r.state.store.lookup("i") == Nat(0)


def test_kleene_chain_shape():
    chain = kleene_chain(rev3.main, rev3, State(), 8)
    assert chain[:4] == [BOTTOM] * 4
    assert all(c == chain[4] for c in chain[4:])
    assert all(approx_leq(a, b) for a, b in zip(chain, chain[1:]))


def test_unfold_while_shape():
    w = A.CWhile(A.CRet(A.EBool(False)), A.CRet(A.EUnit()))
    assert ser_cmd(unfold_while(w)) == \
        '(bind %cond (ret (bool false)) (if (fvar %cond) (seq (ret unit) ' \
        '(while (ret (bool false)) (ret unit))) (ret unit)))'


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 30))
def test_fuel_monotone(seed, n):
    p, s0 = gen_program(GenConfig(seed=seed))
    a = denote_cmd(p.main, p, s0, n)
    b = denote_cmd(p.main, p, s0, n + 1)
    assert approx_leq(a, b)


# -- step machine --

def test_opsem_agrees_on_reversal():
    assert run_steps(rev3.main, rev3, State(), 10_000) == denote_program(rev3)


def test_fail_is_terminal_in_one_step():
    r, n = run_steps_counted(A.CFail(), None, State(), 10)
    assert (r, n) == (Failed("fail"), 1)


def test_loop_steps_to_itself():
    cfg = initial(A.CLoop(), State())
    assert step(cfg, A.Program()) == cfg
    assert run_steps(A.CLoop(), None, State(), 50) is BOTTOM


def test_step_returns_terminal_on_fault():
    cfg = initial(A.CReadPtr(A.ENull()), State())
    out = step(cfg, A.Program())
    assert isinstance(out, Terminal) and isinstance(out.outcome, Failed)


def test_trace_lines():
    lines = []
    run_steps(S.cmd(S.bind("x", S.ret(1), S.ret(S.fvar("x")))), None, State(), 10, trace=lines.append)
    assert lines == ["CBind 0", "CRet 1", "value 1 1", "CRet 1", "value 1 1", "value 1 0"]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_opsem_matches_denote_when_both_terminate(seed):
    p, s0 = gen_program(GenConfig(seed=seed))
    d = denote_cmd(p.main, p, s0, 500)
    o = run_steps(p.main, p, s0, 50_000)
    if d is not BOTTOM and o is not BOTTOM:
        assert d == o


# -- shallow combinators --

def test_deref_next_reifies_to_the_expected_ast():
    expected = parse("(program (main (bind ptr (read-var node) (bind val (read-ptr "
                     "(ptr-shift (fvar ptr) (nat 1))) (ret (fvar val))))))").main
    assert S.deref_next().deep == expected


def test_shallow_and_deep_agree():
    c = S.bind("p", S.alloc(2, 3), S.seq(S.write_ptr(S.shift(S.fvar("p"), 1), 9),
                                         S.read_ptr(S.shift(S.fvar("p"), 1))))
    assert c.run() == denote_cmd(c.deep, None, State(), 1000)
    assert c.run().value == Nat(9)


def test_combinators_reject_misuse():
    with pytest.raises(TypeError):
        S.ret(S.ret(1))
    with pytest.raises(TypeError):
        S.alloc(S.nat(2), 0)
    with pytest.raises(TypeError):
        S.bind(3, S.ret(1), S.ret(2))
    with pytest.raises(TypeError):
        S.seq(S.ret(1))


def test_build_list_layout():
    r = S.build_list([5, 6], "l", S.ret(S.fvar("l"))).run()
    h = r.state.heap.cells
    assert r.value == Ptr(2, 0)
    assert h == {(1, 0): Nat(6), (1, 1): NULL, (2, 0): Nat(5), (2, 1): Ptr(1, 0)}


def test_reverse_empty_list():
    r = denote_program(S.reverse_list_program([]))
    assert r.value == NULL and r.state.heap.cells == {}
