from gallinac import ast as A
from gallinac.fuzz import (
    Budgets, GenConfig, check_kleene, differential_run, gen_loop_instance, gen_program,
    shrink, validate,
)
from gallinac.sexpr import parse, serialize
from gallinac.shallow import reverse_list_program
from gallinac.state import State


def test_generation_is_deterministic():
    a, sa = gen_program(GenConfig(seed=42))
    b, sb = gen_program(GenConfig(seed=42))
    assert serialize(a) == serialize(b) and sa == sb


def test_depth_zero_is_straight_line():
    for seed in range(50):
        p, _ = gen_program(GenConfig(seed=seed, max_depth=0))
        kinds = {type(c) for c in A.walk(p.main)}
        assert A.CWhile not in kinds and A.CIf not in kinds and not p.functions


def test_generated_programs_are_well_formed():
    for seed in range(10_000):
        p, _ = gen_program(GenConfig(seed=seed))
        assert A.well_formed(p) == [], seed


def test_prologue_allocates_at_most_eight_cells():
    for seed in range(200):
        p, _ = gen_program(GenConfig(seed=seed))
        c, cells = p.main, 0
        while isinstance(c, A.CBind) and isinstance(c.first, A.CAlloc) and c.name.startswith("p"):
            cells += c.first.n
            c = c.rest
        assert 1 <= cells <= 8


def test_reversal_agrees():
    v = differential_run(reverse_list_program([1, 2, 3]), State())
    assert v.verdict == "agree", v.details
    assert v.outcomes["denote"] == "done ptr(1,0)"


def test_loop_is_all_bottom():
    v = differential_run(A.Program({}, A.CLoop()), State(), Budgets(20, 200, 800))
    assert v.verdict == "all-bottom"
    assert not v.retried


def test_out_of_bounds_write_fails_everywhere():
    p = parse("(program (main (bind p (alloc 1 (nat 0)) (write-ptr (ptr-shift (fvar p) (nat 1)) (nat 3)))))")
    v = differential_run(p, State())
    assert v.verdict == "agree"
    assert all(o.startswith("failed") for o in v.outcomes.values())


def test_budget_mismatch_is_retried():
    # enough fuel for the loop but too few machine steps at the base budget
    p = reverse_list_program(list(range(8)))
    v = differential_run(p, State(), Budgets(fuel=100, steps=50, cm_steps=100_000))
    assert v.retried and v.verdict == "agree"


def test_disagreement_is_reported_with_program():
    p = reverse_list_program([1])
    v = differential_run(p, State(), Budgets(fuel=100, steps=100_000, cm_steps=1))
    # a budget too small even after scaling looks like a disagreement
    assert v.verdict == "disagree" and v.program == serialize(p)


def test_kleene_checks_pass_on_samples():
    for seed in range(30):
        p, s0 = gen_program(GenConfig(seed=seed))
        assert check_kleene(p, s0) == []


def test_loop_instances_terminate():
    for seed in range(10):
        pw, pu = gen_loop_instance(GenConfig(seed=seed))
        assert isinstance(pw.main, (A.CBind, A.CVar))
        assert serialize(pw) != serialize(pu)


def test_shrink_keeps_failure_and_well_formedness():
    p, s0 = gen_program(GenConfig(seed=3))

    def has_alloc(q, _):
        return any(isinstance(c, A.CAlloc) for c in A.walk(q.main))

    small = shrink(p, s0, has_alloc)
    assert A.well_formed(small) == []
    assert has_alloc(small, s0)
    assert A.program_size(small) <= A.program_size(p)
    assert A.program_size(small) <= 3


def test_validate_report_is_deterministic():
    a = validate(20, 9)
    b = validate(20, 9)
    assert a == b and a["ok"]
    assert [c["index"] for c in a["cases"]] == list(range(20))
