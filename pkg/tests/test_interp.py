import math

import pytest

import oracles
from loopbench.interp import (
    EXACT_EQUAL, EQUAL_WITHIN, InterpError, MISMATCH, Store,
    TRACE_PERMUTATION_ONLY, check_equivalence, format_trace, interpret,
    random_inputs, trace, traces_match,
)
from loopbench.ir import Directive, Program, TILE, validate
from loopbench.kernels import KernelSpec, generate
from loopbench.parser import parse_program
from loopbench.transforms import apply_directives

SIMPLE_SRC = "int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = 10 * i;\n"


def tiled(program, site, sizes, nocheck=False):
    marked = Program(program.params, program.body,
                     {site: Directive(kind=TILE, sizes=sizes, nocheck=nocheck)})
    assert validate(marked).ok
    return apply_directives(marked)


def test_direct_evaluation_of_simple_store():
    program = parse_program(SIMPLE_SRC)
    result = interpret(program, Store({"N": 3}, {"n": [0, 0, 0]}))
    assert result.arrays["n"] == [0, 10, 20]


def test_identity_matrix_product():
    program = generate(KernelSpec(kind="matmul-naive", n=2))
    a = [3, -4, 5, 7]
    identity = [1, 0, 0, 1]
    result = interpret(program, Store({"N": 2},
                                      {"A": a, "B": identity, "C": [0] * 4}))
    assert result.arrays["C"] == a


def test_matmul_matches_independent_reference():
    program = generate(KernelSpec(kind="matmul-naive", n=3))
    inputs = random_inputs(program, {"N": 3}, seed=11)
    expected = oracles.matmul_ref(inputs.arrays["A"], inputs.arrays["B"],
                                  inputs.arrays["C"], 3)
    result = interpret(program, inputs)
    assert result.arrays["C"] == expected


def test_stencil_matches_independent_reference():
    program = generate(KernelSpec(kind="stencil2d", n=5))
    inputs = random_inputs(program, {"N": 5}, seed=3)
    expected = oracles.stencil_ref(inputs.arrays["matrix"], 5)
    result = interpret(program, inputs)
    assert result.arrays["matrix"] == pytest.approx(expected, rel=1e-12)


def test_trace_of_simple_loop():
    program = parse_program(SIMPLE_SRC)
    points = trace(program, Store({"N": 3}, {"n": [0, 0, 0]}))
    assert [p.indices for p in points] == [(0,), (1,), (2,)]
    assert all(p.site == "L0" for p in points)


def test_zero_trip_loop_has_empty_trace():
    program = parse_program(SIMPLE_SRC)
    assert trace(program, Store({"N": 0}, {"n": []})) == []


def test_tiled_single_loop_trace_is_a_permutation():
    program = parse_program(SIMPLE_SRC)
    transformed = tiled(program, "L0", (2,))
    store = Store({"N": 4}, {"n": [0] * 4})
    original_points = trace(program, store)
    tiled_points = trace(transformed, store)
    assert traces_match(original_points, tiled_points)
    assert original_points != tiled_points


def test_reflexive_equivalence_is_exact():
    program = parse_program(SIMPLE_SRC)
    report = check_equivalence(program, program,
                               [Store({"N": 5}, {"n": [0] * 5})])
    assert report.verdict == EXACT_EQUAL
    assert report.divergence is None


def test_float_matmul_vs_tiled_is_equal_within_tolerance():
    program = generate(KernelSpec(kind="matmul-naive", n=8, elem="float"))
    transformed = tiled(program, "L0", (4, 4, 4))
    stores = [random_inputs(program, {"N": 8}, seed=s) for s in range(3)]
    report = check_equivalence(program, transformed, stores, rel_tol=1e-6)
    assert report.verdict in (EXACT_EQUAL, EQUAL_WITHIN)


def test_tiled_stencil_is_trace_permutation_only():
    program = generate(KernelSpec(kind="stencil2d", n=8))
    transformed = tiled(program, "L0", (4, 4))
    stores = [random_inputs(program, {"N": 8}, seed=s) for s in range(2)]
    report = check_equivalence(program, transformed, stores, rel_tol=1e-6)
    assert report.verdict == TRACE_PERMUTATION_ONLY


def test_same_trace_with_different_values_is_permutation_only():
    # the comparator certifies iteration-space agreement, not body identity:
    # identical traces with diverging stores classify as order-dependence
    p = parse_program(SIMPLE_SRC)
    q = parse_program("int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = 11 * i;\n")
    report = check_equivalence(p, q, [Store({"N": 3}, {"n": [0] * 3})])
    assert report.verdict == TRACE_PERMUTATION_ONLY


def test_mismatch_carries_a_witness():
    p = parse_program(SIMPLE_SRC)
    q = parse_program("int n[N];\nfor (int i = 0; i < N - 1; i++)\n  n[i] = 10 * i;\n")
    report = check_equivalence(p, q, [Store({"N": 3}, {"n": [0] * 3})])
    assert report.verdict == MISMATCH
    assert report.divergence is not None
    assert report.divergence.location == "n[2]"
    assert report.divergence.expected == 20
    assert report.divergence.actual == 0


def test_verdicts_are_symmetric_for_exact_and_mismatch():
    p = parse_program(SIMPLE_SRC)
    q = parse_program("int n[N];\nfor (int i = 0; i < N - 1; i++)\n  n[i] = 10 * i;\n")
    store = [Store({"N": 3}, {"n": [0] * 3})]
    assert check_equivalence(p, q, store).verdict \
        == check_equivalence(q, p, store).verdict == MISMATCH
    assert check_equivalence(p, p, store).verdict \
        == check_equivalence(p, p, store).verdict == EXACT_EQUAL


def test_determinism_across_runs():
    program = generate(KernelSpec(kind="matmul-naive", n=4))
    inputs = random_inputs(program, {"N": 4}, seed=9)
    first = interpret(program, inputs)
    second = interpret(program, inputs)
    assert first.scalars == second.scalars
    assert first.arrays == second.arrays
    assert trace(program, inputs) == trace(program, inputs)


def test_out_of_bounds_read_is_an_error():
    program = parse_program("int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = n[i + 1];\n")
    with pytest.raises(InterpError, match="out-of-bounds"):
        interpret(program, Store({"N": 2}, {"n": [0, 0]}))


def test_integer_division_by_zero_is_an_error():
    program = parse_program("int d;\nint r = 1 / d;\n")
    with pytest.raises(InterpError, match="division by zero"):
        interpret(program, Store({"d": 0}, {}))


def test_float_division_by_zero_follows_ieee():
    program = parse_program("int len;\nfloat sum = 0;\n"
                            "for (int i = 0; i < len; i++)\n"
                            "  sum += 1 / (float)i;\n")
    result = interpret(program, Store({"len": 3}, {}))
    assert math.isinf(result.scalars["sum"])


def test_budget_exhaustion_is_an_error():
    program = parse_program("int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = i;\n")
    with pytest.raises(InterpError, match="budget"):
        interpret(program, Store({"N": 100}, {"n": [0] * 100}), budget=50)


def test_integer_overflow_is_an_error():
    program = parse_program("int big;\nint r = big * big;\n")
    with pytest.raises(InterpError, match="overflow"):
        interpret(program, Store({"big": 2 ** 62}, {}))


def test_stall_accumulates_virtual_time_only():
    program = generate(KernelSpec(kind="inactivity", waittime_us=100))
    result = interpret(program, Store())
    assert result.stall_us == pytest.approx(100 * 10_000)


@pytest.mark.parametrize("a,b,q,r", [
    (7, 2, 3, 1), (-7, 2, -3, -1), (7, -2, -3, 1), (-7, -2, 3, -1),
    (-3, 5, 0, -3), (3, 5, 0, 3),
])
def test_division_truncates_toward_zero(a, b, q, r):
    program = parse_program("int x;\nint y;\nint q = x / y;\nint r = x % y;\n")
    result = interpret(program, Store({"x": a, "y": b}, {}))
    assert result.scalars["q"] == q
    assert result.scalars["r"] == r
    assert q * b + r == a  # the division identity the epilogue relies on


def test_trace_dump_format():
    program = parse_program(SIMPLE_SRC)
    points = trace(program, Store({"N": 2}, {"n": [0, 0]}))
    dump = format_trace(points)
    assert dump == "site=L0 idx=(0) ord=0\nsite=L0 idx=(1) ord=0\n"
