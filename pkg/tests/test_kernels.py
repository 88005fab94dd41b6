from fractions import Fraction

import pytest

from loopbench.emitter import emit_source
from loopbench.interp import EXACT_EQUAL, check_equivalence, random_inputs
from loopbench.ir import (CompoundAssign, loop_nest_depth, loop_sites,
                          validate)
from loopbench.kernels import (
    CONSTRUCTS, IR_KINDS, KernelError, KernelSpec, RUNTIME_KINDS,
    emit_kernel_source, emit_runtime_kernel, expected_exec_time, generate,
    inactivity_iterations,
)
from loopbench.parser import parse_program


def test_matmul_naive_structure():
    program = generate(KernelSpec(kind="matmul-naive", n=2))
    sites = loop_sites(program)
    assert loop_nest_depth(sites["L0"]) == 3
    assert [sites[s].index for s in ("L0", "L1", "L2")] == ["row", "col", "k"]
    innermost = sites["L2"].body[0]
    assert isinstance(innermost, CompoundAssign) and innermost.op == "+"
    text = emit_source(program)
    assert "C[row * N + col] += A[row * N + k] * B[k * N + col];" in text


def test_matmul_reordered_swaps_the_inner_loops():
    program = generate(KernelSpec(kind="matmul-reordered", n=2))
    sites = loop_sites(program)
    assert [sites[s].index for s in ("L0", "L1", "L2")] == ["row", "k", "col"]
    text = emit_source(program)
    assert "C[row * N + col] += A[row * N + k] * B[k * N + col];" in text


def test_matmul_orders_are_equivalent_for_integers():
    for n in range(1, 7):
        naive = generate(KernelSpec(kind="matmul-naive", n=n))
        reordered = generate(KernelSpec(kind="matmul-reordered", n=n))
        stores = [random_inputs(naive, {"N": n}, seed=s) for s in (0, 1)]
        assert check_equivalence(naive, reordered, stores).verdict == EXACT_EQUAL


def test_stencil_bounds_and_averaging():
    program = generate(KernelSpec(kind="stencil2d", n=4))
    text = emit_source(program)
    assert "for (int i = 1; i < N - 1; i++) {" in text
    assert "for (int j = 1; j < N - 1; j++) {" in text
    assert text.count("matrix[") == 11  # declaration, nine reads, the write
    assert "matrix[(i - 1) * N + (j - 1)]" in text
    assert "/ 9.0;" in text


def test_dependent_sum_keeps_the_strict_dependence():
    program = generate(KernelSpec(kind="dependent-sum", length=5))
    text = emit_source(program)
    assert "sum = sum + i;" in text


def test_matmul_element_type_is_selectable():
    float_text = emit_source(generate(KernelSpec(kind="matmul-naive", n=2,
                                                 elem="float")))
    int_text = emit_source(generate(KernelSpec(kind="matmul-naive", n=2)))
    assert "float A[N * N];" in float_text
    assert "int A[N * N];" in int_text


@pytest.mark.parametrize("kind", IR_KINDS)
def test_generated_programs_validate_and_round_trip(kind):
    if kind in ("matmul-naive", "matmul-reordered", "stencil2d"):
        spec = KernelSpec(kind=kind, n=3)
    else:
        spec = KernelSpec(kind=kind, length=4)
    program = generate(spec)
    assert validate(program).ok
    assert parse_program(emit_source(program)) == program


def test_invalid_specs_are_rejected():
    with pytest.raises(KernelError):
        generate(KernelSpec(kind="matmul-naive"))
    with pytest.raises(KernelError):
        generate(KernelSpec(kind="par-constructs", iterations=1, num_tasks=1,
                            max_task_size_us=1, num_threads=1,
                            construct="bogus"))
    with pytest.raises(KernelError):
        generate(KernelSpec(kind="unknown"))


def test_expected_exec_time_formula():
    assert expected_exec_time(10, 100, 20, 4) == 2500
    assert expected_exec_time(1, 1, 7, 1) == Fraction(7, 2)
    for args in ((3, 5, 7, 2), (1, 9, 13, 3)):
        assert expected_exec_time(args[0], args[1], args[2], 2 * args[3]) \
            == expected_exec_time(args[0], args[1], args[2], args[3]) / 2


def test_expected_exec_time_is_exact_rational():
    value = expected_exec_time(1, 1, 1, 3)
    assert isinstance(value, Fraction)
    assert value == Fraction(1, 6)


def test_inactivity_iterations():
    assert inactivity_iterations(10) == 100_000
    assert inactivity_iterations(100) == 10_000
    assert inactivity_iterations(1_000_000) == 1
    with pytest.raises(KernelError):
        inactivity_iterations(0)


def test_single_task_generation_kernel_text():
    spec = KernelSpec(kind="par-constructs", iterations=2, num_tasks=4,
                      max_task_size_us=10, num_threads=2,
                      construct="single-task-gen")
    text = emit_runtime_kernel(spec)
    single_at = text.index("#pragma omp single")
    task_at = text.index("#pragma omp task", single_at)
    assert single_at < task_at
    assert "New parallel region for every iteration" in text


def test_parfor_dynamic_kernel_text():
    spec = KernelSpec(kind="par-constructs", iterations=2, num_tasks=4,
                      max_task_size_us=10, num_threads=2,
                      construct="parfor-dynamic")
    text = emit_runtime_kernel(spec)
    assert "#pragma omp parallel for schedule(dynamic)" in text
    assert "schedule(dynamic," not in text  # chunk size left to its default


def test_inactivity_kernel_iteration_count():
    text = emit_runtime_kernel(KernelSpec(kind="inactivity", waittime_us=10))
    assert "int iterations = 100000;" in text
    assert "#pragma omp master" in text
    assert "#pragma omp barrier" in text


def test_runtime_kernels_embed_measurement_hooks_and_spec_header():
    spec = KernelSpec(kind="par-constructs", iterations=1, num_tasks=2,
                      max_task_size_us=5, num_threads=1, construct="taskloop")
    text = emit_runtime_kernel(spec, seed=7)
    assert text.splitlines()[0].startswith("/* kernel-spec: ")
    assert "poll_before" in text and "poll_after" in text
    assert "gettimeofday" in text
    assert "seed=7" in text.splitlines()[0]


@pytest.mark.parametrize("construct", CONSTRUCTS)
def test_runtime_emission_is_deterministic(construct):
    spec = KernelSpec(kind="par-constructs", iterations=1, num_tasks=2,
                      max_task_size_us=5, num_threads=1, construct=construct)
    assert emit_runtime_kernel(spec, seed=3) == emit_runtime_kernel(spec, seed=3)


def test_runtime_emission_rejects_ir_kinds():
    with pytest.raises(KernelError):
        emit_runtime_kernel(KernelSpec(kind="matmul-naive", n=2))


@pytest.mark.parametrize("kind", RUNTIME_KINDS)
def test_runtime_ir_round_trips(kind):
    if kind == "par-constructs":
        spec = KernelSpec(kind=kind, iterations=2, num_tasks=3,
                          max_task_size_us=10, num_threads=2,
                          construct="multi-task-gen")
    else:
        spec = KernelSpec(kind=kind, waittime_us=20)
    program = generate(spec)
    assert validate(program).ok
    assert parse_program(emit_kernel_source(spec)) == program
