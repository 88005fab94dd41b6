import pytest

from genprog import random_program
from loopbench.emitter import emit_expr, emit_source
from loopbench.ir import BinOp, Cast, FloatLit, IntLit, Var
from loopbench.kernels import IR_KINDS, RUNTIME_KINDS, KernelSpec, generate
from loopbench.parser import parse_program


def spec_for(kind):
    if kind in ("matmul-naive", "matmul-reordered", "stencil2d"):
        return KernelSpec(kind=kind, n=4)
    if kind in RUNTIME_KINDS:
        if kind == "par-constructs":
            return KernelSpec(kind=kind, iterations=2, num_tasks=3,
                              max_task_size_us=10, num_threads=2,
                              construct="taskloop")
        return KernelSpec(kind=kind, waittime_us=50)
    return KernelSpec(kind=kind, length=6)


@pytest.mark.parametrize("kind", IR_KINDS + RUNTIME_KINDS)
def test_round_trip_over_generated_kernels(kind):
    program = generate(spec_for(kind))
    assert parse_program(emit_source(program)) == program


def test_emission_is_deterministic():
    program = generate(KernelSpec(kind="stencil2d", n=8))
    assert emit_source(program) == emit_source(program)


def test_step_one_prints_increment_sugar():
    text = emit_source(generate(KernelSpec(kind="array-init", length=4)))
    assert "for (int i = 0; i < len; i++) {" in text


def test_clamp_prints_as_ternary():
    expr = BinOp("min", BinOp("+", Var("r0"), IntLit(8)), Var("N"))
    assert emit_expr(expr) == "r0 + 8 > N ? N : r0 + 8"


def test_max_and_comparison_ternaries():
    assert emit_expr(BinOp("max", Var("a"), Var("b"))) == "a < b ? b : a"
    assert emit_expr(BinOp("lt", Var("a"), Var("b"))) == "a < b ? 1 : 0"


def test_structure_preserving_parentheses():
    right_nested = BinOp("+", Var("a"), BinOp("+", Var("b"), Var("c")))
    assert emit_expr(right_nested) == "a + (b + c)"
    left_nested = BinOp("+", BinOp("+", Var("a"), Var("b")), Var("c"))
    assert emit_expr(left_nested) == "a + b + c"
    assert emit_expr(BinOp("*", Var("a"), BinOp("+", Var("b"), IntLit(1)))) \
        == "a * (b + 1)"
    assert emit_expr(Cast("float", BinOp("+", Var("i"), IntLit(1)))) \
        == "(float)(i + 1)"


def test_negative_literals_round_trip():
    expr = BinOp("-", Var("a"), IntLit(-3))
    text = emit_expr(expr)
    program = parse_program(f"int r[n];\nfor (int i = 0; i < n; i++) r[i] = {text.replace('a', 'i')};\n")
    assert program.body[0].body[0].value == BinOp("-", Var("i"), IntLit(-3))


def test_float_literals_keep_full_precision():
    assert emit_expr(FloatLit(9.0)) == "9.0"
    assert emit_expr(FloatLit(1.7976931348623157e308)) == "1.7976931348623157e+308"


@pytest.mark.parametrize("seed", range(12))
def test_round_trip_over_random_programs(seed):
    program = random_program(seed)
    assert parse_program(emit_source(program)) == program


def test_directive_lines_precede_their_loop():
    source = ("#pragma omp tile sizes(2, 2)\n"
              "for (int i = 0; i < n; i++) {\n"
              "  for (int j = 0; j < n; j++) {\n"
              "    a[i * n + j] = i + j;\n  }\n}\n")
    program = parse_program("int a[n * n];\n" + source)
    lines = emit_source(program).splitlines()
    pragma_at = lines.index("#pragma omp tile sizes(2, 2)")
    assert lines[pragma_at + 1].startswith("for (int i")
