import pytest

from loopbench.ir import (
    Annotated, ArrayRead, Assign, BinOp, Cast, CompoundAssign, DeclInit,
    IntLit, Loop, Pragma, Stall, TILE, UNROLL_FULL, UNROLL_PARTIAL, Var,
    validate,
)
from loopbench.parser import ParseError, parse_program

SIMPLE = """int i;
int n[N];
for(i = 0; i < N; i++)
  n[i] = 10 * i;
"""


def test_simple_loop_parses():
    program = parse_program(SIMPLE)
    loops = [s for s in program.body if isinstance(s, Loop)]
    assert len(loops) == 1
    loop = loops[0]
    assert loop.index == "i"
    assert loop.lower == IntLit(0)
    assert loop.upper == Var("N")
    assert loop.step == 1
    assert loop.body == (Assign(ArrayRead("n", Var("i")),
                                BinOp("*", IntLit(10), Var("i"))),)
    assert validate(program).ok


def test_free_scalars_become_int_params():
    program = parse_program(SIMPLE)
    names = {(p.name, p.type) for p in program.params}
    assert ("N", "int") in names
    assert ("n", "int-array") in names


def test_loop_scoped_index_declaration():
    program = parse_program("int a[m];\nfor (int j = 0; j < m; j += 2) a[j] = j;\n")
    loop = program.body[0]
    assert isinstance(loop, Loop) and loop.step == 2
    assert validate(program).ok


def test_infinite_loop_is_unsupported():
    with pytest.raises(ParseError) as err:
        parse_program("for(;;){}")
    assert err.value.kind == "unsupported-construct"


@pytest.mark.parametrize("header,expected", [
    ("#pragma omp unroll partial(5)",
     dict(kind=UNROLL_PARTIAL, factor=5, nocheck=False, reduction=None)),
    ("#pragma omp unroll partial(5) nocheck",
     dict(kind=UNROLL_PARTIAL, factor=5, nocheck=True, reduction=None)),
    ("#pragma omp unroll full", dict(kind=UNROLL_FULL)),
    ("#pragma omp tile sizes(8, 8, 8)", dict(kind=TILE, sizes=(8, 8, 8))),
    ("#pragma omp tile (4, 4, 4)", dict(kind=TILE, sizes=(4, 4, 4))),
    ("#pragma omp tile sizes(2) nocheck", dict(kind=TILE, sizes=(2,), nocheck=True)),
])
def test_directive_forms(header, expected):
    source = header + "\nfor (int i = 0; i < N; i++)\n  x += i;\n"
    program = parse_program(source)
    directive = program.directives["L0"]
    for key, value in expected.items():
        assert getattr(directive, key) == value


@pytest.mark.parametrize("clause,var,op", [
    ("reduction(sum:+)", "sum", "+"),
    ("reduction(+:sum)", "sum", "+"),
    ("reduction(acc:min)", "acc", "min"),
    ("reduction(max:acc)", "acc", "max"),
])
def test_reduction_clause_accepts_both_orders(clause, var, op):
    source = (f"#pragma omp unroll partial(2) {clause}\n"
              "for (int i = 0; i < N; i++)\n  sum += i;\n")
    program = parse_program(source.replace("sum", var))
    assert program.directives["L0"].reduction == (var, op)


def test_pragma_on_non_loop_is_an_error():
    with pytest.raises(ParseError) as err:
        parse_program("#pragma omp unroll partial(2)\nx = 1;\n")
    assert err.value.kind == "bad-pragma"


def test_trailing_pragma_is_an_error():
    with pytest.raises(ParseError) as err:
        parse_program("#pragma omp unroll partial(2)\n")
    assert err.value.kind == "bad-pragma"


def test_unknown_pragma_family_is_an_error():
    with pytest.raises(ParseError) as err:
        parse_program("#pragma once\nfor (int i = 0; i < N; i++) x = i;\n")
    assert err.value.kind == "bad-pragma"


def test_error_spans_point_into_the_source():
    source = "int a[m];\nfor (int j = 0; j <= m; j++) a[j] = j;\n"
    with pytest.raises(ParseError) as err:
        parse_program(source)
    span = err.value.span
    assert 1 <= span.line <= source.count("\n") + 1
    assert span.column >= 1


def test_opaque_omp_pragmas_are_preserved():
    source = """#pragma omp parallel
{
  #pragma omp master
  stall_us(10);
  #pragma omp barrier
}
"""
    program = parse_program(source)
    region = program.body[0]
    assert isinstance(region, Annotated)
    assert region.pragmas == ("#pragma omp parallel",)
    block = region.stmt
    assert isinstance(block.stmts[0], Annotated)
    assert isinstance(block.stmts[0].stmt, Stall)
    assert block.stmts[1] == Pragma("#pragma omp barrier")


def test_directive_on_an_inner_loop_site():
    source = ("int a[n * n];\n"
              "for (int i = 0; i < n; i++) {\n"
              "  #pragma omp unroll partial(4)\n"
              "  for (int j = 0; j < n; j++)\n"
              "    a[i * n + j] = i + j;\n"
              "}\n")
    program = parse_program(source)
    assert list(program.directives) == ["L1"]
    assert program.directives["L1"].factor == 4
    from loopbench.emitter import emit_source
    assert parse_program(emit_source(program)) == program


def test_comments_are_skipped():
    program = parse_program("// C = A * B\nint a[m];\nfor (int j = 0; j < m; j++) a[j] = j; // init\n")
    assert validate(program).ok


def test_cast_and_division_parse():
    program = parse_program(
        "int len;\nfloat sum = 0;\nfor (int i = 0; i < len; i++)\n"
        "  sum += 1 / (float)i;\n")
    loop = program.body[1]
    stmt = loop.body[0]
    assert isinstance(stmt, CompoundAssign)
    assert stmt.value == BinOp("/", IntLit(1), Cast("float", Var("i")))


def test_clamp_ternary_parses_to_min():
    program = parse_program(
        "int N;\nint r0;\nint rmax = r0 + 8 > N ? N : r0 + 8;\n")
    decl = program.body[0]
    assert isinstance(decl, DeclInit)
    assert decl.init == BinOp("min", BinOp("+", Var("r0"), IntLit(8)), Var("N"))


def test_lexer_rejects_strange_characters():
    with pytest.raises(ParseError) as err:
        parse_program("int a[m];\nfor (int j = 0; j < m; j++) a[j] = j & 1;\n")
    assert err.value.kind == "lex"


def test_float_declaration_without_initializer_is_unsupported():
    with pytest.raises(ParseError) as err:
        parse_program("float x;\n")
    assert err.value.kind == "unsupported-construct"
