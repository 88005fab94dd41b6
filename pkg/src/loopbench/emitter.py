"""Deterministic C-text emission for Program IR.

Output is a C99-compatible fragment: array parameters print as top-level
declarations, loops always print braces with 2-space indentation, pragmas
print on the line before their loop, and clamp expressions use the ternary
form (a > b ? b : a). Emitting the same program twice yields byte-identical
text, and the text re-parses to a structurally identical program.
"""

from __future__ import annotations

from .ir import (
    Annotated, ArrayRead, Assign, BinOp, Block, Cast, CompoundAssign,
    DeclInit, Directive, Expr, FloatLit, IntLit, Loop, Param, Pragma,
    Program, Stall, Stmt, TILE, UNROLL_FULL, UNROLL_PARTIAL, Var,
)

# precedence levels used to decide parenthesization
_TERNARY, _ADD, _MUL, _UNARY, _ATOM = 0, 1, 2, 3, 4

_BINOP_PREC = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "%": _MUL}


def _prec(expr: Expr) -> int:
    if isinstance(expr, (Var, ArrayRead)):
        return _ATOM
    if isinstance(expr, IntLit):
        return _ATOM if expr.value >= 0 else _UNARY
    if isinstance(expr, FloatLit):
        return _ATOM if expr.value >= 0 else _UNARY
    if isinstance(expr, Cast):
        return _UNARY
    if isinstance(expr, BinOp):
        return _BINOP_PREC.get(expr.op, _TERNARY)
    raise ValueError(f"unknown expression node {type(expr).__name__}")


def _float_text(value: float) -> str:
    text = repr(value)
    return text


def emit_expr(expr: Expr) -> str:
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, FloatLit):
        return _float_text(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, ArrayRead):
        return f"{expr.array}[{emit_expr(expr.index)}]"
    if isinstance(expr, Cast):
        return f"({expr.to}){_child(expr.inner, _UNARY)}"
    if isinstance(expr, BinOp):
        if expr.op in _BINOP_PREC:
            level = _BINOP_PREC[expr.op]
            left = _child(expr.lhs, level)
            # parenthesize same-precedence right operands so the structure
            # survives a left-associative re-parse
            right = _child(expr.rhs, level + 1)
            return f"{left} {expr.op} {right}"
        a = _child(expr.lhs, _ADD)
        b = _child(expr.rhs, _ADD)
        if expr.op == "min":
            return f"{a} > {b} ? {b} : {a}"
        if expr.op == "max":
            return f"{a} < {b} ? {b} : {a}"
        if expr.op == "lt":
            return f"{a} < {b} ? 1 : 0"
    raise ValueError(f"unknown expression node {type(expr).__name__}")


def _child(expr: Expr, minimum: int) -> str:
    text = emit_expr(expr)
    if _prec(expr) < minimum:
        return f"({text})"
    return text


def emit_directive(directive: Directive) -> str:
    if directive.kind == TILE:
        sizes = ", ".join(str(s) for s in directive.sizes)
        text = f"#pragma omp tile sizes({sizes})"
        if directive.nocheck:
            text += " nocheck"
        return text
    if directive.kind == UNROLL_FULL:
        return "#pragma omp unroll full"
    if directive.kind == UNROLL_PARTIAL:
        text = f"#pragma omp unroll partial({directive.factor})"
        if directive.nocheck:
            text += " nocheck"
        if directive.reduction is not None:
            var, op = directive.reduction
            text += f" reduction({var}:{op})"
        return text
    raise ValueError(f"unknown directive kind '{directive.kind}'")


class _Emitter:
    def __init__(self, program: Program):
        self.program = program
        self.lines: list[str] = []
        self.loop_counter = 0

    def run(self) -> str:
        for param in self.program.params:
            self.lines.append(self._param_line(param))
        self._emit_stmts(self.program.body, 0)
        return "\n".join(self.lines) + "\n"

    def _param_line(self, param: Param) -> str:
        if param.type == "int":
            return f"int {param.name};"
        elem = param.type.split("-")[0]
        return f"{elem} {param.name}[{emit_expr(param.extent)}];"

    def _line(self, indent: int, text: str) -> None:
        self.lines.append("  " * indent + text)

    def _emit_stmts(self, stmts: tuple[Stmt, ...], indent: int) -> None:
        for stmt in stmts:
            self._emit_stmt(stmt, indent)

    def _emit_stmt(self, stmt: Stmt, indent: int) -> None:
        if isinstance(stmt, Assign):
            self._line(indent, f"{emit_expr(stmt.target)} = {emit_expr(stmt.value)};")
        elif isinstance(stmt, CompoundAssign):
            self._line(indent,
                       f"{emit_expr(stmt.target)} {stmt.op}= {emit_expr(stmt.value)};")
        elif isinstance(stmt, DeclInit):
            self._line(indent, f"{stmt.type} {stmt.name} = {emit_expr(stmt.init)};")
        elif isinstance(stmt, Stall):
            self._line(indent, f"stall_us({emit_expr(stmt.micros)});")
        elif isinstance(stmt, Pragma):
            self._line(indent, stmt.text)
        elif isinstance(stmt, Annotated):
            for pragma in stmt.pragmas:
                self._line(indent, pragma)
            self._emit_stmt(stmt.stmt, indent)
        elif isinstance(stmt, Block):
            self._line(indent, "{")
            self._emit_stmts(stmt.stmts, indent + 1)
            self._line(indent, "}")
        elif isinstance(stmt, Loop):
            site = f"L{self.loop_counter}"
            self.loop_counter += 1
            directive = self.program.directives.get(site)
            if directive is not None:
                self._line(indent, emit_directive(directive))
            update = f"{stmt.index}++" if stmt.step == 1 else f"{stmt.index} += {stmt.step}"
            header = (f"for (int {stmt.index} = {emit_expr(stmt.lower)}; "
                      f"{stmt.index} < {emit_expr(stmt.upper)}; {update}) {{")
            self._line(indent, header)
            self._emit_stmts(stmt.body, indent + 1)
            self._line(indent, "}")
        else:
            raise ValueError(f"unknown statement node {type(stmt).__name__}")


def emit_source(program: Program) -> str:
    """Render a validated program as deterministic C-compatible text."""
    return _Emitter(program).run()
