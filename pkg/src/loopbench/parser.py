"""Parser for the restricted C-like kernel language with omp pragma lines.

Accepted surface:

* top-level bare declarations (``int N;``, ``float A[N*N];``) become
  program parameters,
* ``for (int i = 0; i < N; i++)`` / ``for (i = 0; i < N; i += 2)``
  canonical loops (the index is always normalized to loop scope),
* assignments, compound assignments, initialized declarations, blocks,
  and the ``stall_us(...)`` intrinsic,
* ``#pragma omp tile ...`` / ``#pragma omp unroll ...`` transformation
  directives attached to the loop that follows them,
* other ``#pragma omp`` lines (parallel, single, task, ...) preserved as
  opaque runtime annotations.

Comments (``// ...``) are skipped and never preserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ir import (
    Annotated, ArrayRead, Assign, BinOp, Block, Cast, CompoundAssign,
    DeclInit, Directive, Expr, FloatLit, IntLit, Loop, Param, Pragma,
    Program, Stall, Stmt, TILE, UNROLL_FULL, UNROLL_PARTIAL, Var,
    iter_loops,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0


class ParseError(Exception):
    """Raised for any token or construct outside the supported grammar."""

    def __init__(self, kind: str, message: str, span: SourceSpan):
        super().__init__(f"{span.line}:{span.column}: {message}")
        self.kind = kind  # lex | syntax | unsupported-construct | bad-pragma
        self.message = message
        self.span = span


# --------------------------------------------------------------------------
# Lexer

_KEYWORDS = {"for", "int", "float"}
_TWO_CHAR = ("++", "+=", "-=", "*=", "/=")
_ONE_CHAR = "(){}[];,=+-*/%<>?:"

_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_]\w*")


@dataclass(frozen=True)
class Token:
    kind: str  # "num" | "ident" | "kw" | "punct" | "pragma" | "eof"
    text: str
    line: int
    col: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, len(self.text))


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        stripped = line.strip()
        if stripped.startswith("#"):
            tokens.append(Token("pragma", stripped, lineno, line.index("#") + 1))
            continue
        pos = 0
        while pos < len(line):
            ch = line[pos]
            if ch.isspace():
                pos += 1
                continue
            col = pos + 1
            m = _NUMBER_RE.match(line, pos)
            if m and ch.isdigit():
                tokens.append(Token("num", m.group(0), lineno, col))
                pos = m.end()
                continue
            m = _IDENT_RE.match(line, pos)
            if m:
                kind = "kw" if m.group(0) in _KEYWORDS else "ident"
                tokens.append(Token(kind, m.group(0), lineno, col))
                pos = m.end()
                continue
            two = line[pos:pos + 2]
            if two in _TWO_CHAR:
                tokens.append(Token("punct", two, lineno, col))
                pos += 2
                continue
            if ch in _ONE_CHAR:
                tokens.append(Token("punct", ch, lineno, col))
                pos += 1
                continue
            raise ParseError("lex", f"unexpected character {ch!r}",
                             SourceSpan(lineno, col, 1))
    last_line = source.count("\n") + 1
    tokens.append(Token("eof", "", last_line, 1))
    return tokens


# --------------------------------------------------------------------------
# Pragma classification

_OPAQUE_STANDALONE = {"barrier", "taskwait"}
_OPAQUE_ATTACHED = {"parallel", "single", "task", "taskloop", "for", "master"}


def _parse_directive_pragma(token: Token) -> Directive | None:
    """Return a Directive for tile/unroll pragmas, None for opaque omp ones."""
    words = token.text.split()
    if len(words) < 2 or words[0] != "#pragma":
        raise ParseError("bad-pragma", "only '#pragma omp ...' lines are supported",
                         token.span)
    if words[1] != "omp":
        raise ParseError("bad-pragma", f"unsupported pragma family '{words[1]}'",
                         token.span)
    if len(words) < 3:
        raise ParseError("bad-pragma", "empty omp pragma", token.span)
    head = words[2]
    rest = token.text.split(None, 3)[3] if len(words) > 3 else ""
    if head == "tile":
        return _parse_tile_clauses(rest, token)
    if head == "unroll":
        return _parse_unroll_clauses(rest, token)
    if head in _OPAQUE_STANDALONE or head in _OPAQUE_ATTACHED:
        return None
    raise ParseError("bad-pragma", f"unknown omp construct '{head}'", token.span)


def _parse_tile_clauses(rest: str, token: Token) -> Directive:
    text = rest.strip()
    nocheck = False
    if text.endswith("nocheck"):
        nocheck = True
        text = text[: -len("nocheck")].strip()
    m = re.fullmatch(r"(?:sizes\s*)?\(\s*([0-9]+(?:\s*,\s*[0-9]+)*)\s*\)", text)
    if not m:
        raise ParseError("bad-pragma", "tile expects sizes(...) with integer sizes",
                         token.span)
    sizes = tuple(int(s) for s in m.group(1).split(","))
    if any(s < 1 for s in sizes):
        raise ParseError("bad-pragma", "tile sizes must be >= 1", token.span)
    return Directive(kind=TILE, sizes=sizes, nocheck=nocheck)


def _parse_reduction_clause(body: str, token: Token) -> tuple[str, str]:
    parts = [p.strip() for p in body.split(":")]
    if len(parts) != 2:
        raise ParseError("bad-pragma", "reduction expects '(var:op)'", token.span)
    ops = {"+", "*", "min", "max"}
    a, b = parts
    if a in ops and b not in ops:
        return b, a
    if b in ops and a not in ops:
        return a, b
    raise ParseError("bad-pragma",
                     "reduction needs one variable and one of + * min max",
                     token.span)


def _parse_unroll_clauses(rest: str, token: Token) -> Directive:
    text = rest.strip()
    if text.startswith("full"):
        remainder = text[len("full"):].strip()
        if remainder:
            raise ParseError("bad-pragma", "unroll full takes no further clauses",
                             token.span)
        return Directive(kind=UNROLL_FULL)
    m = re.match(r"partial\s*\(\s*([0-9]+)\s*\)", text)
    if not m:
        raise ParseError("bad-pragma", "unroll expects 'partial(f)' or 'full'",
                         token.span)
    factor = int(m.group(1))
    if factor < 1:
        raise ParseError("bad-pragma", "unroll factor must be >= 1", token.span)
    tail = text[m.end():].strip()
    nocheck = False
    reduction = None
    while tail:
        if tail.startswith("nocheck"):
            nocheck = True
            tail = tail[len("nocheck"):].strip()
            continue
        rm = re.match(r"reduction\s*\(([^)]*)\)", tail)
        if rm:
            reduction = _parse_reduction_clause(rm.group(1), token)
            tail = tail[rm.end():].strip()
            continue
        raise ParseError("bad-pragma", f"unknown unroll clause near '{tail}'",
                         token.span)
    return Directive(kind=UNROLL_PARTIAL, factor=factor, nocheck=nocheck,
                     reduction=reduction)


def _is_standalone_pragma(text: str) -> bool:
    words = text.split()
    return len(words) >= 3 and words[2] in _OPAQUE_STANDALONE


# --------------------------------------------------------------------------
# Free-identifier inference

def _free_scalars(params: list[Param], body: tuple[Stmt, ...]) -> list[str]:
    """Scalar names used but never declared, in first-use order."""
    declared = {p.name for p in params}
    order: list[str] = []
    found: set[str] = set(declared)

    def note(name: str) -> None:
        if name not in found:
            found.add(name)
            order.append(name)

    def scan_expr(expr: Expr, bound: set[str]) -> None:
        if isinstance(expr, Var):
            if expr.name not in bound:
                note(expr.name)
        elif isinstance(expr, ArrayRead):
            scan_expr(expr.index, bound)
        elif isinstance(expr, BinOp):
            scan_expr(expr.lhs, bound)
            scan_expr(expr.rhs, bound)
        elif isinstance(expr, Cast):
            scan_expr(expr.inner, bound)

    def scan_stmts(stmts: tuple[Stmt, ...], bound: set[str]) -> None:
        bound = set(bound)
        for stmt in stmts:
            if isinstance(stmt, (Assign, CompoundAssign)):
                scan_expr(stmt.target, bound)
                scan_expr(stmt.value, bound)
            elif isinstance(stmt, DeclInit):
                scan_expr(stmt.init, bound)
                bound.add(stmt.name)
            elif isinstance(stmt, Loop):
                scan_expr(stmt.lower, bound)
                scan_expr(stmt.upper, bound)
                scan_stmts(stmt.body, bound | {stmt.index})
            elif isinstance(stmt, Block):
                scan_stmts(stmt.stmts, bound)
            elif isinstance(stmt, Stall):
                scan_expr(stmt.micros, bound)
            elif isinstance(stmt, Annotated):
                scan_stmts((stmt.stmt,), bound)

    for param in params:
        if param.extent is not None:
            scan_expr(param.extent, set())
    scan_stmts(body, set())
    return order


# --------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.params: list[Param] = []
        self.param_names: set[str] = set()
        # maps id(Loop) -> Directive until site ids are assigned
        self.loop_directives: list[tuple[Loop, Directive]] = []

    # -- token plumbing ----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token.kind == "punct" and token.text == text:
            return self.advance()
        raise ParseError("syntax", f"expected '{text}', found '{token.text or 'end of input'}'",
                         token.span)

    def expect_kw(self, word: str) -> Token:
        token = self.peek()
        if token.kind == "kw" and token.text == word:
            return self.advance()
        raise ParseError("syntax", f"expected '{word}'", token.span)

    def at(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "punct" and token.text == text

    # -- program -----------------------------------------------------------

    def parse_program(self) -> Program:
        body = tuple(self.parse_stmt_list(top_level=True, stop="eof"))
        # free scalar identifiers (N, len, ...) become int parameters, listed
        # before the declared ones so emitted text declares them first
        inferred = tuple(Param(name, "int", None)
                         for name in _free_scalars(self.params, body))
        program = Program(params=inferred + tuple(self.params), body=body)
        directives: dict[str, Directive] = {}
        for k, loop in enumerate(iter_loops(program.body)):
            for target, directive in self.loop_directives:
                if target is loop:
                    directives[f"L{k}"] = directive
        return Program(params=program.params, body=program.body,
                       directives=directives)

    def parse_stmt_list(self, top_level: bool, stop: str) -> list[Stmt]:
        stmts: list[Stmt] = []
        while True:
            token = self.peek()
            if stop == "eof" and token.kind == "eof":
                break
            if stop == "}" and self.at("}"):
                break
            if token.kind == "eof":
                raise ParseError("syntax", "unexpected end of input", token.span)
            stmt = self.parse_stmt(top_level)
            if stmt is not None:
                stmts.append(stmt)
        return stmts

    def parse_stmt(self, top_level: bool = False) -> Stmt | None:
        token = self.peek()
        if token.kind == "pragma":
            return self.parse_pragma_run(top_level)
        if token.kind == "kw" and token.text == "for":
            return self.parse_loop()
        if token.kind == "kw" and token.text in ("int", "float"):
            return self.parse_decl(top_level)
        if self.at("{"):
            return self.parse_block()
        if token.kind == "ident":
            return self.parse_simple_stmt()
        raise ParseError("syntax", f"unexpected token '{token.text}'", token.span)

    def parse_pragma_run(self, top_level: bool) -> Stmt | None:
        """Consume consecutive pragma lines and attach them appropriately."""
        annotations: list[str] = []
        directive: Directive | None = None
        directive_token: Token | None = None
        while self.peek().kind == "pragma":
            token = self.advance()
            parsed = _parse_directive_pragma(token)
            if parsed is not None:
                if directive is not None:
                    raise ParseError("bad-pragma",
                                     "multiple transformation directives on one loop",
                                     token.span)
                directive = parsed
                directive_token = token
            elif _is_standalone_pragma(token.text):
                if directive is not None:
                    raise ParseError("bad-pragma",
                                     "transformation directive must precede a loop",
                                     directive_token.span)
                if annotations:
                    raise ParseError("bad-pragma",
                                     "annotation pragma has no statement to attach to",
                                     token.span)
                return Pragma(token.text)
            else:
                annotations.append(token.text)
        next_token = self.peek()
        if next_token.kind == "eof" or (next_token.kind == "punct" and next_token.text == "}"):
            raise ParseError("bad-pragma", "pragma has no statement to attach to",
                             next_token.span)
        stmt = self.parse_stmt(top_level)
        if stmt is None:
            raise ParseError("bad-pragma", "pragma attached to a declaration",
                             next_token.span)
        if directive is not None:
            if not isinstance(stmt, Loop):
                raise ParseError("bad-pragma",
                                 "transformation directive must precede a loop",
                                 directive_token.span)
            self.loop_directives.append((stmt, directive))
        if annotations:
            return Annotated(tuple(annotations), stmt)
        return stmt

    # -- declarations --------------------------------------------------------

    def parse_decl(self, top_level: bool) -> Stmt | None:
        type_token = self.advance()
        decl_type = type_token.text
        name_token = self.peek()
        if name_token.kind != "ident":
            raise ParseError("syntax", "expected identifier after type", name_token.span)
        self.advance()
        name = name_token.text
        if self.at("["):
            self.advance()
            extent = self.parse_expr()
            self.expect("]")
            self.expect(";")
            if not top_level:
                raise ParseError("unsupported-construct",
                                 "array declarations are only supported at top level",
                                 name_token.span)
            self._add_param(Param(name, f"{decl_type}-array", extent), name_token)
            return None
        if self.at("="):
            self.advance()
            init = self.parse_expr()
            self.expect(";")
            return DeclInit(name, decl_type, init)
        if self.at(","):
            raise ParseError("unsupported-construct",
                             "multiple declarators in one declaration are unsupported",
                             self.peek().span)
        self.expect(";")
        if not top_level:
            raise ParseError("unsupported-construct",
                             "declarations inside a body require an initializer",
                             name_token.span)
        if decl_type != "int":
            raise ParseError("unsupported-construct",
                             "scalar parameters must be int", name_token.span)
        self._add_param(Param(name, "int", None), name_token)
        return None

    def _add_param(self, param: Param, token: Token) -> None:
        if param.name in self.param_names:
            raise ParseError("syntax", f"duplicate declaration of '{param.name}'",
                             token.span)
        self.params.append(param)
        self.param_names.add(param.name)

    # -- loops ---------------------------------------------------------------

    def parse_loop(self) -> Loop:
        for_token = self.expect_kw("for")
        self.expect("(")
        if self.at(";"):
            raise ParseError("unsupported-construct",
                             "loop must have the canonical form 'index = lower'",
                             self.peek().span)
        if self.peek().kind == "kw" and self.peek().text in ("int", "float"):
            if self.peek().text != "int":
                raise ParseError("unsupported-construct", "loop index must be int",
                                 self.peek().span)
            self.advance()
        index_token = self.peek()
        if index_token.kind != "ident":
            raise ParseError("syntax", "expected loop index identifier", index_token.span)
        self.advance()
        index = index_token.text
        self.expect("=")
        lower = self.parse_expr()
        self.expect(";")
        cond_var = self.peek()
        if cond_var.kind != "ident" or cond_var.text != index:
            raise ParseError("unsupported-construct",
                             f"loop condition must test index '{index}'", cond_var.span)
        self.advance()
        cmp_token = self.peek()
        if not self.at("<"):
            raise ParseError("unsupported-construct",
                             "loop condition must use '<'", cmp_token.span)
        self.advance()
        upper = self.parse_expr()
        self.expect(";")
        update_var = self.peek()
        if update_var.kind != "ident" or update_var.text != index:
            raise ParseError("unsupported-construct",
                             f"loop update must modify index '{index}'", update_var.span)
        self.advance()
        if self.at("++"):
            self.advance()
            step = 1
        elif self.at("+="):
            self.advance()
            step_token = self.peek()
            if step_token.kind != "num" or "." in step_token.text:
                raise ParseError("unsupported-construct",
                                 "loop step must be an integer literal", step_token.span)
            self.advance()
            step = int(step_token.text)
        else:
            raise ParseError("unsupported-construct",
                             "loop update must be '++' or '+= literal'",
                             self.peek().span)
        self.expect(")")
        if self.at("{"):
            block = self.parse_block()
            body = block.stmts
        else:
            stmt = self.parse_stmt()
            if stmt is None:
                raise ParseError("syntax", "loop body must be a statement", for_token.span)
            body = (stmt,)
        return Loop(index=index, lower=lower, upper=upper, step=step, body=body)

    def parse_block(self) -> Block:
        self.expect("{")
        stmts = self.parse_stmt_list(top_level=False, stop="}")
        self.expect("}")
        return Block(tuple(stmts))

    # -- simple statements -----------------------------------------------------

    def parse_simple_stmt(self) -> Stmt:
        name_token = self.advance()
        name = name_token.text
        if name == "stall_us" and self.at("("):
            self.advance()
            micros = self.parse_expr()
            self.expect(")")
            self.expect(";")
            return Stall(micros)
        target: Expr = Var(name)
        if self.at("["):
            self.advance()
            idx = self.parse_expr()
            self.expect("]")
            target = ArrayRead(name, idx)
        op_token = self.peek()
        if self.at("="):
            self.advance()
            value = self.parse_expr()
            self.expect(";")
            return Assign(target, value)
        for compound in ("+=", "-=", "*=", "/="):
            if self.at(compound):
                self.advance()
                value = self.parse_expr()
                self.expect(";")
                return CompoundAssign(target, compound[0], value)
        raise ParseError("syntax", "expected an assignment operator", op_token.span)

    # -- expressions -------------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_ternary()

    def parse_ternary(self) -> Expr:
        lhs = self.parse_additive()
        if not (self.at(">") or self.at("<")):
            return lhs
        cmp_token = self.advance()
        rhs = self.parse_additive()
        self.expect("?")
        then_expr = self.parse_expr()
        self.expect(":")
        else_expr = self.parse_expr()
        if cmp_token.text == ">":
            if then_expr == rhs and else_expr == lhs:
                return BinOp("min", lhs, rhs)
            if then_expr == lhs and else_expr == rhs:
                return BinOp("max", lhs, rhs)
            if then_expr == IntLit(1) and else_expr == IntLit(0):
                return BinOp("lt", rhs, lhs)
        else:
            if then_expr == rhs and else_expr == lhs:
                return BinOp("max", lhs, rhs)
            if then_expr == lhs and else_expr == rhs:
                return BinOp("min", lhs, rhs)
            if then_expr == IntLit(1) and else_expr == IntLit(0):
                return BinOp("lt", lhs, rhs)
        raise ParseError("unsupported-construct",
                         "only clamp (a > b ? b : a) and comparison (a < b ? 1 : 0) "
                         "ternaries are supported", cmp_token.span)

    def parse_additive(self) -> Expr:
        expr = self.parse_multiplicative()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.parse_multiplicative()
            expr = BinOp(op, expr, rhs)
        return expr

    def parse_multiplicative(self) -> Expr:
        expr = self.parse_unary()
        while self.at("*") or self.at("/") or self.at("%"):
            op = self.advance().text
            rhs = self.parse_unary()
            expr = BinOp(op, expr, rhs)
        return expr

    def parse_unary(self) -> Expr:
        if self.at("-"):
            minus = self.advance()
            inner = self.parse_unary()
            if isinstance(inner, IntLit):
                return IntLit(-inner.value)
            if isinstance(inner, FloatLit):
                return FloatLit(-inner.value)
            return BinOp("-", IntLit(0), inner)
        if self.at("(") and self.peek(1).kind == "kw" \
                and self.peek(1).text in ("int", "float") \
                and self.peek(2).kind == "punct" and self.peek(2).text == ")":
            self.advance()
            to = self.advance().text
            self.advance()
            return Cast(to, self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        token = self.peek()
        if token.kind == "num":
            self.advance()
            if "." in token.text or "e" in token.text or "E" in token.text:
                return FloatLit(float(token.text))
            return IntLit(int(token.text))
        if token.kind == "ident":
            self.advance()
            if self.at("["):
                self.advance()
                idx = self.parse_expr()
                self.expect("]")
                return ArrayRead(token.text, idx)
            return Var(token.text)
        if self.at("("):
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        raise ParseError("syntax", f"expected an expression, found '{token.text or 'end of input'}'",
                         token.span)


def parse_program(source: str) -> Program:
    """Parse kernel source into a Program; raises ParseError with a span."""
    return _Parser(tokenize(source)).parse_program()
