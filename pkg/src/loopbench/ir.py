"""Loop-language intermediate representation and its validation rules.

The IR models a restricted C subset: canonical counted loops, scalar and
single-subscript array assignments, integer/float arithmetic, and loop
transformation directives attached to loop sites. All nodes are frozen
dataclasses; values are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional


# --------------------------------------------------------------------------
# Expressions

class Expr:
    """Base class for expression nodes."""


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class FloatLit(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class ArrayRead(Expr):
    """A single-subscript array access; also used as an lvalue."""

    array: str
    index: Expr


# "min"/"max" are emitted as the clamp ternary (a > b ? b : a); "lt" is the
# comparison ternary (a < b ? 1 : 0).
BINARY_OPS = ("+", "-", "*", "/", "%", "min", "max", "lt")


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Cast(Expr):
    to: str  # "int" | "float"
    inner: Expr


# --------------------------------------------------------------------------
# Statements

class Stmt:
    """Base class for statement nodes."""


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr  # Var or ArrayRead
    value: Expr


@dataclass(frozen=True)
class CompoundAssign(Stmt):
    target: Expr  # Var or ArrayRead
    op: str  # one of + - * /
    value: Expr


@dataclass(frozen=True)
class DeclInit(Stmt):
    name: str
    type: str  # "int" | "float"
    init: Expr


@dataclass(frozen=True)
class Loop(Stmt):
    """Canonical loop: for (index = lower; index < upper; index += step).

    The index variable is scoped to the loop; step is a positive integer
    literal by construction of valid programs.
    """

    index: str
    lower: Expr
    upper: Expr
    step: int
    body: tuple[Stmt, ...]


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple[Stmt, ...]


@dataclass(frozen=True)
class Stall(Stmt):
    """Busy-wait intrinsic used by runtime kernels; argument in microseconds."""

    micros: Expr


@dataclass(frozen=True)
class Pragma(Stmt):
    """A standalone runtime pragma line (e.g. a barrier)."""

    text: str


@dataclass(frozen=True)
class Annotated(Stmt):
    """A statement carrying opaque runtime pragma lines printed above it."""

    pragmas: tuple[str, ...]
    stmt: Stmt


# --------------------------------------------------------------------------
# Directives and programs

TILE = "tile"
UNROLL_PARTIAL = "unroll-partial"
UNROLL_FULL = "unroll-full"

REDUCTION_OPS = ("+", "*", "min", "max")


@dataclass(frozen=True)
class Directive:
    kind: str  # TILE | UNROLL_PARTIAL | UNROLL_FULL
    sizes: tuple[int, ...] = ()
    factor: int = 1
    nocheck: bool = False
    reduction: Optional[tuple[str, str]] = None  # (variable, op)


@dataclass(frozen=True)
class Param:
    name: str
    type: str  # "int" | "int-array" | "float-array"
    extent: Optional[Expr] = None  # required for array params


@dataclass(frozen=True)
class Program:
    params: tuple[Param, ...]
    body: tuple[Stmt, ...]
    directives: dict[str, Directive] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Traversal helpers

def iter_loops(stmts: tuple[Stmt, ...]) -> Iterator[Loop]:
    """Yield every loop under ``stmts`` in pre-order."""
    for stmt in stmts:
        if isinstance(stmt, Loop):
            yield stmt
            yield from iter_loops(stmt.body)
        elif isinstance(stmt, Block):
            yield from iter_loops(stmt.stmts)
        elif isinstance(stmt, Annotated):
            yield from iter_loops((stmt.stmt,))


def loop_sites(program: Program) -> dict[str, Loop]:
    """Map pre-order site ids ("L0", "L1", ...) to the loops of a program."""
    return {f"L{k}": loop for k, loop in enumerate(iter_loops(program.body))}


def site_of(program: Program, loop: Loop) -> Optional[str]:
    """Site id of a loop object within a program, or None if absent."""
    for site, candidate in loop_sites(program).items():
        if candidate is loop:
            return site
    return None


def loop_nest_depth(loop: Loop) -> int:
    """Length of the maximal perfect-nest chain starting at ``loop``.

    A nest is perfect while each body consists of exactly one inner loop.
    """
    depth = 1
    current = loop
    while len(current.body) == 1 and isinstance(current.body[0], Loop):
        current = current.body[0]
        depth += 1
    return depth


def perfect_nest_loops(loop: Loop, depth: int) -> list[Loop]:
    """The first ``depth`` loops of the perfect nest rooted at ``loop``."""
    loops = [loop]
    current = loop
    while len(loops) < depth:
        if len(current.body) == 1 and isinstance(current.body[0], Loop):
            current = current.body[0]
            loops.append(current)
        else:
            raise ValueError(f"nest depth < {depth}")
    return loops


def iter_exprs(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, ArrayRead):
        yield from iter_exprs(expr.index)
    elif isinstance(expr, BinOp):
        yield from iter_exprs(expr.lhs)
        yield from iter_exprs(expr.rhs)
    elif isinstance(expr, Cast):
        yield from iter_exprs(expr.inner)


def _stmt_exprs(stmt: Stmt) -> list[Expr]:
    if isinstance(stmt, Assign):
        return [stmt.target, stmt.value]
    if isinstance(stmt, CompoundAssign):
        return [stmt.target, stmt.value]
    if isinstance(stmt, DeclInit):
        return [stmt.init]
    if isinstance(stmt, Loop):
        return [stmt.lower, stmt.upper]
    if isinstance(stmt, Stall):
        return [stmt.micros]
    return []


def iter_stmts(stmts: tuple[Stmt, ...]) -> Iterator[Stmt]:
    for stmt in stmts:
        yield stmt
        if isinstance(stmt, Loop):
            yield from iter_stmts(stmt.body)
        elif isinstance(stmt, Block):
            yield from iter_stmts(stmt.stmts)
        elif isinstance(stmt, Annotated):
            yield from iter_stmts((stmt.stmt,))


def collect_identifiers(program: Program) -> set[str]:
    """All identifiers in use: params, declarations, loop indices, variables."""
    names = {p.name for p in program.params}
    for param in program.params:
        if param.extent is not None:
            names |= {e.name for e in iter_exprs(param.extent) if isinstance(e, Var)}
    for stmt in iter_stmts(program.body):
        if isinstance(stmt, DeclInit):
            names.add(stmt.name)
        elif isinstance(stmt, Loop):
            names.add(stmt.index)
        for expr in _stmt_exprs(stmt):
            for node in iter_exprs(expr):
                if isinstance(node, Var):
                    names.add(node.name)
                elif isinstance(node, ArrayRead):
                    names.add(node.array)
    return names


# --------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Violation:
    location: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


class _TypeError(Exception):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


def _expr_type(expr: Expr, scalars: dict[str, str], arrays: dict[str, str]) -> str:
    """Infer "int" or "float" for an expression; raise _TypeError on misuse."""
    if isinstance(expr, IntLit):
        return "int"
    if isinstance(expr, FloatLit):
        return "float"
    if isinstance(expr, Var):
        if expr.name not in scalars:
            if expr.name in arrays:
                raise _TypeError(f"array '{expr.name}' used without subscript")
            raise _TypeError(f"undeclared identifier '{expr.name}'")
        return scalars[expr.name]
    if isinstance(expr, ArrayRead):
        if expr.array not in arrays:
            raise _TypeError(f"'{expr.array}' is not a declared array")
        if _expr_type(expr.index, scalars, arrays) != "int":
            raise _TypeError(f"subscript of '{expr.array}' must be integer-typed")
        return arrays[expr.array]
    if isinstance(expr, Cast):
        _expr_type(expr.inner, scalars, arrays)
        return expr.to
    if isinstance(expr, BinOp):
        lt = _expr_type(expr.lhs, scalars, arrays)
        rt = _expr_type(expr.rhs, scalars, arrays)
        if expr.op == "%":
            if lt != "int" or rt != "int":
                raise _TypeError("'%' requires integer operands")
            return "int"
        if expr.op == "lt":
            return "int"
        if expr.op not in BINARY_OPS:
            raise _TypeError(f"unknown operator '{expr.op}'")
        return "float" if "float" in (lt, rt) else "int"
    raise _TypeError(f"unknown expression node {type(expr).__name__}")


class _Validator:
    def __init__(self, program: Program):
        self.program = program
        self.violations: list[Violation] = []
        self.arrays: dict[str, str] = {}
        self.globals: dict[str, str] = {}

    def flag(self, location: str, message: str) -> None:
        self.violations.append(Violation(location, message))

    def run(self) -> ValidationReport:
        self._check_params()
        self._check_stmts(self.program.body, [self.globals], set(), "body")
        self._check_directives()
        return ValidationReport(tuple(self.violations))

    def _check_params(self) -> None:
        seen: set[str] = set()
        for param in self.program.params:
            loc = f"param {param.name}"
            if param.name in seen:
                self.flag(loc, "duplicate parameter name")
            seen.add(param.name)
            if param.type == "int":
                if param.extent is not None:
                    self.flag(loc, "scalar parameter must not carry an extent")
                self.globals[param.name] = "int"
            elif param.type in ("int-array", "float-array"):
                if param.extent is None:
                    self.flag(loc, "array parameter requires an extent")
                self.arrays[param.name] = param.type.split("-")[0]
            else:
                self.flag(loc, f"unknown parameter type '{param.type}'")
        # extents may reference scalar params only
        for param in self.program.params:
            if param.extent is not None:
                try:
                    if _expr_type(param.extent, self.globals, {}) != "int":
                        self.flag(f"param {param.name}", "extent must be integer-typed")
                except _TypeError as exc:
                    self.flag(f"param {param.name}", f"bad extent: {exc.message}")

    def _scalar_env(self, scopes: list[dict[str, str]]) -> dict[str, str]:
        merged: dict[str, str] = {}
        for frame in scopes:
            merged.update(frame)
        return merged

    def _check_expr(self, expr: Expr, scopes: list[dict[str, str]], loc: str) -> Optional[str]:
        try:
            return _expr_type(expr, self._scalar_env(scopes), self.arrays)
        except _TypeError as exc:
            self.flag(loc, exc.message)
            return None

    def _check_lvalue(self, target: Expr, scopes: list[dict[str, str]],
                      active_indices: set[str], loc: str) -> Optional[str]:
        if isinstance(target, Var):
            if target.name in active_indices:
                self.flag(loc, f"loop index '{target.name}' must not be assigned in the body")
                return None
            env = self._scalar_env(scopes)
            if target.name not in env:
                self.flag(loc, f"assignment to undeclared '{target.name}'")
                return None
            return env[target.name]
        if isinstance(target, ArrayRead):
            if target.array not in self.arrays:
                self.flag(loc, f"'{target.array}' is not a declared array")
                return None
            self._check_expr(target.index, scopes, loc)
            return self.arrays[target.array]
        self.flag(loc, "lvalue must be a variable or a single array element")
        return None

    def _check_assign_types(self, target_type: Optional[str], value_type: Optional[str],
                            loc: str) -> None:
        if target_type == "int" and value_type == "float":
            self.flag(loc, "float value assigned to int target without a cast")

    def _check_stmts(self, stmts: tuple[Stmt, ...], scopes: list[dict[str, str]],
                     active_indices: set[str], path: str) -> None:
        for k, stmt in enumerate(stmts):
            self._check_stmt(stmt, scopes, active_indices, f"{path}[{k}]")

    def _check_stmt(self, stmt: Stmt, scopes: list[dict[str, str]],
                    active_indices: set[str], loc: str) -> None:
        if isinstance(stmt, Assign):
            tt = self._check_lvalue(stmt.target, scopes, active_indices, loc)
            vt = self._check_expr(stmt.value, scopes, loc)
            self._check_assign_types(tt, vt, loc)
        elif isinstance(stmt, CompoundAssign):
            if stmt.op not in ("+", "-", "*", "/"):
                self.flag(loc, f"unsupported compound operator '{stmt.op}'")
            tt = self._check_lvalue(stmt.target, scopes, active_indices, loc)
            vt = self._check_expr(stmt.value, scopes, loc)
            self._check_assign_types(tt, vt, loc)
        elif isinstance(stmt, DeclInit):
            if stmt.type not in ("int", "float"):
                self.flag(loc, f"unknown declaration type '{stmt.type}'")
            if stmt.name in active_indices:
                self.flag(loc, f"declaration shadows active loop index '{stmt.name}'")
            if stmt.name in scopes[-1]:
                self.flag(loc, f"redeclaration of '{stmt.name}' in the same scope")
            if stmt.name in self.arrays:
                self.flag(loc, f"'{stmt.name}' already names an array")
            vt = self._check_expr(stmt.init, scopes, loc)
            self._check_assign_types(stmt.type, vt, loc)
            scopes[-1][stmt.name] = stmt.type
        elif isinstance(stmt, Loop):
            if stmt.step < 1:
                self.flag(loc, "step >= 1 required")
            if stmt.index in active_indices:
                self.flag(loc, f"loop index '{stmt.index}' shadows an enclosing index")
            for bound, which in ((stmt.lower, "lower"), (stmt.upper, "upper")):
                bt = self._check_expr(bound, scopes, loc)
                if bt == "float":
                    self.flag(loc, f"{which} bound must be integer-typed")
            frame = {stmt.index: "int"}
            self._check_stmts(stmt.body, scopes + [frame],
                              active_indices | {stmt.index}, loc)
        elif isinstance(stmt, Block):
            self._check_stmts(stmt.stmts, scopes + [{}], active_indices, loc)
        elif isinstance(stmt, Stall):
            self._check_expr(stmt.micros, scopes, loc)
        elif isinstance(stmt, Pragma):
            pass
        elif isinstance(stmt, Annotated):
            self._check_stmt(stmt.stmt, scopes, active_indices, loc)
        else:
            self.flag(loc, f"unknown statement node {type(stmt).__name__}")

    def _check_directives(self) -> None:
        sites = loop_sites(self.program)
        for site, directive in self.program.directives.items():
            loc = f"directive at {site}"
            if site not in sites:
                self.flag(loc, "directive references a non-existent loop site")
                continue
            loop = sites[site]
            if directive.kind == TILE:
                if not directive.sizes:
                    self.flag(loc, "tile requires at least one size")
                if any(s < 1 for s in directive.sizes):
                    self.flag(loc, "tile sizes must be >= 1")
                if directive.reduction is not None:
                    self.flag(loc, "reduction is only valid with unrolling")
                if directive.sizes and loop_nest_depth(loop) < len(directive.sizes):
                    self.flag(loc, "nest depth < sizes")
            elif directive.kind == UNROLL_PARTIAL:
                if directive.factor < 1:
                    self.flag(loc, "unroll factor must be >= 1")
            elif directive.kind == UNROLL_FULL:
                pass
            else:
                self.flag(loc, f"unknown directive kind '{directive.kind}'")
            if directive.reduction is not None:
                _, op = directive.reduction
                if op not in REDUCTION_OPS:
                    self.flag(loc, f"unsupported reduction operator '{op}'")


def validate(program: Program) -> ValidationReport:
    """Check every structural and typing invariant; violations are data."""
    return _Validator(program).run()
