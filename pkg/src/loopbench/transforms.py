"""Pure IR-to-IR loop rewrites: tiling, unrolling, reduction splitting, jamming.

Each transform returns new nodes and never mutates its input. Checked
variants insert clamp declarations or epilogue loops so non-dividing trip
counts stay correct; nocheck variants assume divisibility and omit that
logic, trading safety for simpler generated code.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .ir import (
    Annotated, ArrayRead, Assign, BinOp, Block, Cast, CompoundAssign,
    DeclInit, Directive, Expr, FloatLit, IntLit, Loop, Pragma, Program,
    Stall, Stmt, TILE, UNROLL_FULL, UNROLL_PARTIAL, Var,
    collect_identifiers, loop_nest_depth, loop_sites,
    perfect_nest_loops, validate,
)

INT_SENTINEL_MAX = 2 ** 63 - 1
INT_SENTINEL_MIN = -(2 ** 63)
FLOAT_SENTINEL_MAX = 1.7976931348623157e308
FLOAT_SENTINEL_MIN = -1.7976931348623157e308


class TransformError(Exception):
    """A transformation precondition does not hold."""


class FreshNamer:
    """Produces identifiers absent from the program and from prior outputs."""

    def __init__(self, reserved: Iterable[str]):
        self._used = set(reserved)

    def fresh(self, base: str) -> str:
        name = base
        counter = 2
        while name in self._used:
            name = f"{base}{counter}"
            counter += 1
        self._used.add(name)
        return name


def namer_for(program: Program) -> FreshNamer:
    return FreshNamer(collect_identifiers(program))


# --------------------------------------------------------------------------
# Substitution

def subst_expr(expr: Expr, name: str, replacement: Expr) -> Expr:
    if isinstance(expr, Var):
        return replacement if expr.name == name else expr
    if isinstance(expr, ArrayRead):
        return ArrayRead(expr.array, subst_expr(expr.index, name, replacement))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, subst_expr(expr.lhs, name, replacement),
                     subst_expr(expr.rhs, name, replacement))
    if isinstance(expr, Cast):
        return Cast(expr.to, subst_expr(expr.inner, name, replacement))
    return expr


def subst_stmt(stmt: Stmt, name: str, replacement: Expr) -> Stmt:
    if isinstance(stmt, Assign):
        return Assign(subst_expr(stmt.target, name, replacement),
                      subst_expr(stmt.value, name, replacement))
    if isinstance(stmt, CompoundAssign):
        return CompoundAssign(subst_expr(stmt.target, name, replacement),
                              stmt.op, subst_expr(stmt.value, name, replacement))
    if isinstance(stmt, DeclInit):
        if stmt.name == name:
            raise TransformError(f"substitution target '{name}' is redeclared")
        return DeclInit(stmt.name, stmt.type, subst_expr(stmt.init, name, replacement))
    if isinstance(stmt, Loop):
        lower = subst_expr(stmt.lower, name, replacement)
        upper = subst_expr(stmt.upper, name, replacement)
        if stmt.index == name:
            # inner binding shadows the substituted name
            return Loop(stmt.index, lower, upper, stmt.step, stmt.body)
        return Loop(stmt.index, lower, upper, stmt.step,
                    subst_body(stmt.body, name, replacement))
    if isinstance(stmt, Block):
        return Block(subst_body(stmt.stmts, name, replacement))
    if isinstance(stmt, Stall):
        return Stall(subst_expr(stmt.micros, name, replacement))
    if isinstance(stmt, Pragma):
        return stmt
    if isinstance(stmt, Annotated):
        return Annotated(stmt.pragmas, subst_stmt(stmt.stmt, name, replacement))
    raise TransformError(f"unknown statement node {type(stmt).__name__}")


def subst_body(body: tuple[Stmt, ...], name: str, replacement: Expr) -> tuple[Stmt, ...]:
    return tuple(subst_stmt(s, name, replacement) for s in body)


def _offset(index: str, k: int) -> Expr:
    return BinOp("+", Var(index), IntLit(k))


def _declares_locals(stmts: tuple[Stmt, ...]) -> bool:
    return any(isinstance(s, DeclInit) for s in stmts)


def _body_copy(body: tuple[Stmt, ...], index: str, replacement: Expr) -> tuple[Stmt, ...]:
    """One unrolled copy of a body; copies that declare locals are wrapped in
    a block so duplicated declarations stay scoped to their own copy."""
    stmts = subst_body(body, index, replacement)
    if _declares_locals(stmts):
        return (Block(stmts),)
    return stmts


def _mentions(expr: Expr, name: str) -> bool:
    if isinstance(expr, Var):
        return expr.name == name
    if isinstance(expr, ArrayRead):
        return _mentions(expr.index, name)
    if isinstance(expr, BinOp):
        return _mentions(expr.lhs, name) or _mentions(expr.rhs, name)
    if isinstance(expr, Cast):
        return _mentions(expr.inner, name)
    return False


def _uses_name(expr: Expr, name: str) -> bool:
    """True when the expression reads the scalar or the array called name."""
    if isinstance(expr, Var):
        return expr.name == name
    if isinstance(expr, ArrayRead):
        return expr.array == name or _uses_name(expr.index, name)
    if isinstance(expr, BinOp):
        return _uses_name(expr.lhs, name) or _uses_name(expr.rhs, name)
    if isinstance(expr, Cast):
        return _uses_name(expr.inner, name)
    return False


# --------------------------------------------------------------------------
# Tiling

def tile(nest: Loop, sizes: tuple[int, ...] | list[int], nocheck: bool,
         namer: FreshNamer) -> Loop:
    """Split the first len(sizes) levels of a perfect nest into tile loops.

    Tile loops (stepping by their size) come outermost in the original loop
    order, followed by the point loops, then any untiled inner levels. In
    checked mode each point loop runs to a hoisted clamp
    ``min(tile_start + size, original_upper)``; nocheck mode uses
    ``tile_start + size`` directly.
    """
    sizes = tuple(sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise TransformError("tile sizes must be a non-empty list of positives")
    depth = loop_nest_depth(nest)
    if depth < len(sizes):
        raise TransformError(f"nest depth {depth} < {len(sizes)} tile sizes")
    loops = perfect_nest_loops(nest, len(sizes))
    for loop, size in zip(loops, sizes):
        if loop.step != 1:
            raise TransformError(f"tiled loop '{loop.index}' must have step 1")
        if nocheck:
            _check_static_divisibility(loop.lower, loop.upper, size,
                                       "tile size")
    inner_body = loops[-1].body

    tile_names = [namer.fresh(f"{loop.index}0") for loop in loops]
    point_names = [namer.fresh(f"{loop.index}1") for loop in loops]
    clamp_names = [namer.fresh(f"{loop.index}max") for loop in loops]

    for old, new in zip(loops, point_names):
        inner_body = subst_body(inner_body, old.index, Var(new))

    # point loops, innermost outward
    current: Stmt | None = None
    for k in reversed(range(len(sizes))):
        start = Var(tile_names[k])
        if nocheck:
            limit: Expr = BinOp("+", Var(tile_names[k]), IntLit(sizes[k]))
        else:
            limit = Var(clamp_names[k])
        body = inner_body if current is None else (current,)
        current = Loop(point_names[k], start, limit, 1, body)

    # tile loops, innermost outward; checked mode hoists one clamp per level
    for k in reversed(range(len(sizes))):
        body_stmts: list[Stmt] = []
        if not nocheck:
            clamp = BinOp("min", BinOp("+", Var(tile_names[k]), IntLit(sizes[k])),
                          loops[k].upper)
            body_stmts.append(DeclInit(clamp_names[k], "int", clamp))
        body_stmts.append(current)
        current = Loop(tile_names[k], loops[k].lower, loops[k].upper,
                       sizes[k], tuple(body_stmts))
    return current


# --------------------------------------------------------------------------
# Unrolling

def _check_static_divisibility(lower: Expr, upper: Expr, chunk: int,
                               what: str) -> None:
    """nocheck is an assertion; reject it when constant bounds disprove it."""
    if isinstance(lower, IntLit) and isinstance(upper, IntLit):
        trip = max(0, upper.value - lower.value)
        if trip % chunk != 0:
            raise TransformError(
                f"nocheck requires divisibility, but {what} {chunk} does not "
                f"divide the trip count {trip}")


def _remainder_lower(lower: Expr, upper: Expr, factor: int) -> Expr:
    """First index not covered by the unrolled main loop.

    upper - ((upper - lower) % factor) equals lower + factor * floor(T/factor)
    for T >= 0 and exceeds upper for empty loops, so the epilogue runs the
    exact leftover iterations in every case.
    """
    span: Expr = upper if lower == IntLit(0) else BinOp("-", upper, lower)
    return BinOp("-", upper, BinOp("%", span, IntLit(factor)))


def unroll_partial(loop: Loop, factor: int, nocheck: bool,
                   namer: FreshNamer) -> Stmt:
    """Coalesce ``factor`` iterations into one main-loop body.

    Checked mode caps the main loop at ``upper - (factor - 1)`` and appends a
    remainder loop for the leftover iterations; nocheck mode keeps the bound
    and emits no remainder, which is only sound when the factor divides the
    trip count.
    """
    if factor < 1:
        raise TransformError("unroll factor must be >= 1")
    if loop.step != 1:
        raise TransformError("partial unrolling requires step 1")
    _reject_index_redecl(loop)
    if factor == 1:
        return loop
    if nocheck:
        _check_static_divisibility(loop.lower, loop.upper, factor,
                                   "unroll factor")
    copies: list[Stmt] = []
    for k in range(factor):
        copies.extend(_body_copy(loop.body, loop.index, _offset(loop.index, k)))
    if nocheck:
        return Block((Loop(loop.index, loop.lower, loop.upper, factor,
                           tuple(copies)),))
    main_upper = BinOp("-", loop.upper, IntLit(factor - 1))
    main = Loop(loop.index, loop.lower, main_upper, factor, tuple(copies))
    remainder = Loop(loop.index, _remainder_lower(loop.lower, loop.upper, factor),
                     loop.upper, 1, loop.body)
    return Block((main, remainder))


def _reject_index_redecl(loop: Loop) -> None:
    for stmt in _walk(loop.body):
        if isinstance(stmt, DeclInit) and stmt.name == loop.index:
            raise TransformError(f"body redeclares loop index '{loop.index}'")
        if isinstance(stmt, Loop) and stmt.index == loop.index:
            raise TransformError(f"nested loop reuses index '{loop.index}'")


def _walk(body: tuple[Stmt, ...]):
    for stmt in body:
        yield stmt
        if isinstance(stmt, Loop):
            yield from _walk(stmt.body)
        elif isinstance(stmt, Block):
            yield from _walk(stmt.stmts)
        elif isinstance(stmt, Annotated):
            yield from _walk((stmt.stmt,))


def unroll_full(loop: Loop) -> Block:
    """Replace a constant-bound loop by one body copy per iteration."""
    if not isinstance(loop.lower, IntLit) or not isinstance(loop.upper, IntLit):
        raise TransformError("full unroll requires constant bounds")
    if loop.step != 1:
        raise TransformError("full unroll requires step 1")
    stmts: list[Stmt] = []
    for value in range(loop.lower.value, loop.upper.value):
        stmts.extend(_body_copy(loop.body, loop.index, IntLit(value)))
    return Block(tuple(stmts))


# --------------------------------------------------------------------------
# Reduction-splitting unroll

_IDENTITY = {
    ("+", "int"): IntLit(0),
    ("+", "float"): FloatLit(0.0),
    ("*", "int"): IntLit(1),
    ("*", "float"): FloatLit(1.0),
    ("min", "int"): IntLit(INT_SENTINEL_MAX),
    ("min", "float"): FloatLit(FLOAT_SENTINEL_MAX),
    ("max", "int"): IntLit(INT_SENTINEL_MIN),
    ("max", "float"): FloatLit(FLOAT_SENTINEL_MIN),
}


def _reduction_target(stmt: Stmt, var: str, index: str) -> Optional[Expr]:
    """The lvalue when ``stmt`` writes the reduction variable.

    Accepts a scalar ``var`` or a loop-invariant element ``var[expr]`` (the
    subscript must not depend on the unrolled index).
    """
    if not isinstance(stmt, (Assign, CompoundAssign)):
        return None
    target = stmt.target
    if target == Var(var):
        return target
    if isinstance(target, ArrayRead) and target.array == var \
            and not _mentions(target.index, index):
        return target
    return None


def _accumulation_of(stmt: Stmt, var: str, op: str, index: str) -> Optional[Expr]:
    """The accumulated expression if ``stmt`` is ``var op= expr``-shaped."""
    target = _reduction_target(stmt, var, index)
    if target is None:
        return None
    if isinstance(stmt, CompoundAssign):
        if stmt.op == op and op in ("+", "*") and not _uses_name(stmt.value, var):
            return stmt.value
        return None
    value = stmt.value
    if isinstance(value, BinOp) and value.op == op:
        if value.lhs == target and not _uses_name(value.rhs, var):
            return value.rhs
        if value.rhs == target and not _uses_name(value.lhs, var):
            return value.lhs
    return None


def _retarget(stmt: Stmt, target: Expr, acc: str) -> Stmt:
    if isinstance(stmt, CompoundAssign):
        return CompoundAssign(Var(acc), stmt.op, stmt.value)
    assert isinstance(stmt, Assign) and isinstance(stmt.value, BinOp)
    value = stmt.value
    if value.lhs == target:
        return Assign(Var(acc), BinOp(value.op, Var(acc), value.rhs))
    return Assign(Var(acc), BinOp(value.op, value.lhs, Var(acc)))


def unroll_reduction(loop: Loop, factor: int, var: str, op: str, nocheck: bool,
                     namer: FreshNamer, var_type: str = "float") -> Block:
    """Unroll an accumulation loop into per-offset accumulators.

    The reduction variable may be a scalar or a loop-invariant array element
    (``var`` then names the array). Each of the ``factor`` body copies
    accumulates into its own fresh variable initialized to the operator
    identity (numeric sentinels for min/max); a final statement combines them
    back into the original target. The checked epilogue accumulates leftovers
    into accumulator 0. The combine overwrites the target, so the rewrite
    targets the usual pattern where it holds the identity when the loop
    starts.
    """
    if factor < 2:
        raise TransformError("reduction unrolling requires factor >= 2")
    if op not in ("+", "*", "min", "max"):
        raise TransformError(f"unsupported reduction operator '{op}'")
    if loop.step != 1:
        raise TransformError("reduction unrolling requires step 1")
    accum_positions = [k for k, stmt in enumerate(loop.body)
                       if _accumulation_of(stmt, var, op, loop.index) is not None]
    if len(accum_positions) != 1:
        raise TransformError(
            "reduction clause requires a single compound accumulation")
    accum_at = accum_positions[0]
    target = _reduction_target(loop.body[accum_at], var, loop.index)
    for k, stmt in enumerate(loop.body):
        if k == accum_at:
            continue
        for sub in _walk((stmt,)):
            for expr in _stmt_exprs(sub):
                if _uses_name(expr, var):
                    raise TransformError(
                        f"'{var}' is used outside the accumulation statement")

    if nocheck:
        _check_static_divisibility(loop.lower, loop.upper, factor,
                                   "unroll factor")
    identity = _IDENTITY.get((op, var_type))
    if identity is None:
        raise TransformError(f"no identity for '{op}' over '{var_type}'")
    accs = [namer.fresh(f"{var}{k}") for k in range(factor)]

    decls: list[Stmt] = [DeclInit(acc, var_type, identity) for acc in accs]
    copies: list[Stmt] = []
    for k in range(factor):
        for pos, stmt in enumerate(loop.body):
            renamed = _retarget(stmt, target, accs[k]) if pos == accum_at else stmt
            copies.append(subst_stmt(renamed, loop.index, _offset(loop.index, k)))
    stmts: list[Stmt] = list(decls)
    if nocheck:
        stmts.append(Loop(loop.index, loop.lower, loop.upper, factor, tuple(copies)))
    else:
        main_upper = BinOp("-", loop.upper, IntLit(factor - 1))
        stmts.append(Loop(loop.index, loop.lower, main_upper, factor, tuple(copies)))
        rem_body = tuple(
            _retarget(stmt, target, accs[0]) if pos == accum_at else stmt
            for pos, stmt in enumerate(loop.body))
        stmts.append(Loop(loop.index,
                          _remainder_lower(loop.lower, loop.upper, factor),
                          loop.upper, 1, rem_body))
    combined: Expr = Var(accs[0])
    for acc in accs[1:]:
        combined = BinOp(op, combined, Var(acc))
    stmts.append(Assign(target, combined))
    return Block(tuple(stmts))


def _stmt_exprs(stmt: Stmt) -> list[Expr]:
    if isinstance(stmt, (Assign, CompoundAssign)):
        return [stmt.target, stmt.value]
    if isinstance(stmt, DeclInit):
        return [stmt.init]
    if isinstance(stmt, Loop):
        return [stmt.lower, stmt.upper]
    if isinstance(stmt, Stall):
        return [stmt.micros]
    return []


# --------------------------------------------------------------------------
# Loop jamming

def jam(outer: Loop, factor: int, namer: FreshNamer) -> Block:
    """Unroll an outer loop and merge the duplicated inner loops into one.

    The outer body must be straight-line statements followed by a single
    inner loop whose bounds do not depend on the outer index. Offsets are
    applied to the outer index only; the epilogue re-runs the original body
    for leftover iterations.
    """
    if factor < 2:
        raise TransformError("jamming requires factor >= 2")
    if outer.step != 1:
        raise TransformError("jamming requires outer step 1")
    if not outer.body or not isinstance(outer.body[-1], Loop):
        raise TransformError("outer body must end with a single inner loop")
    inner = outer.body[-1]
    straight = outer.body[:-1]
    for stmt in straight:
        if not isinstance(stmt, (Assign, CompoundAssign)):
            raise TransformError(
                "outer body before the inner loop must be straight-line assignments")
    if inner.step != 1:
        raise TransformError("jamming requires inner step 1")
    if inner.index == outer.index:
        raise TransformError("inner loop reuses the outer index")
    if _mentions(inner.lower, outer.index) or _mentions(inner.upper, outer.index):
        raise TransformError("inner bounds must not depend on the outer index")

    hoisted: list[Stmt] = []
    for stmt in straight:
        for k in range(factor):
            hoisted.append(subst_stmt(stmt, outer.index, _offset(outer.index, k)))
    jammed_inner_body: list[Stmt] = []
    for k in range(factor):
        jammed_inner_body.extend(
            _body_copy(inner.body, outer.index, _offset(outer.index, k)))
    jammed_inner = Loop(inner.index, inner.lower, inner.upper, 1,
                        tuple(jammed_inner_body))
    main_upper = BinOp("-", outer.upper, IntLit(factor - 1))
    main = Loop(outer.index, outer.lower, main_upper, factor,
                tuple(hoisted) + (jammed_inner,))
    remainder = Loop(outer.index,
                     _remainder_lower(outer.lower, outer.upper, factor),
                     outer.upper, 1, outer.body)
    return Block((main, remainder))


# --------------------------------------------------------------------------
# Directive dispatch

def _reduction_var_type(program: Program, name: str) -> str:
    for stmt in _walk(program.body):
        if isinstance(stmt, DeclInit) and stmt.name == name:
            return stmt.type
    for param in program.params:
        if param.name == name:
            return param.type.split("-")[0]
    raise TransformError(f"reduction variable '{name}' is not declared")


def _splice(result: Stmt) -> tuple[Stmt, ...]:
    """Inline a block into the surrounding body unless it declares locals,
    in which case the braces preserve the declarations' scope."""
    if isinstance(result, Block) and not _declares_locals(result.stmts):
        return result.stmts
    return (result,)


def _apply_one(program: Program, loop: Loop, directive: Directive,
               namer: FreshNamer) -> tuple[Stmt, ...]:
    if directive.kind == TILE:
        return (tile(loop, directive.sizes, directive.nocheck, namer),)
    if directive.kind == UNROLL_FULL:
        # a reduction clause is legal here but has no effect: full unrolling
        # already removes the loop-carried control dependence
        return _splice(unroll_full(loop))
    if directive.kind == UNROLL_PARTIAL:
        if directive.reduction is not None:
            var, op = directive.reduction
            result = unroll_reduction(loop, directive.factor, var, op,
                                      directive.nocheck, namer,
                                      var_type=_reduction_var_type(program, var))
            return _splice(result)
        result = unroll_partial(loop, directive.factor, directive.nocheck, namer)
        return _splice(result)
    raise TransformError(f"unknown directive kind '{directive.kind}'")


def _replace_in_body(body: tuple[Stmt, ...], target: Loop,
                     replacement: tuple[Stmt, ...]) -> tuple[Stmt, ...]:
    out: list[Stmt] = []
    for stmt in body:
        if stmt is target:
            out.extend(replacement)
            continue
        if isinstance(stmt, Loop):
            out.append(Loop(stmt.index, stmt.lower, stmt.upper, stmt.step,
                            _replace_in_body(stmt.body, target, replacement)))
        elif isinstance(stmt, Block):
            out.append(Block(_replace_in_body(stmt.stmts, target, replacement)))
        elif isinstance(stmt, Annotated):
            inner = _replace_in_body((stmt.stmt,), target, replacement)
            if len(inner) == 1:
                out.append(Annotated(stmt.pragmas, inner[0]))
            else:
                out.append(Annotated(stmt.pragmas, Block(inner)))
        else:
            out.append(stmt)
    return tuple(out)


def apply_directives(program: Program) -> Program:
    """Rewrite every directive-carrying loop and empty the directive map.

    Directives are applied innermost-first so outer sites stay addressable;
    the result is validated before being returned.
    """
    report = validate(program)
    if not report.ok:
        first = report.violations[0]
        raise TransformError(f"program does not validate: {first.location}: {first.message}")
    namer = namer_for(program)
    body = program.body
    ordered = sorted(program.directives.items(),
                     key=lambda item: int(item[0][1:]), reverse=True)
    for site, directive in ordered:
        working = Program(program.params, body)
        sites = loop_sites(working)
        if site not in sites:
            raise TransformError(f"directive site '{site}' not found")
        loop = sites[site]
        try:
            replacement = _apply_one(working, loop, directive, namer)
        except TransformError as exc:
            raise TransformError(f"at {site}: {exc}") from exc
        body = _replace_in_body(body, loop, replacement)
    result = Program(program.params, body, {})
    report = validate(result)
    if not report.ok:
        first = report.violations[0]
        raise TransformError(
            f"transformed program does not validate: {first.location}: {first.message}")
    return result
