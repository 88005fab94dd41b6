"""Deterministic interpreter and iteration tracer for Program IR.

This is the ground-truth engine behind the transformation equivalence
suite: sequential execution, 64-bit float arithmetic, exact integer
arithmetic with 64-bit overflow detection, C-style truncated integer
division, and a step budget guarding against runaway loops.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .ir import (
    Annotated, ArrayRead, Assign, BinOp, Block, Cast, CompoundAssign,
    DeclInit, Expr, FloatLit, IntLit, Loop, Pragma, Program, Stall, Stmt,
    Var, iter_loops,
)

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

DEFAULT_BUDGET = 10_000_000


class InterpError(Exception):
    """Raised for runtime faults: bounds, division, overflow, budget."""


@dataclass
class Store:
    """Runtime state: scalar bindings plus dense arrays of declared extent."""

    scalars: dict[str, int | float] = field(default_factory=dict)
    arrays: dict[str, list[int | float]] = field(default_factory=dict)
    stall_us: float = 0.0  # virtual time requested by stall_us calls

    def copy(self) -> "Store":
        return Store(dict(self.scalars), {k: list(v) for k, v in self.arrays.items()},
                     self.stall_us)


def stores_equal(a: Store, b: Store) -> bool:
    """Bit-exact equality of scalar and array contents."""
    return a.scalars == b.scalars and a.arrays == b.arrays


@dataclass(frozen=True)
class TracePoint:
    site: str  # innermost enclosing loop site, "top" for top-level statements
    indices: tuple[int, ...]  # enclosing loop index values, outermost first
    ordinal: int  # statement position within its enclosing body


def format_trace(points: list[TracePoint]) -> str:
    """Line-oriented dump: one ``site=<id> idx=(a,b,...) ord=<k>`` per point."""
    lines = []
    for p in points:
        idx = ",".join(str(v) for v in p.indices)
        lines.append(f"site={p.site} idx=({idx}) ord={p.ordinal}")
    return "\n".join(lines) + ("\n" if lines else "")


class _Budget:
    __slots__ = ("remaining",)

    def __init__(self, limit: int):
        self.remaining = limit

    def tick(self) -> None:
        self.remaining -= 1
        if self.remaining < 0:
            raise InterpError("step budget exhausted")


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def _float_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.inf if (a > 0) == (math.copysign(1.0, b) > 0) else -math.inf
    return a / b


def _arith(op: str, a: int | float, b: int | float) -> int | float:
    both_int = isinstance(a, int) and isinstance(b, int)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if both_int:
            if b == 0:
                raise InterpError("integer division by zero")
            return _trunc_div(a, b)
        return _float_div(float(a), float(b))
    if op == "%":
        if not both_int:
            raise InterpError("'%' requires integer operands")
        if b == 0:
            raise InterpError("integer modulo by zero")
        return a - b * _trunc_div(a, b)
    if op == "min":
        return a if a <= b else b
    if op == "max":
        return a if a >= b else b
    if op == "lt":
        return 1 if a < b else 0
    raise InterpError(f"unknown operator '{op}'")


class _Machine:
    def __init__(self, program: Program, inputs: Store, budget: int,
                 trace: Optional[list[TracePoint]]):
        self.program = program
        self.budget = _Budget(budget)
        self.trace = trace
        self.sites = {id(loop): f"L{k}" for k, loop in enumerate(iter_loops(program.body))}
        self.scopes: list[dict[str, int | float]] = []
        self.arrays: dict[str, list[int | float]] = {}
        self.index_stack: list[int] = []
        self.site_stack: list[str] = ["top"]
        self.stall_us = 0.0
        self._bind_inputs(inputs)

    def _bind_inputs(self, inputs: Store) -> None:
        top_frame: dict[str, int | float] = {}
        for param in self.program.params:
            if param.type == "int":
                if param.name not in inputs.scalars:
                    raise InterpError(f"input missing for parameter '{param.name}'")
                top_frame[param.name] = int(inputs.scalars[param.name])
            else:
                if param.name not in inputs.arrays:
                    raise InterpError(f"input missing for array '{param.name}'")
                values = inputs.arrays[param.name]
                elem = param.type.split("-")[0]
                coerce = int if elem == "int" else float
                self.arrays[param.name] = [coerce(v) for v in values]
        self.scopes.append(top_frame)
        self.elem_types = {p.name: p.type.split("-")[0] for p in self.program.params
                           if p.extent is not None}

    # -- expression evaluation ------------------------------------------------

    def eval(self, expr: Expr) -> int | float:
        if isinstance(expr, IntLit):
            return expr.value
        if isinstance(expr, FloatLit):
            return expr.value
        if isinstance(expr, Var):
            for frame in reversed(self.scopes):
                if expr.name in frame:
                    return frame[expr.name]
            raise InterpError(f"unbound variable '{expr.name}'")
        if isinstance(expr, ArrayRead):
            return self._read_array(expr)
        if isinstance(expr, Cast):
            value = self.eval(expr.inner)
            if expr.to == "int":
                return self._check_int(int(value))
            return float(value)
        if isinstance(expr, BinOp):
            return self._binop(expr)
        raise InterpError(f"unknown expression node {type(expr).__name__}")

    def _read_array(self, expr: ArrayRead) -> int | float:
        if expr.array not in self.arrays:
            raise InterpError(f"'{expr.array}' is not a bound array")
        idx = self.eval(expr.index)
        if not isinstance(idx, int):
            raise InterpError(f"non-integer subscript for '{expr.array}'")
        data = self.arrays[expr.array]
        if idx < 0 or idx >= len(data):
            raise InterpError(
                f"out-of-bounds read {expr.array}[{idx}] (extent {len(data)})")
        return data[idx]

    def _check_int(self, value: int) -> int:
        if value < INT64_MIN or value > INT64_MAX:
            raise InterpError(f"integer overflow: {value}")
        return value

    def _binop(self, expr: BinOp) -> int | float:
        a = self.eval(expr.lhs)
        b = self.eval(expr.rhs)
        r = _arith(expr.op, a, b)
        if isinstance(r, int):
            return self._check_int(r)
        return r

    # -- statement execution ---------------------------------------------------

    def run(self) -> None:
        self._exec_body(self.program.body)

    def _exec_body(self, stmts: tuple[Stmt, ...]) -> None:
        for ordinal, stmt in enumerate(stmts):
            self._exec(stmt, ordinal)

    def _exec(self, stmt: Stmt, ordinal: int) -> None:
        self.budget.tick()
        if isinstance(stmt, Assign):
            value = self.eval(stmt.value)
            self._write(stmt.target, value)
            self._record(ordinal)
        elif isinstance(stmt, CompoundAssign):
            current = self.eval(stmt.target)
            operand = self.eval(stmt.value)
            value = _arith(stmt.op, current, operand)
            if isinstance(value, int):
                value = self._check_int(value)
            self._write(stmt.target, value)
            self._record(ordinal)
        elif isinstance(stmt, DeclInit):
            value = self.eval(stmt.init)
            if stmt.type == "int":
                if isinstance(value, float):
                    raise InterpError(f"float initializer for int '{stmt.name}'")
                self.scopes[-1][stmt.name] = self._check_int(value)
            else:
                self.scopes[-1][stmt.name] = float(value)
        elif isinstance(stmt, Loop):
            self._exec_loop(stmt)
        elif isinstance(stmt, Block):
            self.scopes.append({})
            try:
                self._exec_body(stmt.stmts)
            finally:
                self.scopes.pop()
        elif isinstance(stmt, Stall):
            self.stall_us += float(self.eval(stmt.micros))
        elif isinstance(stmt, Pragma):
            pass
        elif isinstance(stmt, Annotated):
            self._exec(stmt.stmt, ordinal)
        else:
            raise InterpError(f"unknown statement node {type(stmt).__name__}")

    def _exec_loop(self, loop: Loop) -> None:
        lower = self.eval(loop.lower)
        upper = self.eval(loop.upper)
        if not isinstance(lower, int) or not isinstance(upper, int):
            raise InterpError(f"non-integer bounds for loop '{loop.index}'")
        if loop.step < 1:
            raise InterpError(f"loop '{loop.index}' has step {loop.step}")
        site = self.sites.get(id(loop), "top")
        self.site_stack.append(site)
        frame: dict[str, int | float] = {}
        self.scopes.append(frame)
        self.index_stack.append(0)
        try:
            for value in range(lower, upper, loop.step):
                self.budget.tick()
                frame.clear()
                frame[loop.index] = value
                self.index_stack[-1] = value
                self._exec_body(loop.body)
        finally:
            self.index_stack.pop()
            self.scopes.pop()
            self.site_stack.pop()

    def _write(self, target: Expr, value: int | float) -> None:
        if isinstance(target, Var):
            for frame in reversed(self.scopes):
                if target.name in frame:
                    if isinstance(frame[target.name], int) and isinstance(value, float):
                        raise InterpError(
                            f"float value stored to int variable '{target.name}'")
                    frame[target.name] = value
                    return
            raise InterpError(f"assignment to unbound variable '{target.name}'")
        if isinstance(target, ArrayRead):
            if target.array not in self.arrays:
                raise InterpError(f"'{target.array}' is not a bound array")
            idx = self.eval(target.index)
            data = self.arrays[target.array]
            if not isinstance(idx, int) or idx < 0 or idx >= len(data):
                raise InterpError(
                    f"out-of-bounds write {target.array}[{idx}] (extent {len(data)})")
            if self.elem_types.get(target.array) == "int":
                if isinstance(value, float):
                    raise InterpError(
                        f"float value stored to int array '{target.array}'")
                data[idx] = value
            else:
                data[idx] = float(value)
            return
        raise InterpError("assignment target must be a variable or array element")

    def _record(self, ordinal: int) -> None:
        if self.trace is not None:
            self.trace.append(TracePoint(self.site_stack[-1],
                                         tuple(self.index_stack), ordinal))

    def result(self) -> Store:
        return Store(dict(self.scopes[0]), self.arrays, self.stall_us)


def interpret(program: Program, inputs: Store,
              budget: int = DEFAULT_BUDGET) -> Store:
    """Run a program to completion and return the final store."""
    machine = _Machine(program, inputs, budget, trace=None)
    machine.run()
    return machine.result()


def trace(program: Program, inputs: Store,
          budget: int = DEFAULT_BUDGET) -> list[TracePoint]:
    """Execution trace: one point per executed assignment instance."""
    points: list[TracePoint] = []
    machine = _Machine(program, inputs, budget, trace=points)
    machine.run()
    return points


# --------------------------------------------------------------------------
# Equivalence checking

EXACT_EQUAL = "exact-equal"
EQUAL_WITHIN = "equal-within"
TRACE_PERMUTATION_ONLY = "trace-permutation-only"
MISMATCH = "mismatch"

_VERDICT_RANK = {EXACT_EQUAL: 3, EQUAL_WITHIN: 2, TRACE_PERMUTATION_ONLY: 1,
                 MISMATCH: 0}


def verdict_rank(verdict: str) -> int:
    return _VERDICT_RANK[verdict]


@dataclass(frozen=True)
class Divergence:
    location: str
    expected: int | float
    actual: int | float


@dataclass(frozen=True)
class EquivalenceReport:
    verdict: str
    rel_tol: float
    divergence: Optional[Divergence] = None


class OracleFailure(Exception):
    """Interpretation failed while checking equivalence."""

    def __init__(self, which: str, cause: InterpError):
        super().__init__(f"{which} program failed: {cause}")
        self.which = which
        self.cause = cause


def _values_close(a: int | float, b: int | float, rel_tol: float) -> bool:
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    fa, fb = float(a), float(b)
    if fa == fb:
        return True
    if math.isnan(fa) and math.isnan(fb):
        return True
    if math.isinf(fa) or math.isinf(fb):
        return False
    return abs(fa - fb) <= rel_tol * max(abs(fa), abs(fb))


def _first_divergence(a: Store, b: Store, rel_tol: float) -> Optional[Divergence]:
    for name in sorted(set(a.scalars) | set(b.scalars)):
        va, vb = a.scalars.get(name), b.scalars.get(name)
        if va is None or vb is None or not _values_close(va, vb, rel_tol):
            return Divergence(name, va if va is not None else math.nan,
                              vb if vb is not None else math.nan)
    for name in sorted(set(a.arrays) | set(b.arrays)):
        xs, ys = a.arrays.get(name, []), b.arrays.get(name, [])
        if len(xs) != len(ys):
            return Divergence(name, len(xs), len(ys))
        for k, (x, y) in enumerate(zip(xs, ys)):
            if not _values_close(x, y, rel_tol):
                return Divergence(f"{name}[{k}]", x, y)
    return None


def trace_multiset(points: list[TracePoint], arity: int) -> dict:
    """Multiset of index tuples projected onto their innermost ``arity`` slots."""
    counts: dict[tuple[int, ...], int] = {}
    for p in points:
        key = p.indices[len(p.indices) - arity:] if arity else ()
        counts[key] = counts.get(key, 0) + 1
    return counts


def traces_match(p_points: list[TracePoint], q_points: list[TracePoint]) -> bool:
    """Multiset equality of iteration-space points.

    Transformed programs may deepen loop nests (tiling appends point loops
    inside tile loops), so tuples are compared after projection onto the
    common innermost arity: the surviving slots are the values the original
    loop indices take.
    """
    if len(p_points) != len(q_points):
        return False
    if not p_points:
        return True
    arity = min(min(len(p.indices) for p in p_points),
                min(len(q.indices) for q in q_points))
    return trace_multiset(p_points, arity) == trace_multiset(q_points, arity)


def check_equivalence(p: Program, q: Program, inputs: list[Store],
                      rel_tol: float = 1e-6,
                      budget: int = DEFAULT_BUDGET) -> EquivalenceReport:
    """Compare two programs over a list of input stores.

    The verdict is the weakest observed across inputs: exact-equal when all
    final stores are identical, equal-within when floats agree to rel_tol,
    trace-permutation-only when stores diverge but traces match as multisets
    of iteration-space points, and mismatch otherwise (with a witness).
    """
    worst = EXACT_EQUAL
    witness: Optional[Divergence] = None
    for store in inputs:
        try:
            rp = interpret(p, store, budget)
        except InterpError as exc:
            raise OracleFailure("first", exc) from exc
        try:
            rq = interpret(q, store, budget)
        except InterpError as exc:
            raise OracleFailure("second", exc) from exc
        if stores_equal(rp, rq):
            verdict = EXACT_EQUAL
        elif _first_divergence(rp, rq, rel_tol) is None:
            verdict = EQUAL_WITHIN
        else:
            tp = trace(p, store, budget)
            tq = trace(q, store, budget)
            if traces_match(tp, tq):
                verdict = TRACE_PERMUTATION_ONLY
            else:
                verdict = MISMATCH
            if witness is None:
                witness = _first_divergence(rp, rq, rel_tol)
        if _VERDICT_RANK[verdict] < _VERDICT_RANK[worst]:
            worst = verdict
    if worst in (EXACT_EQUAL, EQUAL_WITHIN):
        witness = None
    return EquivalenceReport(worst, rel_tol, witness)


# --------------------------------------------------------------------------
# Input construction for randomized suites

def random_inputs(program: Program, scalar_values: dict[str, int],
                  seed: int = 0, int_range: tuple[int, int] = (-9, 9),
                  float_range: tuple[float, float] = (0.5, 2.0)) -> Store:
    """Build a store binding every parameter.

    Scalar parameters take the values given in ``scalar_values``; array
    parameters are filled with seeded uniform values, integers in
    ``int_range`` and floats in ``float_range``.
    """
    rng = random.Random(seed)
    scalars: dict[str, int | float] = {}
    for param in program.params:
        if param.type == "int":
            if param.name not in scalar_values:
                raise ValueError(f"no value supplied for scalar parameter '{param.name}'")
            scalars[param.name] = int(scalar_values[param.name])
    arrays: dict[str, list[int | float]] = {}
    for param in program.params:
        if param.extent is None:
            continue
        extent = _eval_extent(param.extent, scalars)
        if param.type == "int-array":
            arrays[param.name] = [rng.randint(*int_range) for _ in range(extent)]
        else:
            arrays[param.name] = [rng.uniform(*float_range) for _ in range(extent)]
    return Store(scalars, arrays)


def _eval_extent(expr: Expr, scalars: dict[str, int | float]) -> int:
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, Var):
        value = scalars.get(expr.name)
        if not isinstance(value, int):
            raise ValueError(f"extent references unbound scalar '{expr.name}'")
        return value
    if isinstance(expr, BinOp) and expr.op in ("+", "-", "*"):
        a = _eval_extent(expr.lhs, scalars)
        b = _eval_extent(expr.rhs, scalars)
        return {"+": a + b, "-": a - b, "*": a * b}[expr.op]
    raise ValueError("unsupported extent expression")
