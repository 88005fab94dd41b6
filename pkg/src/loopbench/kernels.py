"""Benchmark kernel construction: IR builders, runtime-kernel C emission,
and the analytic runtime model for the task-based microbenchmark.

IR kinds build loop nests ready for transformation and interpretation.
Runtime kinds additionally emit complete C translation units with busy-wait
tasks, seeded task-size randomization, and energy polling hooks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .emitter import emit_source
from .ir import (
    Annotated, ArrayRead, Assign, BinOp, Block, Cast, CompoundAssign,
    DeclInit, FloatLit, IntLit, Loop, Param, Pragma, Program, Stall, Var,
)

MATMUL_NAIVE = "matmul-naive"
MATMUL_REORDERED = "matmul-reordered"
STENCIL2D = "stencil2d"
ARRAY_INIT = "array-init"
RECIPROCAL_SUM = "reciprocal-sum"
DEPENDENT_SUM = "dependent-sum"
NESTED_ACCUMULATE = "nested-accumulate"
PAR_CONSTRUCTS = "par-constructs"
INACTIVITY = "inactivity"

IR_KINDS = (MATMUL_NAIVE, MATMUL_REORDERED, STENCIL2D, ARRAY_INIT,
            RECIPROCAL_SUM, DEPENDENT_SUM, NESTED_ACCUMULATE)
RUNTIME_KINDS = (PAR_CONSTRUCTS, INACTIVITY)

CONSTRUCTS = ("single-task-gen", "multi-task-gen", "taskloop",
              "parfor-static", "parfor-dynamic")


class KernelError(Exception):
    """The kernel specification is incomplete or inconsistent."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    n: Optional[int] = None               # matmul / stencil extent
    length: Optional[int] = None          # single-loop kernel trip count
    elem: str = "int"                     # matmul element type
    iterations: Optional[int] = None
    num_tasks: Optional[int] = None
    max_task_size_us: Optional[int] = None
    waittime_us: Optional[int] = None
    num_threads: Optional[int] = None
    construct: Optional[str] = None


def _require(spec: KernelSpec, field: str) -> int:
    value = getattr(spec, field)
    if value is None or value < 1:
        raise KernelError(f"kernel '{spec.kind}' requires positive '{field}'")
    return value


def validate_spec(spec: KernelSpec) -> None:
    if spec.kind in (MATMUL_NAIVE, MATMUL_REORDERED, STENCIL2D):
        _require(spec, "n")
        if spec.kind != STENCIL2D and spec.elem not in ("int", "float"):
            raise KernelError(f"unknown element type '{spec.elem}'")
    elif spec.kind in (ARRAY_INIT, RECIPROCAL_SUM, DEPENDENT_SUM, NESTED_ACCUMULATE):
        if spec.length is None or spec.length < 0:
            raise KernelError(f"kernel '{spec.kind}' requires non-negative 'length'")
        if spec.kind == NESTED_ACCUMULATE and spec.length < 1:
            raise KernelError("nested accumulation requires length >= 1")
    elif spec.kind == PAR_CONSTRUCTS:
        for field in ("iterations", "num_tasks", "max_task_size_us", "num_threads"):
            _require(spec, field)
        if spec.construct not in CONSTRUCTS:
            raise KernelError(f"unknown construct '{spec.construct}'")
    elif spec.kind == INACTIVITY:
        _require(spec, "waittime_us")
    else:
        raise KernelError(f"unknown kernel kind '{spec.kind}'")


# --------------------------------------------------------------------------
# IR builders

def _flat(row: str, col: str) -> BinOp:
    return BinOp("+", BinOp("*", Var(row), Var("N")), Var(col))


def _matmul(order: tuple[str, str, str], elem: str) -> Program:
    arr = f"{elem}-array"
    extent = BinOp("*", Var("N"), Var("N"))
    params = (Param("N", "int"),
              Param("A", arr, extent), Param("B", arr, extent),
              Param("C", arr, extent))
    update = CompoundAssign(
        ArrayRead("C", _flat("row", "col")), "+",
        BinOp("*", ArrayRead("A", _flat("row", "k")),
              ArrayRead("B", _flat("k", "col"))))
    body: tuple = (update,)
    for index in reversed(order):
        body = (Loop(index, IntLit(0), Var("N"), 1, body),)
    return Program(params, body)


def _stencil() -> Program:
    params = (Param("N", "int"),
              Param("matrix", "float-array", BinOp("*", Var("N"), Var("N"))))

    def shifted(index: str, delta: int) -> BinOp | Var:
        if delta == 0:
            return Var(index)
        op = "+" if delta > 0 else "-"
        return BinOp(op, Var(index), IntLit(abs(delta)))

    def at(di: int, dj: int) -> ArrayRead:
        row, col = shifted("i", di), shifted("j", dj)
        return ArrayRead("matrix", BinOp("+", BinOp("*", row, Var("N")), col))

    total = at(-1, -1)
    for di, dj in ((-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
                   (1, -1), (1, 0), (1, 1)):
        total = BinOp("+", total, at(di, dj))
    update = Assign(at(0, 0), BinOp("/", total, FloatLit(9.0)))
    inner = Loop("j", IntLit(1), BinOp("-", Var("N"), IntLit(1)), 1, (update,))
    outer = Loop("i", IntLit(1), BinOp("-", Var("N"), IntLit(1)), 1, (inner,))
    return Program(params, (outer,))


def _array_init() -> Program:
    params = (Param("len", "int"), Param("A", "int-array", Var("len")))
    loop = Loop("i", IntLit(0), Var("len"), 1,
                (Assign(ArrayRead("A", Var("i")), Var("i")),))
    return Program(params, (loop,))


def _reciprocal_sum() -> Program:
    params = (Param("len", "int"),)
    body = CompoundAssign(Var("sum"), "+",
                          BinOp("/", IntLit(1), Cast("float", Var("i"))))
    loop = Loop("i", IntLit(0), Var("len"), 1, (body,))
    return Program(params, (DeclInit("sum", "float", FloatLit(0.0)), loop))


def _dependent_sum() -> Program:
    params = (Param("len", "int"),)
    body = Assign(Var("sum"), BinOp("+", Var("sum"), Var("i")))
    loop = Loop("i", IntLit(0), Var("len"), 1, (body,))
    return Program(params, (DeclInit("sum", "int", IntLit(0)), loop))


def _nested_accumulate() -> Program:
    params = (Param("len", "int"), Param("A", "int-array", Var("len")))
    inner = Loop("j", IntLit(0), Var("len"), 1,
                 (CompoundAssign(ArrayRead("A", Var("i")), "+",
                                 BinOp("*", Var("i"), Var("j"))),))
    outer = Loop("i", IntLit(0), Var("len"), 1,
                 (Assign(ArrayRead("A", Var("i")), IntLit(0)), inner))
    return Program(params, (outer,))


def _par_constructs(spec: KernelSpec) -> Program:
    params = (Param("waittimes", "int-array", IntLit(spec.num_tasks)),)
    task_loop_body = Stall(ArrayRead("waittimes", Var("t")))
    if spec.construct == "single-task-gen":
        inner = Annotated(("#pragma omp single",),
                          Loop("t", IntLit(0), IntLit(spec.num_tasks), 1,
                               (Annotated(("#pragma omp task",), task_loop_body),)))
        region = Annotated(("#pragma omp parallel",), Block((inner,)))
    elif spec.construct == "multi-task-gen":
        inner = Annotated(("#pragma omp for",),
                          Loop("t", IntLit(0), IntLit(spec.num_tasks), 1,
                               (Annotated(("#pragma omp task",), task_loop_body),)))
        region = Annotated(("#pragma omp parallel",), Block((inner,)))
    elif spec.construct == "taskloop":
        inner = Annotated(("#pragma omp single", "#pragma omp taskloop"),
                          Loop("t", IntLit(0), IntLit(spec.num_tasks), 1,
                               (task_loop_body,)))
        region = Annotated(("#pragma omp parallel",), Block((inner,)))
    elif spec.construct == "parfor-static":
        region = Annotated(("#pragma omp parallel for schedule(static)",),
                           Loop("t", IntLit(0), IntLit(spec.num_tasks), 1,
                                (task_loop_body,)))
    else:  # parfor-dynamic; chunk size left to its default of 1
        region = Annotated(("#pragma omp parallel for schedule(dynamic)",),
                           Loop("t", IntLit(0), IntLit(spec.num_tasks), 1,
                                (task_loop_body,)))
    outer = Loop("i", IntLit(0), IntLit(spec.iterations), 1, (region,))
    return Program(params, (outer,))


def _inactivity(spec: KernelSpec) -> Program:
    iterations = inactivity_iterations(spec.waittime_us)
    loop = Loop("i", IntLit(0), IntLit(iterations), 1,
                (Annotated(("#pragma omp master",),
                           Stall(IntLit(spec.waittime_us))),
                 Pragma("#pragma omp barrier")))
    region = Annotated(("#pragma omp parallel",), Block((loop,)))
    return Program((), (region,))


def generate(spec: KernelSpec) -> Program:
    """Build the kernel as Program IR; the result validates and round-trips."""
    validate_spec(spec)
    if spec.kind == MATMUL_NAIVE:
        return _matmul(("row", "col", "k"), spec.elem)
    if spec.kind == MATMUL_REORDERED:
        return _matmul(("row", "k", "col"), spec.elem)
    if spec.kind == STENCIL2D:
        return _stencil()
    if spec.kind == ARRAY_INIT:
        return _array_init()
    if spec.kind == RECIPROCAL_SUM:
        return _reciprocal_sum()
    if spec.kind == DEPENDENT_SUM:
        return _dependent_sum()
    if spec.kind == NESTED_ACCUMULATE:
        return _nested_accumulate()
    if spec.kind == PAR_CONSTRUCTS:
        return _par_constructs(spec)
    return _inactivity(spec)


# --------------------------------------------------------------------------
# Analytic runtime model

def expected_exec_time(iterations: int, num_tasks: int, max_task_size_us: int,
                       num_threads: int) -> Fraction:
    """Expected busy time in microseconds, ignoring runtime overheads.

    Task sizes are uniform on [0, max_task_size_us], so each contributes
    half the maximum on average, spread over the thread team.
    """
    for name, value in (("iterations", iterations), ("num_tasks", num_tasks),
                        ("max_task_size_us", max_task_size_us),
                        ("num_threads", num_threads)):
        if value < 1:
            raise KernelError(f"'{name}' must be >= 1")
    return Fraction(iterations * num_tasks * max_task_size_us, 2 * num_threads)


def inactivity_iterations(waittime_us: int) -> int:
    """Iteration count giving roughly one second of single-thread work."""
    if waittime_us < 1:
        raise KernelError("'waittime_us' must be >= 1")
    return 1_000_000 // waittime_us


# --------------------------------------------------------------------------
# Runtime kernel emission (complete C translation units)

_C_PRELUDE = r"""#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/time.h>

/* Busy-wait for the requested number of microseconds. */
void stall_us(double us) {
    struct timeval t0;
    gettimeofday(&t0, 0);
    struct timeval t1;
    double elapsed;
    do {
        gettimeofday(&t1, 0);
        elapsed = ((t1.tv_sec - t0.tv_sec) *
            1000000 + t1.tv_usec - t0.tv_usec);
    } while (elapsed < us);
}

/* Deterministic task-size generator (64-bit LCG, reproducible across
 * compilers, unlike rand()). */
static unsigned long long lcg_state = 1ULL;

void lcg_seed(unsigned long long seed) {
    lcg_state = seed ? seed : 1ULL;
}

/* Uniform integer in [0, bound]. */
int lcg_uniform(int bound) {
    lcg_state = lcg_state * 6364136223846793005ULL + 1442695040888963407ULL;
    return (int)((lcg_state >> 33) % ((unsigned long long)bound + 1ULL));
}

/* Energy polling: reads accumulated package counters exposed as files and
 * corrects for at most one counter wrap per domain. Domains are summed. */
#define MAX_DOMAINS 8

typedef struct {
    double t0_us;
    long long energy_uj[MAX_DOMAINS];
    long long max_range_uj[MAX_DOMAINS];
    int domains;
} measurements_t;

static const char *powercap_root(void) {
    const char *root = getenv("LOOPBENCH_POWERCAP_ROOT");
    return root ? root : "/sys/class/powercap";
}

static long long read_ll_file(const char *path, int *ok) {
    FILE *f = fopen(path, "r");
    long long value = 0;
    if (!f) {
        *ok = 0;
        return 0;
    }
    if (fscanf(f, "%lld", &value) != 1)
        *ok = 0;
    fclose(f);
    return value;
}

static int poll_domains(long long energy_uj[], long long max_range_uj[]) {
    int count = 0;
    char path[512];
    for (int k = 0; k < MAX_DOMAINS; k++) {
        int ok = 1;
        snprintf(path, sizeof path, "%s/intel-rapl:%d/energy_uj",
                 powercap_root(), k);
        long long e = read_ll_file(path, &ok);
        if (!ok)
            break;
        snprintf(path, sizeof path, "%s/intel-rapl:%d/max_energy_range_uj",
                 powercap_root(), k);
        long long m = read_ll_file(path, &ok);
        if (!ok)
            break;
        energy_uj[count] = e;
        max_range_uj[count] = m;
        count++;
    }
    return count;
}

static double now_us(void) {
    struct timeval tv;
    gettimeofday(&tv, 0);
    return tv.tv_sec * 1000000.0 + tv.tv_usec;
}

measurements_t *poll_before(void) {
    measurements_t *m = malloc(sizeof(measurements_t));
    m->domains = poll_domains(m->energy_uj, m->max_range_uj);
    m->t0_us = now_us();
    return m;
}

void poll_after(measurements_t *m, const char *out_path) {
    double t1_us = now_us();
    long long energy_uj[MAX_DOMAINS];
    long long max_range_uj[MAX_DOMAINS];
    long long delta_uj[MAX_DOMAINS];
    int domains = poll_domains(energy_uj, max_range_uj);
    long long total_uj = 0;
    if (domains == m->domains) {
        for (int k = 0; k < domains; k++) {
            long long d = energy_uj[k] - m->energy_uj[k];
            if (d < 0)
                d = (m->max_range_uj[k] - m->energy_uj[k]) + energy_uj[k];
            delta_uj[k] = d;
            total_uj += d;
        }
    } else {
        domains = 0;
    }
    double t_s = (t1_us - m->t0_us) / 1e6;
    FILE *out = out_path && strcmp(out_path, "-") ? fopen(out_path, "w") : stdout;
    /* domains are summed for analysis; raw per-domain deltas kept for audit */
    fprintf(out, "{\"t_s\": %.9f, \"e_j\": %.9f, \"domains_uj\": [", t_s,
            total_uj / 1e6);
    for (int k = 0; k < domains; k++)
        fprintf(out, "%s%lld", k ? ", " : "", delta_uj[k]);
    fprintf(out, "]}\n");
    if (out != stdout)
        fclose(out);
    free(m);
}
"""


def _spec_header(spec: KernelSpec, seed: int) -> str:
    fields = [f"kind={spec.kind}"]
    for name in ("n", "length", "iterations", "num_tasks", "max_task_size_us",
                 "waittime_us", "num_threads", "construct"):
        value = getattr(spec, name)
        if value is not None:
            fields.append(f"{name}={value}")
    if spec.kind in (MATMUL_NAIVE, MATMUL_REORDERED):
        fields.append(f"elem={spec.elem}")
    fields.append(f"seed={seed}")
    return "/* kernel-spec: " + " ".join(fields) + " */"


def _par_constructs_region(construct: str, indent: str = "        ") -> list[str]:
    lines: list[str] = []

    def put(text: str) -> None:
        lines.append(indent + text if text else "")

    if construct in ("parfor-static", "parfor-dynamic"):
        schedule = "static" if construct == "parfor-static" else "dynamic"
        put(f"#pragma omp parallel for schedule({schedule})")
        put("for (int t = 0; t < num_tasks; t++) {")
        put("    perform_task(waittimes[t]);")
        put("}")
        return lines
    put("#pragma omp parallel")
    put("{")
    if construct == "single-task-gen":
        put("    #pragma omp single")
        put("    for (int t = 0; t < num_tasks; t++) {")
        put("        #pragma omp task")
        put("        perform_task(waittimes[t]);")
        put("    }")
    elif construct == "multi-task-gen":
        put("    #pragma omp for")
        put("    for (int t = 0; t < num_tasks; t++) {")
        put("        #pragma omp task")
        put("        perform_task(waittimes[t]);")
        put("    }")
    else:  # taskloop
        put("    #pragma omp single")
        put("    #pragma omp taskloop")
        put("    for (int t = 0; t < num_tasks; t++) {")
        put("        perform_task(waittimes[t]);")
        put("    }")
    put("}")
    return lines


def emit_runtime_kernel(spec: KernelSpec, seed: int = 1) -> str:
    """Emit a complete, compilable C translation unit for a runtime kernel."""
    validate_spec(spec)
    if spec.kind not in RUNTIME_KINDS:
        raise KernelError(f"kernel '{spec.kind}' has no runtime emission")
    lines: list[str] = [_spec_header(spec, seed), _C_PRELUDE]
    if spec.kind == PAR_CONSTRUCTS:
        lines.append("void perform_task(int us) {")
        lines.append("    stall_us(us);")
        lines.append("}")
        lines.append("")
        lines.append("int main(int argc, char **argv) {")
        lines.append(f"    int iterations = {spec.iterations};")
        lines.append(f"    int num_tasks = {spec.num_tasks};")
        lines.append(f"    int max_task_size_us = {spec.max_task_size_us};")
        lines.append(f"    unsigned long long seed = {seed}ULL;")
        lines.append("    if (argc > 1)")
        lines.append("        seed = strtoull(argv[1], 0, 10);")
        lines.append("    lcg_seed(seed);")
        lines.append("    int *waittimes = malloc(num_tasks * sizeof(int));")
        lines.append("    for (int t = 0; t < num_tasks; t++) {")
        lines.append("        waittimes[t] = lcg_uniform(max_task_size_us);")
        lines.append("    }")
        lines.append("    measurements_t *m = poll_before();")
        lines.append("    for (int i = 0; i < iterations; i++) {")
        lines.append("        /* New parallel region for every iteration */")
        lines.extend(_par_constructs_region(spec.construct))
        lines.append("    }")
        lines.append("    poll_after(m, \"-\");")
        lines.append("    free(waittimes);")
        lines.append("    return 0;")
        lines.append("}")
    else:
        iterations = inactivity_iterations(spec.waittime_us)
        lines.append("int main(void) {")
        lines.append(f"    int iterations = {iterations};")
        lines.append(f"    double waittime_us = {spec.waittime_us};")
        lines.append("    measurements_t *m = poll_before();")
        lines.append("    #pragma omp parallel")
        lines.append("    {")
        lines.append("        for (int i = 0; i < iterations; i++) {")
        lines.append("            #pragma omp master")
        lines.append("            stall_us(waittime_us);")
        lines.append("            #pragma omp barrier")
        lines.append("        }")
        lines.append("    }")
        lines.append("    poll_after(m, \"-\");")
        lines.append("    return 0;")
        lines.append("}")
    return "\n".join(lines) + "\n"


def emit_kernel_source(spec: KernelSpec) -> str:
    """Emit the kernel-language text for a generated kernel."""
    return emit_source(generate(spec))
