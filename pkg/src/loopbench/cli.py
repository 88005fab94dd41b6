"""Command-line entry point.

Subcommands:
  transform   parse a kernel, apply its directives, print C text
  verify      interpret two kernels over random inputs and compare
  gen         print a generated benchmark kernel (kernel text or C unit)
  calibrate   measure static power over an idle interval
  bench       run a configuration matrix and save JSON results
  report      render a results file as a markdown table or CSV
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import energy, harness, kernels
from .emitter import emit_source
from .interp import (OracleFailure, check_equivalence, format_trace,
                     random_inputs, trace, verdict_rank)
from .parser import ParseError, SourceSpan, parse_program
from .transforms import TransformError, apply_directives
from .ir import validate


def _read_source(path: str) -> str:
    return Path(path).read_text()


def _load_program(path: str):
    program = parse_program(_read_source(path))
    report = validate(program)
    if not report.ok:
        details = "; ".join(f"{v.location}: {v.message}" for v in report.violations)
        raise ParseError("syntax", f"invalid program: {details}", SourceSpan(1, 1))
    return program


def cmd_transform(args) -> int:
    program = _load_program(args.input)
    result = apply_directives(program)
    text = emit_source(result)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _scalar_defaults(program, value: int) -> dict[str, int]:
    return {p.name: value for p in program.params if p.type == "int"}


def cmd_verify(args) -> int:
    a = _load_program(args.first)
    b = _load_program(args.second)
    if {p.name for p in a.params} != {p.name for p in b.params}:
        print("error: programs declare different parameters", file=sys.stderr)
        return 2
    stores = []
    for k in range(args.inputs):
        scalars = _scalar_defaults(a, args.size)
        stores.append(random_inputs(a, scalars, seed=args.seed + k))
    try:
        report = check_equivalence(a, b, stores, rel_tol=args.tol)
    except OracleFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"verdict: {report.verdict}")
    if report.divergence is not None:
        d = report.divergence
        print(f"first divergence: {d.location}: {d.expected} vs {d.actual}")
    if args.trace_out:
        out = Path(args.trace_out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "a.trace").write_text(format_trace(trace(a, stores[0])))
        (out / "b.trace").write_text(format_trace(trace(b, stores[0])))
    accepted = {"exact": "exact-equal", "within": "equal-within",
                "permutation": "trace-permutation-only"}[args.accept]
    return 0 if verdict_rank(report.verdict) >= verdict_rank(accepted) else 1


def cmd_gen(args) -> int:
    spec = kernels.KernelSpec(
        kind=args.kind, n=args.n, length=args.length, elem=args.elem,
        iterations=args.iterations, num_tasks=args.num_tasks,
        max_task_size_us=args.max_task_size_us, waittime_us=args.waittime_us,
        num_threads=args.num_threads, construct=args.construct)
    if args.c:
        text = kernels.emit_runtime_kernel(spec, seed=args.seed)
    else:
        text = kernels.emit_kernel_source(spec)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _make_provider(args):
    if args.provider == "mock":
        if not args.mock_script:
            raise harness.HarnessError("mock provider requires --mock-script")
        return energy.MockProvider.from_file(args.mock_script)
    return energy.HardwareProvider(root=args.powercap_root)


def cmd_calibrate(args) -> int:
    provider = _make_provider(args)
    watts = energy.calibrate_static(provider, args.duration)
    print(f"p_static_w: {watts!r}")
    return 0


def cmd_bench(args) -> int:
    configs = harness.load_matrix(args.matrix)
    provider = _make_provider(args)
    if args.executor == "stub":
        if not args.stub_script:
            raise harness.HarnessError("stub executor requires --stub-script")
        executor = harness.StubExecutor.from_file(args.stub_script)
    else:
        executor = harness.ShellExecutor()
    results = harness.run_matrix(configs, provider, executor,
                                 calibration_s=args.duration)
    harness.save_results(results, args.out)
    counts = {}
    for record in results.records:
        counts[record.status] = counts.get(record.status, 0) + 1
    summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
    print(f"wrote {args.out}: {len(results.records)} records ({summary})")
    return 0


def cmd_report(args) -> int:
    results = harness.load_results(args.input)
    sys.stdout.write(harness.emit_report(results, fmt=args.format,
                                         baseline=args.baseline))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="apply directives and print C text")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="check two kernels for equivalence")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--inputs", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--size", type=int, default=6,
                   help="value bound to every scalar parameter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--accept", choices=("exact", "within", "permutation"),
                   default="within")
    p.add_argument("--trace-out", help="directory for trace dumps")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="generate a benchmark kernel")
    p.add_argument("kind", choices=kernels.IR_KINDS + kernels.RUNTIME_KINDS)
    p.add_argument("--n", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--elem", choices=("int", "float"), default="int")
    p.add_argument("--iterations", type=int)
    p.add_argument("--num-tasks", type=int, dest="num_tasks")
    p.add_argument("--max-task-size-us", type=int, dest="max_task_size_us")
    p.add_argument("--waittime-us", type=int, dest="waittime_us")
    p.add_argument("--num-threads", type=int, dest="num_threads")
    p.add_argument("--construct", choices=kernels.CONSTRUCTS)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--c", action="store_true",
                   help="emit a complete C translation unit (runtime kernels)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("calibrate", help="measure static power")
    p.add_argument("--duration", type=float, default=energy.DEFAULT_CALIBRATION_S)
    p.add_argument("--provider", choices=("mock", "hardware"), default="hardware")
    p.add_argument("--mock-script")
    p.add_argument("--powercap-root")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="run a configuration matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--provider", choices=("mock", "hardware"), default="mock")
    p.add_argument("--executor", choices=("stub", "shell"), default="stub")
    p.add_argument("--mock-script")
    p.add_argument("--stub-script")
    p.add_argument("--powercap-root")
    p.add_argument("--duration", type=float, default=energy.DEFAULT_CALIBRATION_S)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="render a results file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("table-markdown", "csv"),
                   default="table-markdown")
    p.add_argument("--baseline")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ParseError, TransformError, kernels.KernelError,
            harness.HarnessError, energy.ProviderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
