"""Benchmark orchestration: configuration matrices, measured runs,
geometric-mean aggregation, JSON persistence, and table/CSV reports.

Runs execute strictly sequentially; concurrent runs would contaminate the
energy counters. Failed compiles and anomalous measurements mark their row
and never abort the rest of the matrix.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .energy import (DEFAULT_CALIBRATION_S, EnergyAnomaly, Measurement,
                     calibrate_static, make_measurement)

SCHEMA_VERSION = 1

WAIT_POLICIES = ("active", "passive", "default")
SCHEDULES = ("static", "dynamic", "unset")

STATUS_OK = "ok"
STATUS_ANOMALY = "anomaly"
STATUS_FAILED = "failed"


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """One cell of the benchmark configuration matrix."""

    program: str
    source: str = ""
    compiler: str = "cc -fopenmp -{opt} -o {out} {src}"
    opt_level: str = "O3"
    threads: int = 1
    wait_policy: str = "default"
    schedule: str = "unset"
    reps: int = 3
    seed: int = 1

    def __post_init__(self):
        if not 3 <= self.reps <= 10:
            raise HarnessError(f"reps must be within [3, 10], got {self.reps}")
        if self.threads < 1:
            raise HarnessError("threads must be >= 1")
        if self.wait_policy not in WAIT_POLICIES:
            raise HarnessError(f"unknown wait policy '{self.wait_policy}'")
        if self.schedule not in SCHEDULES:
            raise HarnessError(f"unknown schedule '{self.schedule}'")


@dataclass(frozen=True)
class Aggregates:
    t_s: float
    e_j: float
    p_w: float


@dataclass(frozen=True)
class RunRecord:
    config: RunConfig
    measurements: tuple[Measurement, ...]
    status: str
    aggregates: Optional[Aggregates] = None
    diagnostics: str = ""


@dataclass(frozen=True)
class ResultSet:
    metadata: dict
    records: tuple[RunRecord, ...]
    schema_version: int = SCHEMA_VERSION


_CONFIG_FIELDS = {f.name for f in fields(RunConfig)}
_INT_FIELDS = {"threads", "reps", "seed"}


def _coerce_field(name: str, value) -> object:
    if name in _INT_FIELDS:
        return int(value)
    return value


def expand_matrix(axes: dict[str, Sequence], fixed: Optional[dict] = None) -> list[RunConfig]:
    """Full Cartesian product of the axes, ordered lexicographically by axis
    name with each axis in its given value order."""
    if not axes:
        raise HarnessError("matrix needs at least one axis")
    for name, values in axes.items():
        if name not in _CONFIG_FIELDS:
            raise HarnessError(f"unknown configuration axis '{name}'")
        if not values:
            raise HarnessError(f"axis '{name}' has no values")
    base = dict(fixed or {})
    for name in base:
        if name not in _CONFIG_FIELDS:
            raise HarnessError(f"unknown fixed field '{name}'")
    names = sorted(axes)
    configs = []
    for combo in itertools.product(*(axes[name] for name in names)):
        entry = dict(base)
        entry.update(zip(names, combo))
        entry = {k: _coerce_field(k, v) for k, v in entry.items()}
        configs.append(RunConfig(**entry))
    return configs


def load_matrix(path: str | Path) -> list[RunConfig]:
    """Matrix file: JSON object {"axes": {name: [values]}, "fixed": {...}}."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "axes" not in data:
        raise HarnessError("matrix file must be a JSON object with an 'axes' member")
    return expand_matrix(data["axes"], data.get("fixed"))


def geometric_mean(values: Sequence[float]) -> float:
    """exp(mean(log v)) over positive values; a singleton is its own mean."""
    if not values:
        raise HarnessError("geometric mean of an empty sequence")
    if any(v <= 0 for v in values):
        raise HarnessError("geometric mean requires positive values")
    if len(values) == 1:
        return float(values[0])
    return math.exp(sum(math.log(v) for v in values) / len(values))


# --------------------------------------------------------------------------
# Executors

class ExecutionFailure(Exception):
    """Compilation or run failure; carries captured diagnostics."""

    def __init__(self, diagnostics: str):
        super().__init__(diagnostics)
        self.diagnostics = diagnostics


class StubExecutor:
    """Replays scripted (T, E) pairs instead of running anything.

    Script: JSON mapping program id (or "*") to {"t_s": [...], "e_j": [...]};
    repetition r of a program uses entry r modulo the list length.
    """

    def __init__(self, script: dict):
        self.script = script

    @classmethod
    def from_file(cls, path: str | Path) -> "StubExecutor":
        return cls(json.loads(Path(path).read_text()))

    def run_once(self, config: RunConfig, rep: int) -> tuple[float, float]:
        entry = self.script.get(config.program) or self.script.get("*")
        if entry is None:
            raise ExecutionFailure(f"no stub entry for program '{config.program}'")
        ts, es = entry["t_s"], entry["e_j"]
        return float(ts[rep % len(ts)]), float(es[rep % len(es)])

    def prepare(self, config: RunConfig) -> None:
        pass


class ShellExecutor:
    """Compiles with the configured command template and runs the binary.

    The spawned environment is the parent environment plus exactly
    OMP_NUM_THREADS and, unless the policy is 'default', OMP_WAIT_POLICY.
    The kernel reports its own measurement as a JSON line on stdout.
    """

    def __init__(self, workdir: Optional[str] = None):
        self._tempdir = None
        if workdir is None:
            self._tempdir = tempfile.TemporaryDirectory(prefix="loopbench-")
            workdir = self._tempdir.name
        self.workdir = Path(workdir)
        self._binaries: dict[tuple, Path] = {}

    def prepare(self, config: RunConfig) -> None:
        key = (config.compiler, config.opt_level, config.source)
        if key in self._binaries:
            return
        if not config.source or not Path(config.source).exists():
            raise ExecutionFailure(f"source not found: '{config.source}'")
        out = self.workdir / f"kernel-{len(self._binaries)}"
        command = config.compiler.format(src=config.source, out=str(out),
                                         opt=config.opt_level)
        proc = subprocess.run(command, shell=True, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ExecutionFailure(
                f"compile failed ({proc.returncode}): {command}\n{proc.stderr}")
        self._binaries[key] = out

    def run_once(self, config: RunConfig, rep: int) -> tuple[float, float]:
        self.prepare(config)
        binary = self._binaries[(config.compiler, config.opt_level, config.source)]
        env = dict(os.environ)
        env["OMP_NUM_THREADS"] = str(config.threads)
        env.pop("OMP_WAIT_POLICY", None)
        if config.wait_policy != "default":
            env["OMP_WAIT_POLICY"] = config.wait_policy
        proc = subprocess.run([str(binary), str(config.seed + rep)],
                              capture_output=True, text=True, env=env)
        if proc.returncode != 0:
            raise ExecutionFailure(
                f"run failed ({proc.returncode}):\n{proc.stderr}")
        for line in proc.stdout.splitlines():
            line = line.strip()
            if line.startswith("{"):
                try:
                    payload = json.loads(line)
                    return float(payload["t_s"]), float(payload["e_j"])
                except (ValueError, KeyError):
                    continue
        raise ExecutionFailure("kernel produced no measurement output")


# --------------------------------------------------------------------------
# Execution

def execute(config: RunConfig, provider, executor,
            p_static_w: Optional[float] = None) -> RunRecord:
    """Run one configuration: collect repetitions, compensate, aggregate.

    Anomalous repetitions mark the record instead of crashing the matrix;
    compile/run failures produce a failed record with diagnostics.
    """
    if p_static_w is None:
        p_static_w = calibrate_static(provider)
    measurements: list[Measurement] = []
    try:
        executor.prepare(config)
        anomalous = False
        for rep in range(config.reps):
            t_s, e_j = executor.run_once(config, rep)
            try:
                measurements.append(make_measurement(t_s, e_j, p_static_w))
            except EnergyAnomaly:
                anomalous = True
                measurements.append(Measurement(t_s=t_s, e_total_j=e_j,
                                                p_static_w=p_static_w,
                                                e_comp_j=math.nan,
                                                p_avg_w=e_j / t_s))
    except ExecutionFailure as exc:
        return RunRecord(config, tuple(measurements), STATUS_FAILED,
                         diagnostics=exc.diagnostics)
    if anomalous or any(m.e_comp_j <= 0 or math.isnan(m.e_comp_j)
                        for m in measurements):
        return RunRecord(config, tuple(measurements), STATUS_ANOMALY)
    t_geo = geometric_mean([m.t_s for m in measurements])
    e_geo = geometric_mean([m.e_comp_j for m in measurements])
    aggregates = Aggregates(t_s=t_geo, e_j=e_geo, p_w=e_geo / t_geo)
    return RunRecord(config, tuple(measurements), STATUS_OK, aggregates)


def run_matrix(configs: list[RunConfig], provider, executor,
               calibration_s: float = DEFAULT_CALIBRATION_S) -> ResultSet:
    """Calibrate once, then execute every configuration sequentially."""
    p_static_w = calibrate_static(provider, calibration_s)
    described = provider.describe()
    metadata = {
        "machine": described["machine"],
        "timestamp": described["timestamp"],
        "p_static_w": p_static_w,
        "tool_version": __version__,
    }
    records = tuple(execute(config, provider, executor, p_static_w)
                    for config in configs)
    return ResultSet(metadata=metadata, records=records)


# --------------------------------------------------------------------------
# Persistence

def _record_to_json(record: RunRecord) -> dict:
    config = record.config
    agg = record.aggregates
    return {
        "program": config.program,
        "source": config.source,
        "compiler": config.compiler,
        "opt_level": config.opt_level,
        "threads": config.threads,
        "wait_policy": config.wait_policy,
        "schedule": config.schedule,
        "reps": config.reps,
        "seed": config.seed,
        "status": record.status,
        "t_s": agg.t_s if agg else None,
        "p_w": agg.p_w if agg else None,
        "e_j": agg.e_j if agg else None,
        "raw": {
            "t_s": [m.t_s for m in record.measurements],
            "e_total_j": [m.e_total_j for m in record.measurements],
            "e_comp_j": [m.e_comp_j for m in record.measurements],
            "p_avg_w": [m.p_avg_w for m in record.measurements],
        },
        "diagnostics": record.diagnostics,
    }


def results_to_json(results: ResultSet) -> str:
    payload = {
        "schema_version": results.schema_version,
        "metadata": results.metadata,
        "records": [_record_to_json(r) for r in results.records],
    }
    return json.dumps(payload, indent=2, sort_keys=True,
                      allow_nan=True) + "\n"


def save_results(results: ResultSet, path: str | Path) -> None:
    Path(path).write_text(results_to_json(results))


def _record_from_json(data: dict) -> RunRecord:
    config = RunConfig(program=data["program"], source=data.get("source", ""),
                       compiler=data["compiler"], opt_level=data.get("opt_level", "O3"),
                       threads=data["threads"], wait_policy=data["wait_policy"],
                       schedule=data["schedule"], reps=data["reps"],
                       seed=data.get("seed", 1))
    raw = data.get("raw", {})
    measurements = tuple(
        Measurement(t_s=t, e_total_j=e, p_static_w=0.0, e_comp_j=c, p_avg_w=p)
        for t, e, c, p in zip(raw.get("t_s", []), raw.get("e_total_j", []),
                              raw.get("e_comp_j", []), raw.get("p_avg_w", [])))
    aggregates = None
    if data["status"] == STATUS_OK:
        aggregates = Aggregates(t_s=data["t_s"], e_j=data["e_j"], p_w=data["p_w"])
    return RunRecord(config, measurements, data["status"], aggregates,
                     data.get("diagnostics", ""))


def load_results(path: str | Path) -> ResultSet:
    data = json.loads(Path(path).read_text())
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise HarnessError(
            f"unsupported results schema version {version!r} (expected {SCHEMA_VERSION})")
    records = tuple(_record_from_json(r) for r in data["records"])
    return ResultSet(metadata=data["metadata"], records=records,
                     schema_version=version)


# --------------------------------------------------------------------------
# Reports

_REPORT_KEYS = ("program", "compiler", "threads", "wait_policy", "schedule")


def parse_selector(selector: str) -> dict[str, str]:
    """Parse 'key=value,key=value' conjunctions over configuration fields."""
    criteria = {}
    for clause in selector.split(","):
        if "=" not in clause:
            raise HarnessError(f"bad selector clause '{clause}'")
        key, value = clause.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise HarnessError(f"unknown selector field '{key}'")
        criteria[key] = value.strip()
    return criteria


def _matches(config: RunConfig, criteria: dict[str, str]) -> bool:
    return all(str(getattr(config, key)) == value
               for key, value in criteria.items())


def _find_baseline(results: ResultSet, selector: str) -> RunRecord:
    criteria = parse_selector(selector)
    matches = [r for r in results.records if _matches(r.config, criteria)]
    if len(matches) != 1:
        raise HarnessError(
            f"baseline selector matched {len(matches)} records (need exactly 1)")
    if matches[0].status != STATUS_OK or matches[0].aggregates is None:
        raise HarnessError("baseline record has no aggregates")
    return matches[0]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


def emit_report(results: ResultSet, fmt: str = "table-markdown",
                baseline: Optional[str] = None) -> str:
    """One row per record with absolute T/P/E; relative columns (value over
    baseline value) appear when a baseline selector is given."""
    if not results.records:
        raise HarnessError("result set is empty")
    base = _find_baseline(results, baseline) if baseline else None
    headers = list(_REPORT_KEYS) + ["status", "t_s", "p_w", "e_j"]
    if base is not None:
        headers += ["rel_t", "rel_p", "rel_e"]
    rows = []
    for record in results.records:
        row = [str(getattr(record.config, key)) for key in _REPORT_KEYS]
        row.append(record.status)
        agg = record.aggregates
        row += [_fmt(agg.t_s if agg else None), _fmt(agg.p_w if agg else None),
                _fmt(agg.e_j if agg else None)]
        if base is not None:
            if agg is None:
                row += ["", "", ""]
            else:
                row += [_fmt(agg.t_s / base.aggregates.t_s),
                        _fmt(agg.p_w / base.aggregates.p_w),
                        _fmt(agg.e_j / base.aggregates.e_j)]
        rows.append(row)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return buffer.getvalue()
    if fmt == "table-markdown":
        lines = ["| " + " | ".join(headers) + " |",
                 "|" + "|".join(" --- " for _ in headers) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(row) + " |")
        return "\n".join(lines) + "\n"
    raise HarnessError(f"unknown report format '{fmt}'")
