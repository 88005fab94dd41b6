"""Corpus acceptance: fidelity against the generators, plus the
hardware-gated compile-and-run path (skipped without an OpenMP toolchain
or with too few cores for the timing bound)."""

import json
import os
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))
import check  # noqa: E402

MANIFEST = check.load_manifest()
ENTRIES = MANIFEST["entries"]
IDS = [Path(e["file"]).stem for e in ENTRIES]


@pytest.mark.parametrize("entry", ENTRIES, ids=IDS)
def test_corpus_fidelity(entry):
    ok, message = check.corpus_check(entry)
    assert ok, message


def test_edited_pragma_is_reported_with_its_line(tmp_path):
    entry = next(e for e in ENTRIES if e["file"].endswith("inactivity.c"))
    text = (check.ROOT / entry["file"]).read_text()
    mutated = text.replace("#pragma omp master", "#pragma omp masterx")
    assert mutated != text
    lineno = next(k for k, line in enumerate(mutated.splitlines(), start=1)
                  if "masterx" in line)
    copy = dict(entry)
    copy["file"] = "kernels/mutated_inactivity.c"
    target = check.ROOT / copy["file"]
    target.write_text(mutated)
    try:
        ok, message = check.corpus_check(copy)
    finally:
        target.unlink()
    assert not ok
    assert f":{lineno}:" in message


def test_missing_file_is_a_diff():
    entry = dict(ENTRIES[0])
    entry["file"] = "kernels/not_there.c"
    ok, message = check.corpus_check(entry)
    assert not ok and "missing" in message


def test_parfor_dynamic_entry_contains_dynamic_schedule():
    entry = next(e for e in ENTRIES
                 if e["file"].endswith("parconstructs_parfor_dynamic.c"))
    text = (check.ROOT / entry["file"]).read_text()
    assert "schedule(dynamic)" in text
    ok, message = check.corpus_check(entry)
    assert ok, message


# --------------------------------------------------------------------------
# hardware-gated path

TOOLCHAIN = check.compiler_command()

needs_toolchain = pytest.mark.skipif(
    TOOLCHAIN is None, reason="no OpenMP-capable C compiler")


@needs_toolchain
@pytest.mark.parametrize("entry", ENTRIES, ids=IDS)
def test_corpus_compiles_warning_clean(entry, tmp_path):
    check.build_entry(entry, tmp_path)


@needs_toolchain
@pytest.mark.parametrize(
    "entry", [e for e in ENTRIES if e["kind"] == "kernel-fragment"],
    ids=[Path(e["file"]).stem for e in ENTRIES if e["kind"] == "kernel-fragment"])
def test_fragment_drivers_run(entry, tmp_path):
    binary = check.build_entry(entry, tmp_path)
    proc = subprocess.run([str(binary)], capture_output=True, text=True,
                          timeout=60)
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout.strip().splitlines()[-1])
    assert payload["t_s"] >= 0


def run_kernel(binary, threads: int, seed: int = 1):
    env = dict(os.environ)
    env["OMP_NUM_THREADS"] = str(threads)
    proc = subprocess.run([str(binary), str(seed)], capture_output=True,
                          text=True, timeout=120, env=env)
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


@needs_toolchain
@pytest.mark.parametrize(
    "entry", [e for e in ENTRIES if e["kind"] == "runtime-unit"],
    ids=[Path(e["file"]).stem for e in ENTRIES if e["kind"] == "runtime-unit"])
def test_runtime_kernels_run(entry, tmp_path):
    binary = check.build_entry(entry, tmp_path)
    threads = min(os.cpu_count() or 1, entry["spec"].get("num_threads", 1))
    payload = run_kernel(binary, max(threads, 1))
    assert payload["t_s"] > 0


@needs_toolchain
@pytest.mark.skipif((os.cpu_count() or 1) < 4,
                    reason="timing bound needs at least 4 cores")
def test_parconstructs_walltime_within_twice_the_model(tmp_path):
    entry = next(e for e in ENTRIES
                 if e["file"].endswith("parconstructs_single.c"))
    spec = entry["spec"]
    binary = check.build_entry(entry, tmp_path)
    payload = run_kernel(binary, spec["num_threads"])
    expected_us = Fraction(
        spec["iterations"] * spec["num_tasks"] * spec["max_task_size_us"],
        2 * spec["num_threads"])
    measured_us = payload["t_s"] * 1e6
    assert measured_us <= 2 * float(expected_us), (measured_us, float(expected_us))
    assert measured_us >= float(expected_us) / 2, (measured_us, float(expected_us))
