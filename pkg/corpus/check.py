#!/usr/bin/env python3
"""Corpus checker: compares every kernel file against the loopbench
generators and builds compile/run vehicles for the fragments.

The comparison is whitespace-insensitive and comment-stripped, so the
checked-in files may carry explanatory headers. Generators are reached
through the installed `loopbench` command line only.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).parent

_BLOCK_COMMENT = re.compile(r"/\*.*?\*/", re.DOTALL)
_LINE_COMMENT = re.compile(r"//[^\n]*")


def loopbench_command() -> list[str]:
    exe = shutil.which("loopbench")
    if exe:
        return [exe]
    return [sys.executable, "-m", "loopbench.cli"]


def generate(gen_args: list[str]) -> str:
    proc = subprocess.run(loopbench_command() + ["gen"] + gen_args,
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"generator failed: {proc.stderr.strip()}")
    return proc.stdout


def normalized_lines(text: str) -> list[tuple[int, str]]:
    """(original line number, canonical text) pairs, comments removed."""
    stripped = _LINE_COMMENT.sub("", text)
    # blank out block comments while keeping the line structure
    def blank(match: re.Match) -> str:
        return "\n" * match.group(0).count("\n")
    stripped = _BLOCK_COMMENT.sub(blank, stripped)
    out = []
    for lineno, line in enumerate(stripped.splitlines(), start=1):
        canonical = " ".join(line.split())
        if canonical:
            out.append((lineno, canonical))
    return out


def corpus_check(entry: dict) -> tuple[bool, str]:
    """Compare one corpus file against its generator; diffs name the line."""
    path = ROOT / entry["file"]
    if not path.exists():
        return False, f"{entry['file']}: missing file"
    actual = normalized_lines(path.read_text())
    expected = normalized_lines(generate(entry["gen_args"]))
    for (got_no, got), (_, want) in zip(actual, expected):
        if got != want:
            return False, (f"{entry['file']}:{got_no}: expected "
                           f"'{want}', found '{got}'")
    if len(actual) != len(expected):
        if len(actual) > len(expected):
            lineno = actual[len(expected)][0]
            return False, f"{entry['file']}:{lineno}: extra content"
        return False, f"{entry['file']}: truncated (missing generated lines)"
    raw = path.read_text()
    for pragma in entry.get("pragmas", []):
        found = any(line.strip().startswith(pragma)
                    for line in raw.splitlines())
        if not found:
            return False, f"{entry['file']}: pragma not present verbatim: {pragma}"
    return True, f"{entry['file']}: pass"


# --------------------------------------------------------------------------
# compile/run vehicles

_DRIVER_PRELUDE = """#include <stdio.h>
#include <sys/time.h>

static double now_us(void) {
    struct timeval tv;
    gettimeofday(&tv, 0);
    return tv.tv_sec * 1000000.0 + tv.tv_usec;
}
"""

_PARAM_DECL = re.compile(r"^(int|float) (\w+)(\[[^]]*\])?;$")


def fragment_driver(entry: dict, fragment: str) -> str:
    """A runnable translation unit around a kernel fragment.

    Scalar parameters receive the manifest's values; arrays are filled with
    ones so the kernel reads defined storage.
    """
    params = entry.get("params", {})
    body_lines: list[str] = []
    for line in normalized_lines(fragment):
        text = line[1]
        match = _PARAM_DECL.match(text)
        if match and match.group(3) is None and match.group(2) in params:
            name = match.group(2)
            body_lines.append(f"    int {name} = {params[name]};")
            continue
        body_lines.append("    " + text)
        if match and match.group(3) is not None:
            name = match.group(2)
            body_lines.append(
                f"    for (int fill_{name} = 0; "
                f"fill_{name} < (int)(sizeof {name} / sizeof {name}[0]); "
                f"fill_{name}++) {name}[fill_{name}] = 1;")
    body = "\n".join(body_lines)
    return (f"{_DRIVER_PRELUDE}\n"
            "void kernel(void) {\n"
            f"{body}\n"
            "}\n\n"
            "int main(void) {\n"
            "    double t0 = now_us();\n"
            "    kernel();\n"
            "    printf(\"{\\\"t_s\\\": %.9f}\\n\", (now_us() - t0) / 1e6);\n"
            "    return 0;\n"
            "}\n")


def compiler_command() -> list[str] | None:
    for cc in ("gcc", "clang", "cc"):
        exe = shutil.which(cc)
        if exe:
            return [exe, "-std=c99", "-O2", "-fopenmp"]
    return None


def build_entry(entry: dict, outdir: Path) -> Path:
    """Compile one corpus entry into outdir; returns the binary path."""
    cc = compiler_command()
    if cc is None:
        raise RuntimeError("no C compiler available")
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(entry["file"]).stem
    binary = outdir / stem
    if entry["kind"] == "runtime-unit":
        source = ROOT / entry["file"]
    else:
        source = outdir / f"driver_{stem}.c"
        source.write_text(fragment_driver(entry, (ROOT / entry["file"]).read_text()))
    proc = subprocess.run(cc + ["-o", str(binary), str(source)],
                          capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"compile failed for {entry['file']}:\n{proc.stderr}")
    if proc.stderr.strip():
        raise RuntimeError(f"compile not warning-clean for {entry['file']}:\n{proc.stderr}")
    return binary


def load_manifest() -> dict:
    return json.loads((ROOT / "manifest.json").read_text())


def main() -> int:
    manifest = load_manifest()
    failures = 0
    for entry in manifest["entries"]:
        ok, message = corpus_check(entry)
        print(("PASS " if ok else "DIFF ") + message)
        if not ok:
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
