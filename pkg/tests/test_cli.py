import json

from loopbench.cli import main

TILED = """int N;
int A[N * N];
int B[N * N];
int C[N * N];
#pragma omp tile sizes(2, 2, 2)
for (int row = 0; row < N; row++) {
  for (int col = 0; col < N; col++) {
    for (int k = 0; k < N; k++) {
      C[row * N + col] += A[row * N + k] * B[k * N + col];
    }
  }
}
"""

CAL_SCRIPT = "0 package-0 0\n5000000 package-0 250000000\n"
STUB = {"*": {"t_s": [1.0, 1.0, 1.0], "e_j": [252.0, 258.0, 258.0]}}


def test_transform_writes_c_text(tmp_path, capsys):
    src = tmp_path / "tiled.omk"
    src.write_text(TILED)
    assert main(["transform", str(src)]) == 0
    out = capsys.readouterr().out
    assert "rowmax" in out and "for (int row0 = 0" in out


def test_transform_reports_parse_errors(tmp_path, capsys):
    src = tmp_path / "bad.omk"
    src.write_text("for(;;){}\n")
    assert main(["transform", str(src)]) == 2
    assert "error" in capsys.readouterr().err


def test_verify_equivalent_programs_exits_zero(tmp_path):
    src = tmp_path / "tiled.omk"
    src.write_text(TILED)
    out = tmp_path / "t.omk"
    assert main(["transform", str(src), "-o", str(out)]) == 0
    base = tmp_path / "base.omk"
    base.write_text(TILED.replace("#pragma omp tile sizes(2, 2, 2)\n", ""))
    assert main(["verify", str(base), str(out), "--inputs", "2",
                 "--size", "4", "--accept", "exact"]) == 0


def test_verify_detects_divergence(tmp_path, capsys):
    a = tmp_path / "a.omk"
    b = tmp_path / "b.omk"
    a.write_text("int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = 10 * i;\n")
    b.write_text("int n[N];\nfor (int i = 0; i < N - 1; i++)\n  n[i] = 10 * i;\n")
    assert main(["verify", str(a), str(b)]) == 1
    out = capsys.readouterr().out
    assert "mismatch" in out and "first divergence" in out


def test_gen_prints_kernel_source(capsys):
    assert main(["gen", "matmul-naive", "--n", "4", "--elem", "float"]) == 0
    out = capsys.readouterr().out
    assert "float A[N * N];" in out


def test_gen_runtime_c_unit(capsys):
    assert main(["gen", "par-constructs", "--iterations", "2", "--num-tasks",
                 "4", "--max-task-size-us", "10", "--num-threads", "2",
                 "--construct", "taskloop", "--c"]) == 0
    out = capsys.readouterr().out
    assert "#pragma omp taskloop" in out and "int main(" in out


def test_gen_rejects_bad_spec(capsys):
    assert main(["gen", "matmul-naive"]) == 2
    assert "error" in capsys.readouterr().err


def test_calibrate_with_mock(tmp_path, capsys):
    script = tmp_path / "mock.txt"
    script.write_text(CAL_SCRIPT)
    assert main(["calibrate", "--provider", "mock", "--mock-script",
                 str(script), "--duration", "5"]) == 0
    assert "p_static_w: 50.0" in capsys.readouterr().out


def test_bench_and_report_pipeline(tmp_path, capsys):
    matrix = tmp_path / "matrix.json"
    matrix.write_text(json.dumps({
        "axes": {"compiler": ["gcc", "clang"], "threads": [1, 2],
                 "wait_policy": ["active", "passive"]},
        "fixed": {"program": "demo"}}))
    mock_script = tmp_path / "mock.txt"
    mock_script.write_text(CAL_SCRIPT)
    stub_script = tmp_path / "stub.json"
    stub_script.write_text(json.dumps(STUB))
    out = tmp_path / "results.json"
    assert main(["bench", "--matrix", str(matrix), "--out", str(out),
                 "--provider", "mock", "--executor", "stub",
                 "--mock-script", str(mock_script),
                 "--stub-script", str(stub_script)]) == 0
    payload = json.loads(out.read_text())
    assert len(payload["records"]) == 8
    capsys.readouterr()
    assert main(["report", "--in", str(out), "--format", "csv",
                 "--baseline",
                 "compiler=gcc,threads=1,wait_policy=active"]) == 0
    csv_out = capsys.readouterr().out
    assert csv_out.splitlines()[0].startswith("program,compiler")


def test_verify_can_dump_traces(tmp_path):
    a = tmp_path / "a.omk"
    a.write_text("int n[N];\nfor (int i = 0; i < N; i++)\n  n[i] = 10 * i;\n")
    out = tmp_path / "traces"
    assert main(["verify", str(a), str(a), "--inputs", "1", "--size", "3",
                 "--trace-out", str(out)]) == 0
    dump = (out / "a.trace").read_text()
    assert dump.splitlines()[0].startswith("site=L0 idx=(")
    assert dump == (out / "b.trace").read_text()


def test_usage_errors_exit_nonzero(capsys):
    assert main(["report"]) != 0
