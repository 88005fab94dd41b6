def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the run."""
    lines = []
    for status in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if getattr(report, "when", "call") != "call" and status == "passed":
                continue
            name = nodeid.split("::")[-1]
            lines.append((name, status))
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status in sorted(set(lines)):
        label = {"passed": "PASS", "failed": "FAIL", "error": "FAIL",
                 "skipped": "SKIP"}[status]
        terminalreporter.write_line(f"{label} {name}")
