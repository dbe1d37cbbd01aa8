def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            props = dict(rep.user_properties)
            lines.append((props.get("criterion", 0), "PASS" if rep.passed else "FAIL",
                          props.get("label", rep.nodeid), props.get("detail", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, label, detail in sorted(lines):
        terminalreporter.write_line(f"[{status}] {num:2d}. {label}  {detail}")
