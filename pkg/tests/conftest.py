def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    results: dict[int, list] = {}
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" not in props or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and rep.passed:
                continue
            results.setdefault(props["criterion"], []).append((rep.passed, props.get("detail", "")))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok = all(p for p, _ in results[n])
        details = "; ".join(d for _, d in results[n] if d)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {details}")
