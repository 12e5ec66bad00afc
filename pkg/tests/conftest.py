def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, (ok, detail) in RESULTS.items():
        terminalreporter.write_line(f"ACCEPTANCE {cid} {'PASS' if ok else 'FAIL'}: {detail}")
