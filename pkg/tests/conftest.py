import functools

# filled by the @criterion decorator in test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def criterion(number: int, title: str):
    """Record a PASS/FAIL line for an acceptance test, with optional detail."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                ACCEPTANCE[number] = f"FAIL  [{number:2d}] {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
                raise
            ACCEPTANCE[number] = f"PASS  [{number:2d}] {title}" + (f" ({detail})" if detail else "")
        return run
    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
