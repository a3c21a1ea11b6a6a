import pytest

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, title: str):
    """Decorator noting pass/fail of one acceptance criterion."""

    def wrap(fn):
        def run(*args, **kwargs):
            ok = False
            try:
                fn(*args, **kwargs)
                ok = True
            finally:
                ACCEPTANCE[number] = (ok, title)
                print(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(autouse=True)
def _grid_env(monkeypatch):
    monkeypatch.delenv("RT_GRID_MAX", raising=False)
