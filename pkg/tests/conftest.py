import pytest

_ACCEPTANCE: list[tuple[str, bool, dict]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid): numbered acceptance criterion")


@pytest.fixture
def detail(request):
    """Dict of measured values echoed on the criterion's summary line."""
    notes: dict = {}
    request.node.acceptance_detail = notes
    return notes


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _ACCEPTANCE.append((mark.args[0], rep.passed, getattr(item, "acceptance_detail", {})))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, notes in _ACCEPTANCE:
        text = "  ".join(f"{k}={_fmt(v)}" for k, v in notes.items())
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid:<5} {text}")
