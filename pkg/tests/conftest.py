import pytest

from sramflip.device import default_latch

_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def nominal():
    return default_latch()


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, title = marker.args
    if call.when == "setup" and call.excinfo is not None:
        _ACCEPTANCE[num] = (title, False, "setup error")
    elif call.when == "call":
        ok = call.excinfo is None
        detail = "; ".join(v for k, v in item.user_properties if k == "measured")
        if not ok and not detail:
            detail = call.excinfo.exconly().splitlines()[0][:160]
        _ACCEPTANCE[num] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[num]
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        tr.write_line(line)
