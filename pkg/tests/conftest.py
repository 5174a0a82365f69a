import pytest

from hmplan.io import save_tool, write_grid
from hmplan.shapes import box, bracket, end_mill, nozzle, staircase

_criteria: dict[int, tuple[str, str]] = {}


@pytest.fixture
def workspace(tmp_path):
    """Tool JSONs and target grids for CLI runs."""
    save_tool(end_mill(3, 3, 8), tmp_path / "mill.json")
    save_tool(nozzle(6, 3), tmp_path / "nozzle.json")
    write_grid(staircase(floating=-1), tmp_path / "stairs.hmvx")
    write_grid(box((8, 8, 8), (2, 2, 0), (6, 6, 3)), tmp_path / "block.hmvx")
    write_grid(bracket(32), tmp_path / "bracket.hmvx")
    return tmp_path


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is None or call.when != "call":
        return
    n, title = m.args
    ok = call.excinfo is None
    prev = _criteria.get(n)
    status = "PASS" if ok and (prev is None or prev[1] == "PASS") else "FAIL"
    _criteria[n] = (title, status)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, status = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {title}")
