import pytest

_LINES = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title

    def report(self, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number:>2}: {self.title} | {detail}"
        _LINES.append((self.number, line))
        print(line)
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    return _Criterion(*marker.args)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
