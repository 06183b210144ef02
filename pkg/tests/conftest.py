import pytest

from crsim.kernel import available_backends

_criteria = pytest.StashKey[list]()


@pytest.fixture(params=available_backends())
def backend(request):
    return request.param


def pytest_configure(config):
    config.stash[_criteria] = []


@pytest.fixture
def criterion(request):
    """Report one acceptance line and fail the test when it does not hold."""
    lines = request.config.stash[_criteria]

    def report(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_criteria, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
