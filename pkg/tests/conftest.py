import pytest

from slowdrip.pdns_model import SuffixSet

import support


@pytest.fixture(scope="session")
def suffixes():
    return SuffixSet.default()


def pytest_terminal_summary(terminalreporter):
    if support.ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(support.ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
