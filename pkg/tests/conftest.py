import sys

import pytest

from wblab.kernels import power_law_kernel, truncate_kernel


@pytest.fixture(scope="session")
def pl_kernel():
    # r^2 - 1 on [0, 1.5], barrier 3 on (1.5, 6.5], cut at 6.5; a + w = 2.5 <= W - 2w = 3
    return truncate_kernel(power_law_kernel(2, 1, 1.5, 5, 3), 6.5)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for text in lines:
            terminalreporter.write_line(text)
