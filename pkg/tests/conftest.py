import sys

import pytest

from optocool.presets import fig2_config, fig4_config


@pytest.fixture
def fig2():
    return fig2_config()


@pytest.fixture
def fig4():
    return fig4_config()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
