import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mmrelay.config import FadingProfile, SystemConfig  # noqa: E402


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def fading(cfg):
    return FadingProfile.uniform(cfg)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"[{number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
