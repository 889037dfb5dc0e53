import functools
import sys

import pytest

from cauchyform.mesh import generate_family


@functools.lru_cache(maxsize=None)
def mesh(family, resolution):
    return generate_family(family, resolution)


@pytest.fixture
def get_mesh():
    return mesh


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
