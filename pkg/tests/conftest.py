import os
import sys

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LARGE = os.environ.get("TRINODISC_LARGE") == "1"


def pytest_collection_modifyitems(config, items):
    if LARGE:
        return
    skip = pytest.mark.skip(reason="set TRINODISC_LARGE=1 to run")
    for item in items:
        if "large" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
