import numpy as np
import pytest

from resplan.schema import Attribute, Dataset, Schema, Workload

# a1 in {a, b}; a2 in {y, n}; a3 in {1, 2, 3}
TOY_RECORDS = [(0, 1, 1), (1, 1, 2), (1, 0, 2), (0, 1, 1), (1, 0, 2)]


def make_toy_schema():
    return Schema((Attribute("a1", 2, ("a", "b")), Attribute("a2", 2, ("y", "n")),
                   Attribute("a3", 3, ("1", "2", "3"))))


@pytest.fixture
def toy_schema():
    return make_toy_schema()


@pytest.fixture
def toy_dataset(toy_schema):
    return Dataset(toy_schema, np.array(TOY_RECORDS))


@pytest.fixture
def toy_workload():
    return Workload.of([(0,), (0, 1), (1, 2)])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
