"""Session fixtures shared by the slow tests.

The reference sweep (level set flow plus four surgery flows at dx = 0.005)
runs once per session and feeds the acceptance, harness and solver tests.
"""
import pytest

from mcfsurgery.harness import ExperimentConfig, convergence_sweep


@pytest.fixture(scope="session")
def reference_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def reference_sweep(reference_config):
    report, khat, runs = convergence_sweep(reference_config)
    return report, khat, runs


@pytest.fixture(scope="session")
def khat(reference_sweep):
    return reference_sweep[1]


@pytest.fixture(scope="session")
def lsf_pinch_time(khat):
    """First recorded time at which the level set flow has two components."""
    for s in khat.slices:
        if len(s.components) == 2:
            return s.time
    raise AssertionError("reference level set flow never splits")


# one summary line per acceptance criterion, printed after the run
AC_LINES = {}


@pytest.fixture
def ac_report():
    def report(name, ok, detail):
        line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
        AC_LINES[name] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if AC_LINES:
        terminalreporter.section("acceptance criteria")
        for name in sorted(AC_LINES):
            terminalreporter.write_line(AC_LINES[name])
