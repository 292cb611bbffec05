import pytest

from bellcf import RunConfig, run

# Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bell_actual():
    return run(RunConfig(model="bell-local", n_trials=20_000, master_seed=11))


@pytest.fixture(scope="session")
def singlet_actual():
    return run(RunConfig(model="quantum-singlet", n_trials=20_000, master_seed=11))


@pytest.fixture(scope="session")
def bell_cf():
    return run(RunConfig(model="bell-local", n_trials=5_000, mode="counterfactual", master_seed=11))


@pytest.fixture(scope="session")
def tdl_cf():
    return run(RunConfig(model="time-dependent-local", n_trials=5_000, mode="counterfactual", master_seed=11))
