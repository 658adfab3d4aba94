import pytest

from adaptive_fsm.montecarlo import ExperimentConfig, run_experiment

GRID_DS = (4, 8, 16)
GRID_NS = (10**5, 316228, 10**6)  # 10^5, 10^5.5, 10^6
GRID_SEED = 2024

_acceptance_lines: list[str] = []


@pytest.fixture
def acceptance_line():
    """Record a one-line verdict; all lines are repeated in the terminal summary."""

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _acceptance_lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scaling_summaries():
    """100 Haar states x 10 repetitions at every (d, N) of the scaling grid."""
    return {
        (d, n): run_experiment(ExperimentConfig(d=d, N=n, n_states=100, n_reps=10, split="2/4", master_seed=GRID_SEED))
        for d in GRID_DS
        for n in GRID_NS
    }
