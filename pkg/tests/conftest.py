import numpy as np
import pytest

from tbtwin.config import ExperimentConfig
from tbtwin.pipeline import analyze_streams
from tbtwin.simulator import simulate_run

ACCEPTANCE_LINES = []


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_density_matrix(rng, rank=None):
    rank = rank or 4
    a = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, n=4):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def run_experiment(cfg: ExperimentConfig):
    streams = []
    for i, phase in enumerate(cfg.phase_settings):
        run = cfg.run.__class__(**{**cfg.run.to_dict(), "seed": cfg.run_seed(i)})
        streams.append(simulate_run(cfg.source, phase, run))
    return streams, analyze_streams(streams, list(cfg.phase_settings), cfg)
