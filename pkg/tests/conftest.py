import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, k, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    evals = np.exp(rng.uniform(0.0, np.log(cond), k))
    evals[0], evals[-1] = 1.0, cond
    K = (Q * evals) @ Q.T
    return 0.5 * (K + K.T)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
