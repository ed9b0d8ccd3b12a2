import numpy as np
import pytest

from crnplan.mdp import Policy, TabularMdp


def random_mdp(rng, S=3, A=2, H=3, sparse=False):
    p = np.zeros((S, A, H, S + 1))
    w = rng.random((S, A, H - 1, S))
    if sparse:
        w = np.where(rng.random(w.shape) < 0.5, 0.0, w)
        w[..., 0] += 0.1
    p[:, :, : H - 1, :S] = w / w.sum(axis=-1, keepdims=True)
    p[:, :, H - 1, S] = 1.0
    return TabularMdp(p, rng.random((S, A, H)), 0)


def random_policy(rng, S, A, H):
    return Policy(rng.integers(0, A, size=(S, H)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
