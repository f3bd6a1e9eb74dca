import numpy as np
import pytest

from zsgames.game_model import AQGameSpec


def random_spd(rng, m):
    A = rng.normal(size=(m, m))
    return A @ A.T + (0.2 + rng.uniform()) * np.eye(m)


def random_aq(rng, n=None, m1=None, m2=None):
    n = n or int(rng.integers(1, 4))
    m1 = m1 or int(rng.integers(1, 4))
    m2 = m2 or int(rng.integers(1, 4))
    return AQGameSpec.constant(
        A=rng.normal(size=n), B1=rng.normal(size=(n, m1)), B2=rng.normal(size=(n, m2)),
        Q=float(rng.normal()), R1=random_spd(rng, m1), R2=random_spd(rng, m2),
        S=rng.normal(size=(m2, m1)), theta1=rng.normal(size=m1), theta2=rng.normal(size=m2),
    ), n


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line per acceptance criterion; returns the flag."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
