import numpy as np
import pytest

from oqwalk.coin import validate_coin
from oqwalk.reproduce import load_fixture

# every dimension-2 and dimension-3 example coin shipped with the package
EXAMPLE_COINS = ["pq_diagonal", "pq_nonunital", "diagonal_fair_line", "unitary_sum_balanced",
                 "unitary_sum_real", "unitary_sum_complex", "unbalanced", "shear", "qutrit"]


def random_coin(rng: np.random.Generator, d: int = 2):
    """Top and bottom d x d blocks of a random 2d x d isometry."""
    z = rng.normal(size=(2 * d, d)) + 1j * rng.normal(size=(2 * d, d))
    q, _ = np.linalg.qr(z)
    return validate_coin(q[:d], q[d:])


def random_unitary(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng: np.random.Generator, d: int = 2) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = z @ z.conj().T
    return m / np.trace(m).real


@pytest.fixture
def coin():
    return load_fixture


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
