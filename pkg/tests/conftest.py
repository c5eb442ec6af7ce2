import numpy as np
import pytest

from crossbar_bnn import trainer, wine
from crossbar_bnn.config import load_config
from crossbar_bnn.device import DeviceParams


@pytest.fixture(scope="session")
def data():
    return wine.prepared()


@pytest.fixture(scope="session")
def few_solutions(data):
    _, train, test = data
    return trainer.generate_solutions(6, 0, train, trainer.TrainConfig(), test)


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def p30(cfg):
    return cfg.size("30nm").device


@pytest.fixture
def flat_params():
    return DeviceParams(9.0, 0.0, 1.0, 0.0, 2.2, 0.0, read_noise_std=0.0)


def random_ternary(rng):
    from crossbar_bnn.ternary import TernarySolution

    return TernarySolution(rng.integers(-1, 2, (13, 6)), rng.normal(0, 0.5, 6),
                           rng.integers(-1, 2, (6, 3)), rng.normal(0, 0.5, 3), int(rng.integers(1000)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
