import numpy as np
import pytest
from hypothesis import settings

from kfselect.covariance import HorizonModel, InformationModel
from kfselect.model import LinearSystem, Sensor

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def spd(rng, n, ridge=1.0):
    G = rng.standard_normal((n, n))
    return G @ G.T + ridge * np.eye(n)


def random_model(rng, n=4, p=6, rank=1, kind="filtering"):
    """InformationModel with a random PD M_empty and rank-``rank`` sensors."""
    M_empty = spd(rng, n, ridge=0.5)
    factors = [rng.standard_normal((n, rank)) * rng.uniform(0.2, 2.0) for _ in range(p)]
    return InformationModel(M_empty, factors=factors, kind=kind)


def single_step(model):
    return HorizonModel([model], 0, 1)


def scalar_system(F=0.5, Pi0=1.0, R_w=1.0, infos=(1.0,)):
    """One-state system whose sensors carry the information values ``infos``."""
    sensors = tuple(Sensor(np.ones((1, 1)), np.array([[1.0 / v]])) for v in infos)
    return LinearSystem(F=np.array([[F]]), R_w=np.array([[R_w]]), Pi0=np.array([[Pi0]]), sensors=sensors)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def demo_system():
    return scalar_system(infos=(3.0, 1.0, 0.5))


# verdict lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
