import numpy as np
import pytest

from hillscope.core import MechanicalSystem, PolynomialPotential
from hillscope.model import model_system


def oscillator(n: int = 2) -> MechanicalSystem:
    terms = []
    for i in range(n):
        e = [0] * n
        e[i] = 2
        terms.append((0.5, tuple(e)))
    return MechanicalSystem(PolynomialPotential(n, tuple(terms)), 0.5)


def perturbed_model() -> MechanicalSystem:
    return MechanicalSystem(PolynomialPotential(2, ((-0.5, (0, 1)), (-0.05, (1, 1)))), 0.0)


def oscillator_conjugate(a: float, theta):
    """Closed-form first conjugate point of the unit oscillator from base (a, 0).

    theta is measured from the direction toward the boundary point (1, 0).
    """
    r = np.sqrt(1.0 - a * a)
    theta = np.asarray(theta, dtype=float)
    ts = np.arctan2(r, a * np.cos(theta))
    q = np.stack([a * np.cos(ts) + r * np.cos(theta) * np.sin(ts), r * np.sin(theta) * np.sin(ts)], axis=-1)
    return ts, q


@pytest.fixture(scope="session")
def model2():
    return model_system()


@pytest.fixture(scope="session")
def osc2():
    return oscillator(2)


@pytest.fixture(scope="session")
def model_chart(model2):
    from hillscope.seifert import build_chart

    return build_chart(model2, [0.0, 0.0], extent=0.5, height=0.3)


@pytest.fixture(scope="session")
def osc_chart(osc2):
    from hillscope.seifert import build_chart

    return build_chart(osc2, [1.0, 0.0], extent=0.5, height=0.3)


@pytest.fixture(scope="session")
def pert_chart():
    from hillscope.seifert import build_chart

    return build_chart(perturbed_model(), [0.0, 0.0], extent=0.5, height=0.3)
