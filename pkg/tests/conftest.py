import numpy as np
import pytest
from hypothesis import settings

from floquet.integrator import PropagationConfig, propagate
from floquet.symplectic import standard_structure_matrix
from floquet.systems import (
    CoupledTripleParams,
    MathieuParams,
    PeriodicCoefficient,
    coupled_triple_hamiltonian,
    mathieu_hamiltonian,
)

from .helpers import SEED, STABLE_A, STABLE_B, UNSTABLE_A, UNSTABLE_B

settings.register_profile("floquet", derandomize=True, deadline=None, max_examples=100)
settings.load_profile("floquet")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def J2():
    return standard_structure_matrix(1)


@pytest.fixture(scope="session")
def stable_system() -> PeriodicCoefficient:
    return mathieu_hamiltonian(MathieuParams(STABLE_A, STABLE_B))


@pytest.fixture(scope="session")
def unstable_system() -> PeriodicCoefficient:
    return mathieu_hamiltonian(MathieuParams(UNSTABLE_A, UNSTABLE_B))


@pytest.fixture(scope="session")
def rotation_system() -> PeriodicCoefficient:
    return mathieu_hamiltonian(MathieuParams(1.0, 0.0))


@pytest.fixture(scope="session")
def coupled_system() -> PeriodicCoefficient:
    return coupled_triple_hamiltonian(
        CoupledTripleParams(
            p1=2.3, p2=5.1, p3=15.5, q1=1.0, q2=1.0, q3=1.0, a=0.1, b=0.1, c=0.05, g=0.1, gamma=1.0
        )
    )


@pytest.fixture(scope="session")
def config() -> PropagationConfig:
    return PropagationConfig()


@pytest.fixture(scope="session")
def stable_trajectory(stable_system, config):
    return propagate(stable_system, config, stable_system.period)


@pytest.fixture(scope="session")
def unstable_trajectory(unstable_system, config):
    return propagate(unstable_system, config, unstable_system.period)


@pytest.fixture(scope="session")
def rotation_trajectory(rotation_system, config):
    return propagate(rotation_system, config, rotation_system.period)
