import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from floquet_harris.growth_fragmentation import FragmentationDistribution, GFModel, PeriodicCoefficient
from floquet_harris.measure_space import SpaceGrid
from floquet_harris.selection_mutation import FitnessField, MutationKernel, SMModel

settings.register_profile(
    "ci", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")

C = PeriodicCoefficient


def gf_model(n=200, x_max=8.0, g0=C(1.0), g1=C(0.0), b0=C(0.0), b1=C(1.0), kappa=None):
    return GFModel(g0, g1, b0, b1, kappa or FragmentationDistribution(), SpaceGrid(0.0, x_max, n))


def periodic_gf(n=200, x_max=8.0, amp=0.3):
    return gf_model(n, x_max, g0=C(1.0, amp), b1=C(1.0, amp, 0.7))


def sm_model(n=241, L=6.0, phi=0.3):
    fit = FitnessField("power_confine", T=1.0, A0=0.0, A1=3.0, p=2.0, phi=phi)
    return SMModel(fit, MutationKernel("uniform_window", eps=3.0, q=0.3), SpaceGrid(-L, L, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def constant_gf():
    return gf_model()


@pytest.fixture(scope="session")
def periodic_gf_model():
    return periodic_gf()


@pytest.fixture(scope="session")
def sm_periodic():
    return sm_model()


TWO_PI = 2 * math.pi
