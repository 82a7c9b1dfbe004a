import math

import numpy as np
import pytest

from vkfilm.energy import AtomisticModel
from vkfilm.limits import Quadrature, TrigDisplacement
from vkfilm.potentials import (
    MassSpring, PairLaw, lennard_jones, lennard_jones_deriv,
    quadratic_well, quadratic_well_deriv,
)
from vkfilm.quadforms import assemble_forms


@pytest.fixture(scope="session")
def ms_law():
    return MassSpring(alpha=1.0, beta=1.0)


@pytest.fixture(scope="session")
def lj_law():
    return PairLaw(v1=lennard_jones, v2=lennard_jones,
                   dv1=lennard_jones_deriv, dv2=lennard_jones_deriv,
                   alpha=1.0, beta=1.0)


@pytest.fixture(scope="session")
def quad_pair_law():
    return PairLaw(v1=quadratic_well, v2=quadratic_well,
                   dv1=quadratic_well_deriv, dv2=quadratic_well_deriv,
                   alpha=1.0, beta=1.0)


@pytest.fixture(scope="session")
def model(ms_law):
    return AtomisticModel(bulk=ms_law, surface=ms_law)


@pytest.fixture(scope="session")
def forms(ms_law):
    return assemble_forms(ms_law, ms_law)


@pytest.fixture(scope="session")
def canonical_field():
    # u = 0, v = sin(pi x1) sin(pi x2) on S = (0,1)^2
    return TrigDisplacement(u1=(), u2=(), v=((1.0, 1, 1, 0.0, 0.0),),
                            freq_unit=math.pi)


@pytest.fixture(scope="session")
def unit_quadrature():
    return Quadrature(m=64, lengths=(1.0, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
