import numpy as np
import pytest

from grazing_lab import functions as fn
from grazing_lab import kernels as kn
from grazing_lab.quadrature import QuadratureSpec


@pytest.fixture(scope="session")
def light_spec():
    """Cheap spec for inequality/identity checks that hold at any resolution."""
    return QuadratureSpec(pair_nodes=6, velocity_nodes=16, theta_panels=1,
                          theta_nodes_per_panel=8, sphere_phi_nodes=6)


@pytest.fixture(scope="session")
def work_spec():
    """Moderate spec for value-accuracy checks."""
    return QuadratureSpec(pair_nodes=8, velocity_nodes=20, theta_panels=2,
                          theta_nodes_per_panel=8, sphere_phi_nodes=8)


@pytest.fixture(scope="session")
def maxwellian():
    return fn.maxwellian()


@pytest.fixture(scope="session")
def aniso():
    """The anisotropic Gaussian used as the workhorse non-equilibrium density."""
    return fn.gaussian_mixture([(1.0, [0.0, 0.0, 0.0], [1.0, 1.0, 4.0])])


@pytest.fixture(scope="session")
def mixture():
    return fn.gaussian_mixture([(0.5, [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
                                (0.5, [-2.0, 0.0, 0.0], [1.0, 1.0, 1.0])])


@pytest.fixture(scope="session")
def kernel_light(light_spec):
    return kn.build_kernel(gamma=0.0, nu=0.5, epsilon=0.5, spec=light_spec)


@pytest.fixture(scope="session")
def kernel_work(work_spec):
    return kn.build_kernel(gamma=0.0, nu=0.5, epsilon=0.5, spec=work_spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
