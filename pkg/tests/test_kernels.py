import numpy as np
import pytest
from numpy.testing import assert_allclose

from grazing_lab import kernels as kn
from grazing_lab.quadrature import QuadratureSpec

SPEC = QuadratureSpec()


def test_beta_eps_support():
    prof = kn.normalize(kn.power_law_profile(0.5), SPEC)
    ker = kn.ScaledKernel(prof, 0.5, "rescaled")
    theta = np.linspace(0.25 * 1.0000001, np.pi / 2, 400)
    assert np.all(kn.beta_eps(ker, theta) == 0.0)
    inside = np.linspace(1e-4, 0.2499, 400)
    assert np.all(kn.beta_eps(ker, inside) > 0.0)


def test_beta_eps_raw_value():
    # raw Maxwellian-row shape, eps = pi/2, theta = pi/8:
    # (pi^3/eps^3) * (pi*theta/eps)^(-3/2) = 8 * (pi/4)^(-3/2)
    prof = kn.power_law_profile(0.5)
    ker = kn.ScaledKernel(prof, np.pi / 2, "rescaled")
    got = float(kn.beta_eps(ker, np.asarray(np.pi / 8)))
    assert_allclose(got, 8.0 * (np.pi / 4.0) ** -1.5, rtol=1e-14)


def test_beta_eps_cutoff_indicator():
    prof = kn.normalize_log_cutoff(kn.power_law_profile(2.0))
    ker = kn.ScaledKernel(prof, 1e-2, "coulomb_log_cutoff")
    assert float(kn.beta_eps(ker, np.asarray(5e-3))) == 0.0
    assert float(kn.beta_eps(ker, np.asarray(2e-2))) > 0.0


def test_beta_eps_rejects_nonpositive_angle():
    prof = kn.normalize(kn.power_law_profile(0.5), SPEC)
    ker = kn.ScaledKernel(prof, 0.5, "rescaled")
    with pytest.raises(kn.KernelError, match="angle out of domain"):
        kn.beta_eps(ker, np.asarray(0.0))


def test_momentum_transfer_eps_invariance():
    prof = kn.normalize(kn.power_law_profile(0.5), SPEC)
    for eps in (1.0, 0.3, 0.1, 0.03, 0.01):
        t = kn.momentum_transfer(kn.ScaledKernel(prof, eps, "rescaled"), SPEC)
        assert abs(t - 8.0 / np.pi) < 1e-9


def test_momentum_transfer_coulomb_log():
    prof = kn.normalize_log_cutoff(kn.power_law_profile(2.0))
    # closed form: (8/pi) log(pi/(2 eps)) / log(1/eps)
    vals = []
    for eps in (1e-2, 1e-3, 1e-4):
        t = kn.momentum_transfer(kn.ScaledKernel(prof, eps, "coulomb_log_cutoff"), SPEC)
        expected = (8.0 / np.pi) * np.log(np.pi / (2 * eps)) / np.log(1.0 / eps)
        assert_allclose(t, expected, rtol=1e-10)
        vals.append(t)
    assert abs(vals[1] - 8.0 / np.pi) < 0.1 * 8.0 / np.pi
    # approaches 8/pi monotonically from above
    assert vals[0] > vals[1] > vals[2] > 8.0 / np.pi


def test_normalize_closed_form():
    raw = kn.power_law_profile(0.5)
    prof = kn.normalize(raw, SPEC)
    raw_transfer = (2.0 / 3.0) * (np.pi / 2.0) ** 1.5
    assert_allclose(prof.normalization_constant, (8.0 / np.pi) / raw_transfer, rtol=1e-12)
    assert_allclose(prof.c1, prof.normalization_constant, rtol=1e-12)


def test_normalize_idempotent():
    prof = kn.normalize(kn.power_law_profile(0.5), SPEC)
    again = kn.normalize(prof, SPEC)
    assert abs(again.normalization_constant - prof.normalization_constant) < 1e-10


def test_normalize_rejects_divergent():
    with pytest.raises(kn.KernelError, match="coulomb_log_cutoff"):
        kn.normalize(kn.power_law_profile(2.0), SPEC)


def test_singularity_lower_bound():
    prof = kn.normalize(kn.power_law_profile(0.5), SPEC)
    theta = np.logspace(-8, np.log10(np.pi / 2), 300)
    assert np.all(prof(theta) * theta**1.5 >= prof.c1 * (1 - 1e-12))


def test_tabulated_profile_matches_power_law():
    grid = np.logspace(-6, np.log10(np.pi / 2), 400)
    raw = kn.tabulated_profile(grid, grid**-1.5, nu=0.5)
    prof = kn.normalize(raw, SPEC)
    t = kn.momentum_transfer(kn.ScaledKernel(prof, 0.2, "rescaled"), SPEC)
    assert abs(t - 8.0 / np.pi) < 1e-6


def test_kinetic_cutoff_ordering():
    spec = SPEC
    ker = kn.build_kernel(gamma=-2.0, nu=0.5, epsilon=0.5, kinetic_cutoff=True, spec=spec)
    bare = kn.build_kernel(gamma=-2.0, nu=0.5, epsilon=0.5, kinetic_cutoff=False, spec=spec)
    r = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    assert np.all(ker.kinetic_factor(r) <= bare.kinetic_factor(r) + 1e-15)
    assert_allclose(ker.kinetic_factor(np.array([0.5])), [1.0])


def test_build_kernel_validation():
    with pytest.raises(kn.KernelError, match="gamma"):
        kn.CollisionKernel(gamma=1.0, angular=kn.ScaledKernel(
            kn.normalize(kn.power_law_profile(0.5), SPEC), 0.5))
    with pytest.raises(kn.KernelError, match="variant"):
        kn.ScaledKernel(kn.power_law_profile(0.5), 0.5, "bogus")
    with pytest.raises(kn.KernelError):
        kn.ScaledKernel(kn.power_law_profile(0.5), 0.0)
