import numpy as np
import pytest
from numpy.testing import assert_allclose

from grazing_lab import compactness as cp
from grazing_lab import dissipation as dp
from grazing_lab import functions as fn
from grazing_lab import kernels as kn
from grazing_lab.quadrature import QuadratureSpec

SPEC = QuadratureSpec(pair_nodes=8, theta_panels=2, theta_nodes_per_panel=8,
                      sphere_phi_nodes=8)


@pytest.fixture(scope="module")
def cutoff_kernel():
    return kn.build_kernel(gamma=-1.0, nu=0.5, epsilon=0.5, kinetic_cutoff=True,
                           spec=SPEC)


@pytest.fixture(scope="module")
def cutoff_kernel_g0():
    return kn.build_kernel(gamma=0.0, nu=0.5, epsilon=0.5, kinetic_cutoff=True,
                           spec=SPEC)


def test_s_eps_uniform_bound(cutoff_kernel):
    for eps in (1.0, 0.5, 0.1, 1e-2, 1e-3):
        ker = cutoff_kernel.with_epsilon(eps)
        for z in (0.25, 0.5, 1.0, 2.0, 8.0):
            assert abs(cp.s_eps(z, ker, SPEC)) <= 12.0


def test_s_eps_small_eps_limit(cutoff_kernel):
    ker = cutoff_kernel.with_epsilon(1e-3)
    for z in (0.25, 1.0):
        assert abs(cp.s_eps(z, ker, SPEC) - 6.0) < 0.01 * 6.0


def test_s_eps_kinetic_scaling(cutoff_kernel):
    ker = cutoff_kernel.with_epsilon(1e-3)
    base = cp.s_eps(0.5, ker, SPEC)
    assert_allclose(cp.s_eps(2.0, ker, SPEC), base * 2.0**-1.0, rtol=1e-12)
    assert_allclose(cp.s_eps(0.25, ker, SPEC), base, rtol=1e-12)


def test_s_eps_requires_cutoff():
    bare = kn.build_kernel(gamma=-1.0, nu=0.5, epsilon=0.5, kinetic_cutoff=False,
                           spec=SPEC)
    with pytest.raises(cp.CompactnessError, match="kinetic-cutoff"):
        cp.s_eps(1.0, bare, SPEC)


def test_cancellation_identity_gamma0(maxwellian, cutoff_kernel_g0):
    """With gamma = 0 the kinetic factor is constant, so the identity holds
    exactly and both sides are nonzero at equilibrium."""
    lhs, rhs, gap = cp.cancellation_identity_check(maxwellian, cutoff_kernel_g0, SPEC)
    assert abs(lhs) > 1.0
    assert gap < 1e-6 * abs(rhs)
    assert abs(lhs) <= 12.0
    assert_allclose(rhs, cp.s_eps(1.0, cutoff_kernel_g0, SPEC), rtol=1e-9)


def test_cancellation_identity_concentrated(cutoff_kernel):
    """For gamma < 0 the factorized convolution kernel is exact only where
    the kinetic cutoff saturates; a density concentrated inside the unit
    relative-velocity ball keeps the mismatch region negligible."""
    cold = fn.maxwellian(temperature=0.02)
    lhs, rhs, gap = cp.cancellation_identity_check(cold, cutoff_kernel, SPEC)
    assert gap < 1e-4 * abs(rhs)


def test_cancellation_bilinearity(maxwellian, cutoff_kernel_g0):
    """Both sides scale with the square of the density mass."""
    lhs, rhs, _ = cp.cancellation_identity_check(maxwellian, cutoff_kernel_g0, SPEC)

    m = 0.3

    class Scaled:
        weights = maxwellian.weights
        means = maxwellian.means
        cov_diags = maxwellian.cov_diags

        def value(self, v):
            return m * maxwellian.value(v)

        def pair_value(self, v, vs):
            return m**2 * maxwellian.pair_value(v, vs)

        def quadrature_frame(self):
            return maxwellian.quadrature_frame()

    lhs_s, rhs_s, _ = cp.cancellation_identity_check(Scaled(), cutoff_kernel_g0, SPEC)
    assert_allclose(lhs_s, m**2 * lhs, rtol=1e-12)
    assert_allclose(rhs_s, m**2 * rhs, rtol=1e-12)


class TestSeminorm:
    @pytest.fixture(scope="class")
    def grid(self):
        return cp.FourierGrid()

    def test_basic_value(self, aniso, grid):
        sn = cp.weighted_seminorm(cp.CutoffDensity(aniso, R=5.0), 0.5, grid)
        assert sn > 0.0 and np.isfinite(sn)

    def test_quadratic_scaling(self, aniso, grid):
        fR = cp.CutoffDensity(aniso, R=5.0)
        sn = cp.weighted_seminorm(fR, 0.5, grid)

        class Scaled:
            R = fR.R

            def sqrt_value(self, v):
                return 2.0 * fR.sqrt_value(v)

        assert_allclose(cp.weighted_seminorm(Scaled(), 0.5, grid), 4.0 * sn, rtol=1e-12)

    def test_translation_invariance(self, grid):
        """|F| is translation invariant; on a lattice shift the DFT values
        coincide exactly."""
        f0 = fn.gaussian_mixture([(1.0, [0, 0, 0], [1, 1, 4])])
        shift = (0.7, -0.3, 0.2)  # multiples of the grid spacing 0.1
        fs = fn.gaussian_mixture([(1.0, list(shift), [1, 1, 4])])
        sn0 = cp.weighted_seminorm(cp.CutoffDensity(f0, R=5.0), 0.5, grid)
        sn1 = cp.weighted_seminorm(cp.CutoffDensity(fs, R=5.0, center=shift), 0.5, grid)
        assert_allclose(sn1, sn0, rtol=1e-12)

    def test_smoothing_reduces_seminorm(self, grid):
        rough = cp.CutoffDensity(fn.maxwellian(temperature=0.05), R=1.0)
        smooth = cp.CutoffDensity(fn.maxwellian(temperature=0.15), R=1.0)
        assert cp.weighted_seminorm(smooth, 0.5, grid) < cp.weighted_seminorm(rough, 0.5, grid)

    def test_support_guard(self, aniso):
        small = cp.FourierGrid(n=64, half_width=4.0)
        with pytest.raises(cp.CompactnessError, match="support"):
            cp.weighted_seminorm(cp.CutoffDensity(aniso, R=5.0), 0.5, small)

    def test_aliasing_guard(self, aniso):
        coarse = cp.FourierGrid(n=32, half_width=8.0)
        with pytest.raises(cp.CompactnessError, match="aliasing"):
            cp.weighted_seminorm(cp.CutoffDensity(aniso, R=5.0), 0.5, coarse)

    def test_ratio_bounded_across_sweep(self, aniso, grid, cutoff_kernel_g0):
        sn = cp.weighted_seminorm(cp.CutoffDensity(aniso, R=5.0), 0.5, grid)
        ratios = []
        for eps in (1.0, 0.5, 0.25):
            dB = dp.boltzmann_dissipation(aniso, cutoff_kernel_g0.with_epsilon(eps), SPEC)
            ratios.append(sn / (dB.value + 1.0))
        assert np.isfinite(max(ratios))
        assert max(ratios) / min(ratios) < 2.0


def test_characteristic_function_values(maxwellian):
    val = cp.characteristic_function(maxwellian, np.array([1.0, 0, 0]))
    assert_allclose(val, np.exp(-0.5), rtol=1e-14)
    assert_allclose(cp.characteristic_function(maxwellian, np.zeros(3)), 1.0)


def test_positivity_gap_values(maxwellian):
    assert cp.fourier_positivity_gap(maxwellian, np.zeros(3)) == 0.0
    assert_allclose(cp.fourier_positivity_gap(maxwellian, [1.0, 0, 0]),
                    1.0 - np.exp(-0.5), rtol=1e-12)


def test_positivity_gap_floor(aniso, mixture):
    for f in (aniso, mixture):
        floor = np.inf
        for xn in np.geomspace(0.05, 20.0, 15):
            gap = cp.fourier_positivity_gap(f, [xn / np.sqrt(3)] * 3)
            assert gap >= 0.0
            floor = min(floor, gap / min(xn**2, 1.0))
        assert floor > 0.0


def test_avg_lower_bound_holds(cutoff_kernel):
    for eps in (1.0, 0.1):
        ker = cutoff_kernel.with_epsilon(eps)
        for xn in (0.1, 1.0, 10.0):
            lhs, rhs = cp.fourier_avg_lower_bound([xn, 0.0, 0.0], ker, SPEC)
            assert lhs >= rhs > 0.0
    lhs, rhs = cp.fourier_avg_lower_bound([0.0, 0.0, 0.0], cutoff_kernel, SPEC)
    assert lhs == 0.0 and rhs == 0.0


def test_avg_lower_bound_constant_closed_form(cutoff_kernel):
    # for nu = 1/2 the profile integral is (pi/2)^(3/2) / (3/2)
    prof = cutoff_kernel.angular.base
    expected = (2.0 * prof.c1 / np.pi) * (np.pi / 2.0) ** 1.5 / 1.5
    _, rhs = cp.fourier_avg_lower_bound([1.0, 0.0, 0.0], cutoff_kernel, SPEC)
    assert_allclose(rhs, expected * 1.0, rtol=1e-14)


def test_avg_lower_bound_needs_small_eps(cutoff_kernel):
    ker = kn.CollisionKernel(gamma=cutoff_kernel.gamma,
                             angular=kn.ScaledKernel(cutoff_kernel.angular.base, 2.0),
                             kinetic_cutoff=True)
    with pytest.raises(cp.CompactnessError, match="eps <= 1"):
        cp.fourier_avg_lower_bound([1.0, 0, 0], ker, SPEC)


def test_truncation_constant(aniso, cutoff_kernel):
    c2 = cp.truncation_constant(aniso, cutoff_kernel, SPEC)
    # 150 pi * 2 * energy * 8/pi = 2400 * energy
    assert_allclose(c2, 2400.0 * aniso.moments.energy, rtol=1e-9)
    # eps-independence of the rescaled transfer
    c2b = cp.truncation_constant(aniso, cutoff_kernel.with_epsilon(0.01), SPEC)
    assert_allclose(c2, c2b, rtol=1e-12)


def test_cutoff_density_profile(aniso):
    fR = cp.CutoffDensity(aniso, R=5.0)
    inner = np.array([[4.9, 0, 0], [0, 0, 4.9], [1.0, 1.0, 1.0]])
    assert_allclose(fR.chi(inner), 1.0)
    outer = np.array([[6.1, 0, 0], [0, 6.1, 0]])
    assert_allclose(fR.chi(outer), 0.0)
    r = np.linspace(4.5, 6.5, 400)
    pts = np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=-1)
    vals = fR.chi(pts)
    lip = np.abs(np.diff(vals) / np.diff(r)).max()
    assert lip <= 2.0
    with pytest.raises(cp.CompactnessError):
        cp.CutoffDensity(aniso, R=-1.0)
