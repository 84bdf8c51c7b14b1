"""Angular collision-kernel families and their concentration scaling.

A collision kernel factorizes as B(r, theta) sin(theta) = r^gamma beta(theta)
with an angular profile beta on [0, pi/2] carrying a nonintegrable endpoint
singularity beta(theta) >= c1 theta^(-1-nu). Two concentration variants are
supported:

  rescaled          beta_eps(theta) = (pi^3/eps^3) beta(pi theta / eps) on
                    (0, eps/2), zero elsewhere; preserves the momentum
                    transfer integral for every eps.
  coulomb_log_cutoff beta_eps(theta) = beta(theta) 1_{theta >= eps} / log(1/eps),
                    the logarithmic adjustment needed when nu = 2 makes the
                    transfer integral diverge.

Profiles are normalized once at construction so that the angular momentum
transfer equals 8/pi; every downstream operator assumes that normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from .quadrature import QuadratureSpec, pairwise_sum

TRANSFER = 8.0 / np.pi


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class AngularProfile:
    """Angular profile beta(theta) = normalization_constant * shape(theta).

    nu is the singularity exponent, c1 the best lower-bound constant with
    c1 * theta^(-1-nu) <= beta(theta) on (0, pi/2]. c1 scales together with
    the normalization constant.
    """

    nu: float
    c1: float
    shape: Callable[[np.ndarray], np.ndarray]
    normalization_constant: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.nu <= 2.0):
            raise KernelError(f"nu must lie in (0, 2]; got {self.nu}")
        if self.c1 <= 0 or self.normalization_constant <= 0:
            raise KernelError("c1 and normalization constant must be positive")

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.normalization_constant * np.asarray(self.shape(theta), dtype=float)


def power_law_profile(nu: float) -> AngularProfile:
    """Raw (unnormalized) profile theta^(-1-nu).

    nu = 1/2 is the Maxwellian-molecule row, nu = 2 the Coulomb row of the
    inverse-power-law table.
    """
    expo = -1.0 - nu

    def shape(theta: np.ndarray) -> np.ndarray:
        return np.asarray(theta, dtype=float) ** expo

    return AngularProfile(nu=nu, c1=1.0, shape=shape)


def tabulated_profile(theta_grid: np.ndarray, values: np.ndarray, nu: float) -> AngularProfile:
    """Profile from samples, log-log interpolated, with the declared
    theta^(-1-nu) behaviour extended below the first grid point."""
    tg = np.asarray(theta_grid, dtype=float)
    vals = np.asarray(values, dtype=float)
    if tg.ndim != 1 or np.any(np.diff(tg) <= 0) or np.any(tg <= 0):
        raise KernelError("theta grid must be strictly increasing and positive")
    if np.any(vals <= 0):
        raise KernelError("tabulated profile values must be positive")
    log_t, log_v = np.log(tg), np.log(vals)
    sing = vals[0] * tg[0] ** (1.0 + nu)

    def shape(theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.exp(np.interp(np.log(np.maximum(theta, tg[0])), log_t, log_v))
        small = theta < tg[0]
        if np.any(small):
            out = np.where(small, sing * theta ** (-1.0 - nu), out)
        return out

    c1 = float(np.min(vals * tg ** (1.0 + nu)))
    return AngularProfile(nu=nu, c1=min(c1, sing), shape=shape)


@dataclass(frozen=True)
class ScaledKernel:
    """An angular profile together with its concentration parameter."""

    base: AngularProfile
    epsilon: float
    variant: str = "rescaled"

    def __post_init__(self) -> None:
        if self.variant == "coulomb_log_cutoff":
            if not (0.0 < self.epsilon < 1.0):
                raise KernelError("coulomb_log_cutoff needs epsilon in (0, 1)")
        elif self.variant == "rescaled":
            if not (0.0 < self.epsilon <= np.pi):
                raise KernelError("rescaled variant needs epsilon in (0, pi]")
        else:
            raise KernelError(f"unknown kernel variant {self.variant!r}")

    def with_epsilon(self, eps: float) -> "ScaledKernel":
        return replace(self, epsilon=eps)


@dataclass(frozen=True)
class CollisionKernel:
    """Full kernel B_eps(r, theta) sin(theta) = r^gamma beta_eps(theta).

    With kinetic_cutoff the kinetic factor is |z|^gamma_kin = min(1, |z|^gamma),
    i.e. 1 for |z| <= 1 and |z|^gamma for |z| >= 1 (gamma <= 0), which is
    pointwise below the plain power.
    """

    gamma: float
    angular: ScaledKernel
    kinetic_cutoff: bool = False

    def __post_init__(self) -> None:
        if not (-4.0 <= self.gamma <= 0.0):
            raise KernelError(f"gamma must lie in [-4, 0]; got {self.gamma}")

    def kinetic_factor(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kinetic_cutoff:
            return np.maximum(r, 1.0) ** self.gamma
        return r**self.gamma

    def with_epsilon(self, eps: float) -> "CollisionKernel":
        return replace(self, angular=self.angular.with_epsilon(eps))


def beta_eps(kernel: ScaledKernel, theta: np.ndarray) -> np.ndarray:
    """Evaluate the concentrated profile; zero outside its support."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0.0):
        raise KernelError("angle out of domain: theta must be positive")
    eps = kernel.epsilon
    if kernel.variant == "rescaled":
        inside = theta < eps / 2.0
        safe = np.where(inside, theta, eps / 4.0)
        vals = (np.pi**3 / eps**3) * kernel.base(np.pi * safe / eps)
        return np.where(inside, vals, 0.0)
    inside = (theta >= eps) & (theta <= np.pi / 2.0)
    safe = np.where(inside, theta, np.pi / 4.0)
    return np.where(inside, kernel.base(safe) / np.log(1.0 / eps), 0.0)


@lru_cache(maxsize=128)
def _panel_gl(panels: int, nodes: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(lo, hi, panels + 1)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def base_angular_nodes(profile: AngularProfile, spec: QuadratureSpec,
                       upper: float = np.pi / 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights with beta absorbed: sum w_i g(chi_i) ~ int g beta d(chi).

    Uses the substitution t = chi^(2-nu), which turns the critical
    chi^(1-nu)-type integrands into bounded (for pure power laws, constant)
    functions of t.
    """
    if profile.nu >= 2.0:
        raise KernelError("base profile with nu >= 2 is not directly integrable; "
                          "requires coulomb_log_cutoff variant")
    q = 2.0 - profile.nu
    t, wt = _panel_gl(spec.theta_panels, spec.theta_nodes_per_panel, 0.0, upper**q)
    chi = t ** (1.0 / q)
    dchi_dt = (1.0 / q) * t ** (1.0 / q - 1.0)
    return chi, wt * dchi_dt * profile(chi)


@lru_cache(maxsize=256)
def angular_nodes(kernel: ScaledKernel, spec: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights absorbing beta_eps over the kernel's angular support.

    sum_i w_i g(theta_i) approximates int g(theta) beta_eps(theta) d(theta).
    """
    eps = kernel.epsilon
    if kernel.variant == "rescaled":
        chi, w = base_angular_nodes(kernel.base, spec)
        # theta = eps*chi/pi maps the support onto (0, pi/2) uniformly in eps
        return eps * chi / np.pi, (np.pi**2 / eps**2) * w
    # logarithmic substitution u = log(theta) handles the theta^(-3) weight
    u, wu = _panel_gl(spec.theta_panels, spec.theta_nodes_per_panel,
                      np.log(eps), np.log(np.pi / 2.0))
    theta = np.exp(u)
    return theta, wu * theta * kernel.base(theta) / np.log(1.0 / eps)


def momentum_transfer(kernel: ScaledKernel, spec: QuadratureSpec, rtol: float = 1e-6) -> float:
    """The angular momentum transfer int theta^2 beta_eps(theta) d(theta).

    Equals 8/pi for every eps in the rescaled variant (after normalization),
    and converges to 8/pi as eps drops in the log-cutoff variant.
    """
    theta, w = angular_nodes(kernel, spec)
    coarse = pairwise_sum(w * theta**2)
    theta_f, w_f = angular_nodes(kernel, spec.refined())
    fine = pairwise_sum(w_f * theta_f**2)
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-300):
        raise KernelError(
            f"momentum transfer quadrature did not converge: levels {coarse!r} vs {fine!r}"
        )
    return fine


def normalize(profile: AngularProfile, spec: QuadratureSpec) -> AngularProfile:
    """Rescale the profile so that int theta^2 beta = 8/pi on [0, pi/2].

    Idempotent. Profiles with nu >= 2 have a divergent transfer integral and
    must go through the coulomb_log_cutoff variant instead.
    """
    if profile.nu >= 2.0:
        raise KernelError("divergent transfer integral for nu >= 2: "
                          "requires coulomb_log_cutoff variant")
    chi, w = base_angular_nodes(profile, spec)
    coarse = pairwise_sum(w * chi**2)
    chi_f, w_f = base_angular_nodes(profile, spec.refined())
    fine = pairwise_sum(w_f * chi_f**2)
    if not np.isfinite(fine) or abs(fine - coarse) > 1e-8 * abs(fine):
        raise KernelError(f"transfer integral did not converge: {coarse!r} vs {fine!r}")
    scale = TRANSFER / fine
    return replace(profile, normalization_constant=profile.normalization_constant * scale,
                   c1=profile.c1 * scale)


def normalize_log_cutoff(profile: AngularProfile) -> AngularProfile:
    """Normalization for the nu = 2 family: fixes the singularity coefficient
    lim theta^3 beta(theta) to 8/pi, so the cutoff transfer tends to 8/pi."""
    if profile.nu != 2.0:
        raise KernelError("log-cutoff normalization applies to the nu = 2 family")
    theta_ref = 1e-6
    sing = float(profile(np.asarray(theta_ref))) * theta_ref**3
    scale = TRANSFER / sing
    return replace(profile, normalization_constant=profile.normalization_constant * scale,
                   c1=profile.c1 * scale)


def build_kernel(gamma: float, nu: float, epsilon: float,
                 variant: str = "rescaled", kinetic_cutoff: bool = False,
                 spec: QuadratureSpec | None = None,
                 family: str = "power_law",
                 theta_grid: np.ndarray | None = None,
                 values: np.ndarray | None = None) -> CollisionKernel:
    """Construct a normalized collision kernel from family parameters."""
    spec = spec or QuadratureSpec()
    if family == "power_law":
        raw = power_law_profile(nu)
    elif family == "tabulated":
        if theta_grid is None or values is None:
            raise KernelError("tabulated family needs theta_grid and values")
        raw = tabulated_profile(theta_grid, values, nu)
    else:
        raise KernelError(f"unknown angular family {family!r}")
    if variant == "coulomb_log_cutoff":
        prof = normalize_log_cutoff(raw) if nu == 2.0 else normalize(raw, spec)
    else:
        prof = normalize(raw, spec)
    return CollisionKernel(gamma=gamma, angular=ScaledKernel(prof, epsilon, variant),
                           kinetic_cutoff=kinetic_cutoff)
