"""Deterministic quadrature over R^3, R^6, the sphere cap, and the circle.

Velocity integrals use a Gauss-Hermite tensor rule referenced to a Gaussian
frame (center, per-axis scale), or a truncated-box Gauss-Legendre tensor
rule. All reductions go through a fixed-shape pairwise tree so results are
bit-identical across runs regardless of how node evaluations are scheduled.

Error estimates are refinement differences (one extra level), not rigorous
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and rule choices for every integration domain.

    velocity_rule: "gauss_hermite" (Gaussian-weighted frames) or
        "gauss_legendre" (truncated box of +- half_width scale units).
    velocity_nodes: per-axis count for R^3 integrals.
    pair_nodes: per-axis count for R^6 tensor integrals (cost grows as the
        sixth power, so this defaults lower than velocity_nodes).
    sphere_theta_nodes / sphere_phi_nodes: cap rule for integrate_sphere and
        the azimuthal count used by the collision-operator sweeps.
    circle_nodes: uniform rule on S^1.
    theta_panels / theta_nodes_per_panel: composite Gauss-Legendre rule in
        the substituted angular variable t = chi^(2-nu) that absorbs the
        kernel's endpoint singularity.
    seed: seed for randomized spot checks only; deterministic rules ignore it.
    """

    velocity_rule: str = "gauss_hermite"
    velocity_nodes: int = 20
    pair_nodes: int = 10
    half_width: float = 8.0
    sphere_theta_nodes: int = 16
    sphere_phi_nodes: int = 8
    circle_nodes: int = 16
    theta_panels: int = 4
    theta_nodes_per_panel: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("velocity_nodes", "pair_nodes", "sphere_theta_nodes",
                     "sphere_phi_nodes", "circle_nodes"):
            if getattr(self, name) < 4:
                raise ValueError(f"{name} must be >= 4")
        if self.theta_panels < 1 or self.theta_nodes_per_panel < 4:
            raise ValueError("angular rule needs >= 1 panel and >= 4 nodes per panel")
        if self.velocity_rule not in ("gauss_hermite", "gauss_legendre"):
            raise ValueError(f"unknown velocity rule {self.velocity_rule!r}")
        if self.half_width <= 0:
            raise ValueError("half_width must be positive")

    def refined(self) -> "QuadratureSpec":
        """One refinement level up, used for error estimates on cheap rules."""
        return replace(
            self,
            velocity_nodes=2 * self.velocity_nodes,
            pair_nodes=self.pair_nodes + 1,
            sphere_theta_nodes=self.sphere_theta_nodes + 4,
            sphere_phi_nodes=self.sphere_phi_nodes + 2,
            circle_nodes=self.circle_nodes + 4,
            theta_nodes_per_panel=self.theta_nodes_per_panel + 2,
        )

    def coarsened(self) -> "QuadratureSpec":
        """One refinement level down.

        Expensive R^6 x S^2 reductions report the value at the configured
        level and estimate the error against this cheaper level, so the
        estimate costs a fraction of the value instead of a multiple.
        """
        return replace(
            self,
            pair_nodes=max(4, self.pair_nodes - 1),
            sphere_phi_nodes=max(4, self.sphere_phi_nodes - 2),
            theta_nodes_per_panel=max(4, self.theta_nodes_per_panel - 2),
        )


@dataclass(frozen=True)
class IntegralResult:
    """Quadrature value with a refinement-difference error estimate."""

    value: float
    error_estimate: float
    node_count: int

    def __post_init__(self) -> None:
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be nonnegative")


def pairwise_sum(values: np.ndarray) -> float:
    """Fixed-shape binary-tree reduction.

    The array is zero-padded to a power of two and folded in halves, so the
    summation tree depends only on the length, never on chunking or
    scheduling; identical inputs give bit-identical sums.
    """
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    n = 1 << (int(a.size) - 1).bit_length()
    if n != a.size:
        a = np.concatenate([a, np.zeros(n - a.size)])
    else:
        a = a.copy()
    while a.size > 1:
        half = a.size // 2
        a = a[:half] + a[half:]
    return float(a[0])


def _check_finite(values: np.ndarray, points: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.argmax(bad))
        raise QuadratureError(
            f"non-finite {what} evaluation at node {np.asarray(points).reshape(-1, points.shape[-1])[idx]}"
        )


@lru_cache(maxsize=64)
def _axis_rule(rule: str, n: int, half_width: float) -> tuple[np.ndarray, np.ndarray]:
    """1D nodes/weights for integrating dt against unit scale and center 0."""
    if rule == "gauss_hermite":
        t, w = np.polynomial.hermite.hermgauss(n)
        # absorb the e^{-t^2} weight so that sum w_i g(t_i) ~ int g(t) dt
        return np.sqrt(2.0) * t, np.sqrt(2.0) * w * np.exp(t**2)
    t, w = np.polynomial.legendre.leggauss(n)
    return half_width * t, half_width * w


@lru_cache(maxsize=32)
def _r3_grid(rule: str, n: int, half_width: float,
             center: tuple[float, float, float],
             scale: tuple[float, float, float]) -> tuple[np.ndarray, np.ndarray]:
    axes = []
    weights = []
    for c, s in zip(center, scale):
        t, w = _axis_rule(rule, n, half_width)
        axes.append(c + s * t)
        weights.append(s * w)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    wgt = (weights[0][:, None, None] * weights[1][None, :, None] * weights[2][None, None, :]).reshape(-1)
    return pts, wgt


def r3_nodes(spec: QuadratureSpec,
             center: tuple[float, float, float] = (0.0, 0.0, 0.0),
             scale: tuple[float, float, float] = (1.0, 1.0, 1.0),
             n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Tensor nodes/weights on R^3 in the Gaussian frame (center, scale)."""
    return _r3_grid(spec.velocity_rule, n or spec.velocity_nodes, spec.half_width,
                    tuple(float(c) for c in center), tuple(float(s) for s in scale))


def r6_nodes(spec: QuadratureSpec,
             center: tuple[float, float, float] = (0.0, 0.0, 0.0),
             scale: tuple[float, float, float] = (1.0, 1.0, 1.0),
             n: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tensor pairs (v, v*) with combined weights for R^6 integrals."""
    pts, wgt = _r3_grid(spec.velocity_rule, n or spec.pair_nodes, spec.half_width,
                        tuple(float(c) for c in center), tuple(float(s) for s in scale))
    m = pts.shape[0]
    v = np.repeat(pts, m, axis=0)
    v_star = np.tile(pts, (m, 1))
    w = (wgt[:, None] * wgt[None, :]).reshape(-1)
    return v, v_star, w


def _integrate_once_r3(g: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec,
                       center, scale, n: int) -> tuple[float, int]:
    pts, wgt = r3_nodes(spec, center, scale, n=n)
    vals = np.asarray(g(pts), dtype=float)
    _check_finite(vals, pts, "integrand")
    return pairwise_sum(wgt * vals), pts.shape[0]


def integrate_r3(g: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec,
                 center: tuple[float, float, float] = (0.0, 0.0, 0.0),
                 scale: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> IntegralResult:
    """Integrate g over R^3. g maps (N, 3) -> (N,)."""
    coarse, _ = _integrate_once_r3(g, spec, center, scale, spec.velocity_nodes)
    fine, n_fine = _integrate_once_r3(g, spec, center, scale, spec.refined().velocity_nodes)
    return IntegralResult(value=fine, error_estimate=abs(fine - coarse), node_count=n_fine)


def _integrate_once_r6(g, spec: QuadratureSpec, center, scale, n: int) -> tuple[float, int]:
    v, v_star, w = r6_nodes(spec, center, scale, n=n)
    vals = np.asarray(g(v, v_star), dtype=float)
    _check_finite(vals, v, "integrand")
    return pairwise_sum(w * vals), v.shape[0]


def integrate_r6(g: Callable[[np.ndarray, np.ndarray], np.ndarray], spec: QuadratureSpec,
                 center: tuple[float, float, float] = (0.0, 0.0, 0.0),
                 scale: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> IntegralResult:
    """Integrate g over R^6 = (v, v*) pairs. g maps (N,3),(N,3) -> (N,)."""
    coarse, _ = _integrate_once_r6(g, spec, center, scale, spec.pair_nodes)
    fine, n_fine = _integrate_once_r6(g, spec, center, scale, spec.refined().pair_nodes)
    return IntegralResult(value=fine, error_estimate=abs(fine - coarse), node_count=n_fine)


@lru_cache(maxsize=32)
def _cap_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) on [0, 1] (the theta in [0, pi/2] cap),
    uniform nodes in phi."""
    t, w = np.polynomial.legendre.leggauss(n_theta)
    mu = 0.5 * (t + 1.0)
    wmu = 0.5 * w
    theta = np.arccos(mu)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)
    return theta, wmu, phi, wphi


def _integrate_once_sphere(g, k, spec: QuadratureSpec, n_theta: int, n_phi: int) -> tuple[float, int]:
    from .geometry import sigma_from_angles

    theta, wmu, phi, wphi = _cap_rule(n_theta, n_phi)
    total = np.empty(theta.size * phi.size)
    pos = 0
    for i, th in enumerate(theta):
        sigma, _ = sigma_from_angles(k, np.full(phi.shape, th), phi)
        vals = np.asarray(g(sigma), dtype=float)
        _check_finite(vals, sigma, "sphere integrand")
        total[pos:pos + phi.size] = wmu[i] * wphi * vals
        pos += phi.size
    return pairwise_sum(total), theta.size * phi.size


def integrate_sphere(g: Callable[[np.ndarray], np.ndarray], k: np.ndarray,
                     spec: QuadratureSpec) -> IntegralResult:
    """Integrate g(sigma) over the hemisphere cap theta in [0, pi/2] about k.

    The measure is d(sigma) = sin(theta) d(theta) d(phi), handled exactly by
    Gauss-Legendre in cos(theta).
    """
    coarse, _ = _integrate_once_sphere(g, k, spec, spec.sphere_theta_nodes, spec.sphere_phi_nodes)
    ref = spec.refined()
    fine, n_fine = _integrate_once_sphere(g, k, spec, ref.sphere_theta_nodes, ref.sphere_phi_nodes)
    return IntegralResult(value=fine, error_estimate=abs(fine - coarse), node_count=n_fine)


def integrate_theta_singular(g: Callable[[np.ndarray], np.ndarray], kernel,
                             spec: QuadratureSpec) -> IntegralResult:
    """Integrate g(theta) * beta_eps(theta) over the kernel's angular support.

    The kernel's singular weight is absorbed into the nodes (see
    kernels.angular_nodes); g must be O(theta^2) near zero for the rescaled
    family to have a finite integral, which all collision integrands satisfy.
    """
    from .kernels import angular_nodes

    theta, w = angular_nodes(kernel, spec)
    vals = np.asarray(g(theta), dtype=float)
    _check_finite(vals, theta[:, None], "angular integrand")
    coarse = pairwise_sum(w * vals)

    theta_f, w_f = angular_nodes(kernel, spec.refined())
    vals_f = np.asarray(g(theta_f), dtype=float)
    _check_finite(vals_f, theta_f[:, None], "angular integrand")
    fine = pairwise_sum(w_f * vals_f)

    err = abs(fine - coarse)
    scale = max(abs(fine), abs(coarse), 1e-300)
    if err > 1e-3 * scale and err > 1e-10:
        raise QuadratureError(
            f"angular quadrature did not converge: refinement moved the value by {err:.3e} (value {fine:.6e})"
        )
    return IntegralResult(value=fine, error_estimate=err, node_count=theta_f.size)


def circle_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform azimuthal rule on [0, 2 pi)."""
    phi = 2.0 * np.pi * np.arange(n) / n
    return phi, np.full(n, 2.0 * np.pi / n)
