"""Entropy dissipations, their affine (dual) representations, and actions.

The Boltzmann dissipation is assembled in product form
(difference x log-difference), never by dividing by the logarithmic mean, so
nodes with matched pre/post densities cost nothing. Affine representations
are evaluated for explicit test functions; suprema are taken over configured
finite families (optionally with the optimal scalar rescaling, which keeps
every reported affine value nonnegative and as tight as the family allows).

Actions and their metric-affine duals share one set of angular nodes, so the
pointwise Young inequality makes the duality hold exactly in the discrete
sums, with equality at gradient-type mobilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .functions import GaussianMixture, PairScalarTestFunction, PairVectorField, dot3, sq3
from .kernels import CollisionKernel, angular_nodes, beta_eps
from .operators import (_dbar_cached, _dbar_values, _make_dbar_term, _pair_grad,
                        collision_sweep, dtilde, dtilde_div_dtilde, pair_grid, pair_reduce)
from .quadrature import IntegralResult, QuadratureSpec


class DissipationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar building blocks


def log_mean(a, b):
    """Logarithmic mean (b - a)/(log b - log a), defined as a when a = b.

    Computed as (b - a)/log1p((b - a)/a), which is cancellation-free at any
    argument ratio (the naive quotient loses ~1e-10 of relative accuracy for
    ratios near one, exactly where small-deflection collisions live).
    Accepts scalars or arrays; inputs must be positive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise DissipationError("log_mean needs positive arguments")
    r = (b - a) / a
    near = np.abs(r) < 1e-14
    safe = np.where(near, 1.0, np.log1p(np.where(near, 0.0, r)))
    out = np.where(near, a * (1.0 + 0.5 * r), (b - a) / safe)
    return float(out) if out.ndim == 0 else out


def _log_mean_from_logs(fa, fb, log_fa, log_fb):
    """Logarithmic mean from precomputed logs: fa * expm1(d)/d, d = log(fb/fa)."""
    d = log_fb - log_fa
    near = np.abs(d) < 1e-14
    safe = np.where(near, 1.0, d)
    return np.where(near, fa, fa * np.expm1(safe) / safe)


def entropy(f: GaussianMixture, spec: QuadratureSpec) -> float:
    """H[f] = int f log f, integrated per mixture component."""
    from .functions import mixture_expectation

    return mixture_expectation(f, f.log_value, spec).value


def _pair_logs(f: GaussianMixture, v: np.ndarray, v_star: np.ndarray) -> np.ndarray:
    return f.log_value(v) + f.log_value(v_star)


# ---------------------------------------------------------------------------
# dissipations


def _dissipation_terms(f: GaussianMixture) -> tuple[Callable, dict[str, Callable]]:
    def prepare(chunk):
        chunk.logF = _pair_logs(f, chunk.v, chunk.v_star)
        chunk.F = np.exp(chunk.logF)

    def diss(chunk, vp, vsp, sigma, theta):
        logFp = _pair_logs(f, vp, vsp)
        Fp = np.exp(logFp)
        return (Fp - chunk.F[:, None]) * (logFp - chunk.logF[:, None])

    def reduced(chunk, vp, vsp, sigma, theta):
        sp = np.exp(0.5 * _pair_logs(f, vp, vsp))
        return (sp - np.exp(0.5 * chunk.logF)[:, None]) ** 2

    return prepare, {"diss": diss, "reduced": reduced}


def _boltzmann_dissipations_at(f: GaussianMixture, kernel: CollisionKernel,
                               spec: QuadratureSpec) -> tuple[float, float]:
    grid = pair_grid(f, spec)
    prepare, terms = _dissipation_terms(f)
    kin = lambda c: kernel.kinetic_factor(c.r)
    out = collision_sweep(grid, kernel, spec, terms=terms,
                          pair_factors={"diss": kin, "reduced": kin}, prepare=prepare)
    return 0.25 * out["diss"], out["reduced"]


def boltzmann_dissipation(f: GaussianMixture, kernel: CollisionKernel,
                          spec: QuadratureSpec) -> IntegralResult:
    """D_B_eps(f) = 1/4 int int int (f'f*' - ff*)(log f'f*' - log ff*) B_eps."""
    coarse, _ = _boltzmann_dissipations_at(f, kernel, spec.coarsened())
    value, _ = _boltzmann_dissipations_at(f, kernel, spec)
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def reduced_boltzmann_dissipation(f: GaussianMixture, kernel: CollisionKernel,
                                  spec: QuadratureSpec) -> IntegralResult:
    """D_B^R(f) = int int int (sqrt(f'f*') - sqrt(ff*))^2 B_eps, a pointwise
    lower bound of the full dissipation."""
    _, coarse = _boltzmann_dissipations_at(f, kernel, spec.coarsened())
    _, value = _boltzmann_dissipations_at(f, kernel, spec)
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def _landau_dissipation_at(f: GaussianMixture, gamma: float, spec: QuadratureSpec) -> float:
    grid = pair_grid(f, spec)

    def term(c):
        F = f.pair_value(c.v, c.v_star)
        G = f.grad_log(c.v) - f.grad_log(c.v_star)
        pg2 = sq3(G) - dot3(c.k, G) ** 2
        return F * c.r ** (2.0 + gamma) * pg2

    return 0.5 * pair_reduce(grid, {"d": term})["d"]


def landau_dissipation(f: GaussianMixture, gamma: float, spec: QuadratureSpec) -> IntegralResult:
    """D_L(f) = 2 int int |v-v*|^(2+gamma) |Pi (grad - grad_*) sqrt(ff*)|^2,
    evaluated through the analytic log-gradient
    (grad - grad_*) sqrt(ff*) = (1/2) sqrt(ff*) (grad log f - grad_* log f*)."""
    coarse = _landau_dissipation_at(f, gamma, spec.coarsened())
    value = _landau_dissipation_at(f, gamma, spec)
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


# ---------------------------------------------------------------------------
# affine (dual) representations of the dissipations


def div_projected(V: PairVectorField, v: np.ndarray, v_star: np.ndarray) -> np.ndarray:
    """(grad - grad_*) . (Pi[v-v*] V) = div_x(Pi[x] V) for an AS field."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    r = np.sqrt(sq3(u))
    live = r > 1e-12
    rs = np.where(live, r, 1.0)
    uhat = u / rs[..., None]
    val = V.value(v, v_star)
    J = V.jac_x(v, v_star)
    trJ = J[..., 0, 0] + J[..., 1, 1] + J[..., 2, 2]
    uJu = dot3(uhat, np.einsum("...i,...ij->...j", uhat, J))
    out = trJ - uJu - (4.0 / rs) * dot3(uhat, val)
    return np.where(live, out, 0.0)


def _affine_landau_pieces(f: GaussianMixture, arg, gamma: float,
                          spec: QuadratureSpec) -> tuple[float, float]:
    """(linear, quadratic) with affine value = -4*linear - 2*quadratic."""
    grid = pair_grid(f, spec)
    if arg.kind == "DS":
        def lin(c):
            sq = np.exp(0.5 * _pair_logs(f, c.v, c.v_star))
            return sq * dtilde_div_dtilde(arg, c.v, c.v_star, gamma)

        def quad(c):
            return sq3(dtilde(arg, c.v, c.v_star, gamma))
    elif arg.kind == "AS":
        def lin(c):
            sq = np.exp(0.5 * _pair_logs(f, c.v, c.v_star))
            return sq * c.r ** (1.0 + 0.5 * gamma) * div_projected(arg, c.v, c.v_star)

        def quad(c):
            return sq3(arg.value(c.v, c.v_star))
    else:
        raise DissipationError("affine_landau needs a DS scalar or AS vector field")
    out = pair_reduce(grid, {"lin": lin, "quad": quad})
    return out["lin"], out["quad"]


def affine_landau(f: GaussianMixture, arg, gamma: float, spec: QuadratureSpec) -> IntegralResult:
    """Affine lower-bound value for the Landau dissipation.

    DS scalar psi: -4 int sqrt(ff*) dtilde.dtilde psi - 2 int |dtilde psi|^2.
    AS field xi:   -4 int sqrt(ff*) |v-v*|^(1+gamma/2) div(Pi xi) - 2 int |xi|^2.
    Always <= D_L(f) up to quadrature tolerance.
    """
    lc, qc = _affine_landau_pieces(f, arg, gamma, spec.coarsened())
    lv, qv = _affine_landau_pieces(f, arg, gamma, spec)
    value = -4.0 * lv - 2.0 * qv
    coarse = -4.0 * lc - 2.0 * qc
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def _affine_boltzmann_pieces(f: GaussianMixture, psi: PairScalarTestFunction,
                             kernel: CollisionKernel, spec: QuadratureSpec) -> tuple[float, float]:
    """(linear, quadratic) with affine value = -2*linear - quadratic/4."""
    grid = pair_grid(f, spec)
    prep_psi, term_psi = _make_dbar_term(psi)

    def prepare(chunk):
        prep_psi(chunk)
        chunk.sqF = np.exp(0.5 * _pair_logs(f, chunk.v, chunk.v_star))

    def term_lin(chunk, vp, vsp, sigma, theta):
        return _dbar_cached(psi, 0, chunk, vp, vsp)

    def term_sq(chunk, vp, vsp, sigma, theta):
        return _dbar_cached(psi, 0, chunk, vp, vsp) ** 2

    out = collision_sweep(
        grid, kernel, spec,
        terms={"lin": term_lin, "quad": term_sq},
        pair_factors={"lin": lambda c: c.sqF * kernel.kinetic_factor(c.r),
                      "quad": lambda c: kernel.kinetic_factor(c.r)},
        prepare=prepare)
    return out["lin"], out["quad"]


def affine_boltzmann(f: GaussianMixture, psi: PairScalarTestFunction,
                     kernel: CollisionKernel, spec: QuadratureSpec) -> IntegralResult:
    """Affine lower-bound value for the Boltzmann dissipation:

        -2 int int sqrt(ff*) (int dbar psi B_eps) - 1/4 int int int |dbar psi|^2 B_eps

    for DS test functions; <= D_B^R(f) <= D_B_eps(f) up to quadrature tolerance.
    """
    if psi.kind != "DS":
        raise DissipationError("affine_boltzmann needs a DS test function")
    lc, qc = _affine_boltzmann_pieces(f, psi, kernel, spec.coarsened())
    lv, qv = _affine_boltzmann_pieces(f, psi, kernel, spec)
    value = -2.0 * lv - 0.25 * qv
    coarse = -2.0 * lc - 0.25 * qc
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def optimal_scaling(linear: float, quadratic: float, kind: str) -> tuple[float, float]:
    """Best scalar s for the affine value of s*psi, and the value there.

    Boltzmann: value(s) = -2 L s - (Q/4) s^2, maximized at s = -4L/Q.
    Landau:    value(s) = -4 L s - 2 Q s^2,  maximized at s = -L/Q.
    """
    if quadratic <= 0.0:
        return 0.0, 0.0
    if kind == "boltzmann":
        s = -4.0 * linear / quadratic
        return s, 4.0 * linear**2 / quadratic
    s = -linear / quadratic
    return s, 2.0 * linear**2 / quadratic


# ---------------------------------------------------------------------------
# mobilities, actions, metric-affine duals


@dataclass(frozen=True)
class Mobility:
    """A collision rate (scalar on pairs x sphere) or grazing rate (vector on pairs).

    boltzmann kind: field(v, v_star, sigma, theta) -> (...,) scalar
    landau kind:    field(v, v_star) -> (..., 3) vector
    """

    kind: str
    field: Callable

    def __post_init__(self) -> None:
        if self.kind not in ("boltzmann", "landau"):
            raise DissipationError(f"unknown mobility kind {self.kind!r}")


@dataclass(frozen=True)
class LiftSpec:
    """Exponents of the angular-moment lift from collision rates to grazing rates.

    q = 1 on gamma in [-2, 0), q = 2 on gamma in [-4, -2);
    delta must lie in (0, -gamma/2) resp. (0, -gamma/2 - 1).
    """

    q: int
    delta: float

    def validate(self, gamma: float) -> None:
        if -2.0 <= gamma < 0.0:
            q_req, d_max = 1, -gamma / 2.0
        elif -4.0 <= gamma < -2.0:
            q_req, d_max = 2, -gamma / 2.0 - 1.0
        else:
            raise DissipationError("lift needs gamma in [-4, 0)")
        if self.q != q_req:
            raise DissipationError(f"invalid lift bracket: q must be {q_req} for gamma={gamma}")
        if not (0.0 < self.delta < d_max):
            raise DissipationError(f"invalid lift bracket: delta must lie in (0, {d_max})")


def lift_spec_for(gamma: float, delta: float | None = None) -> LiftSpec:
    """Canonical lift exponents for gamma, with delta at half its upper bound
    unless given."""
    if -2.0 <= gamma < 0.0:
        q, d_max = 1, -gamma / 2.0
    elif -4.0 <= gamma < -2.0:
        q, d_max = 2, -gamma / 2.0 - 1.0
    else:
        raise DissipationError("lift needs gamma in [-4, 0)")
    spec = LiftSpec(q=q, delta=delta if delta is not None else 0.5 * d_max)
    spec.validate(gamma)
    return spec


def gradient_mobility_boltzmann(f: GaussianMixture, psi, kernel: CollisionKernel) -> Mobility:
    """The optimal-rate shape M = dbar(psi) * Lambda(f) * B_eps."""
    def field(v, v_star, sigma, theta):
        v = np.asarray(v, dtype=float)
        v_star = np.asarray(v_star, dtype=float)
        u = v - v_star
        r = np.sqrt(sq3(u))
        mid = 0.5 * (v + v_star)
        half = (0.5 * r)[..., None] * np.asarray(sigma, dtype=float)
        vp, vsp = mid + half, mid - half
        if psi.kind == "single":
            dpsi = psi.value(vp) + psi.value(vsp) - psi.value(v) - psi.value(v_star)
        else:
            dpsi = (psi.value(vp, vsp) + psi.value(vsp, vp)
                    - psi.value(v, v_star) - psi.value(v_star, v))
        logF = f.log_value(v) + f.log_value(v_star)
        logFp = f.log_value(vp) + f.log_value(vsp)
        lam = _log_mean_from_logs(np.exp(logF), np.exp(logFp), logF, logFp)
        big_b = kernel.kinetic_factor(r) * beta_eps(kernel.angular, theta) / np.sin(theta)
        return dpsi * lam * big_b

    return Mobility(kind="boltzmann", field=field)


def gradient_mobility_landau(f: GaussianMixture, psi, gamma: float) -> Mobility:
    """The optimal-rate shape M = dtilde(psi) * f f*."""
    def field(v, v_star):
        return f.pair_value(v, v_star)[..., None] * dtilde(psi, v, v_star, gamma)

    return Mobility(kind="landau", field=field)


def _action_metric_pieces(f: GaussianMixture, M: Mobility, psi, kernel: CollisionKernel,
                          spec: QuadratureSpec) -> dict[str, float]:
    """Shared sweep for the Boltzmann action and its metric-affine dual.

    All pieces use the same nodes, so Young's inequality holds exactly in
    the discrete sums.
    """
    grid = pair_grid(f, spec)
    prep_psi, _ = (_make_dbar_term(psi) if psi is not None else (None, None))

    def prepare(chunk):
        if prep_psi is not None:
            prep_psi(chunk)
        chunk.logF = _pair_logs(f, chunk.v, chunk.v_star)
        chunk.F = np.exp(chunk.logF)

    def lam_of(chunk, vp, vsp):
        logFp = _pair_logs(f, vp, vsp)
        return _log_mean_from_logs(chunk.F[:, None], np.exp(logFp),
                                   chunk.logF[:, None], logFp)

    ang = kernel.angular

    def action_term(chunk, vp, vsp, sigma, theta):
        m = M.field(chunk.v[:, None, :], chunk.v_star[:, None, :], sigma, theta)
        msym = M.field(chunk.v_star[:, None, :], chunk.v[:, None, :], -sigma, theta)
        m2 = 0.5 * (m**2 + msym**2)
        b = beta_eps(ang, np.asarray(theta))
        return m2 * np.sin(theta) ** 2 / (lam_of(chunk, vp, vsp) * b**2)

    def pair_m(chunk, vp, vsp, sigma, theta):
        m = M.field(chunk.v[:, None, :], chunk.v_star[:, None, :], sigma, theta)
        msym = M.field(chunk.v_star[:, None, :], chunk.v[:, None, :], -sigma, theta)
        dpsi = _dbar_values(psi, chunk, vp, vsp)
        b = beta_eps(ang, np.asarray(theta))
        return 0.5 * (m + msym) * dpsi * np.sin(theta) / b

    def quad_term(chunk, vp, vsp, sigma, theta):
        dpsi = _dbar_values(psi, chunk, vp, vsp)
        return dpsi**2 * lam_of(chunk, vp, vsp)

    terms: dict[str, Callable] = {"action": action_term}
    factors: dict[str, Callable] = {"action": lambda c: 1.0 / kernel.kinetic_factor(c.r)}
    if psi is not None:
        terms["m_dpsi"] = pair_m
        factors["m_dpsi"] = lambda c: np.ones(c.r.shape)
        terms["dpsi2_lam"] = quad_term
        factors["dpsi2_lam"] = lambda c: kernel.kinetic_factor(c.r)
    return collision_sweep(grid, kernel, spec, terms=terms, pair_factors=factors,
                           prepare=prepare)


def boltzmann_action(f: GaussianMixture, M: Mobility, kernel: CollisionKernel,
                     spec: QuadratureSpec) -> IntegralResult:
    """A_B(f, M) = 1/4 int int int |M|^2 / (Lambda(f) B_eps), restricted to the
    kernel's angular support (B_eps vanishes outside it)."""
    if M.kind != "boltzmann":
        raise DissipationError("boltzmann_action needs a boltzmann-kind mobility")
    coarse = _action_metric_pieces(f, M, None, kernel, spec.coarsened())["action"]
    value = _action_metric_pieces(f, M, None, kernel, spec)["action"]
    return IntegralResult(value=0.25 * value, error_estimate=0.25 * abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def metric_affine_boltzmann(f: GaussianMixture, M: Mobility, psi, kernel: CollisionKernel,
                            spec: QuadratureSpec) -> IntegralResult:
    """1/2 int M dbar(psi) - 1/4 int |dbar psi|^2 Lambda(f) B_eps; at most the
    action for every psi, with equality at the matching gradient-type M."""
    if M.kind != "boltzmann":
        raise DissipationError("metric_affine_boltzmann needs a boltzmann-kind mobility")
    pieces_c = _action_metric_pieces(f, M, psi, kernel, spec.coarsened())
    pieces = _action_metric_pieces(f, M, psi, kernel, spec)
    value = 0.5 * pieces["m_dpsi"] - 0.25 * pieces["dpsi2_lam"]
    coarse = 0.5 * pieces_c["m_dpsi"] - 0.25 * pieces_c["dpsi2_lam"]
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def _landau_action_pieces(f: GaussianMixture, M: Mobility, psi, gamma: float,
                          spec: QuadratureSpec) -> dict[str, float]:
    grid = pair_grid(f, spec)

    def action(c):
        m = M.field(c.v, c.v_star)
        return sq3(m) / f.pair_value(c.v, c.v_star)

    fns = {"action": action}
    if psi is not None:
        def m_dpsi(c):
            return dot3(M.field(c.v, c.v_star), dtilde(psi, c.v, c.v_star, gamma))

        def quad(c):
            return sq3(dtilde(psi, c.v, c.v_star, gamma)) * f.pair_value(c.v, c.v_star)

        fns["m_dpsi"] = m_dpsi
        fns["quad"] = quad
    return pair_reduce(grid, fns)


def landau_action(f: GaussianMixture, M: Mobility, spec: QuadratureSpec) -> IntegralResult:
    """A_L(f, M) = 1/2 int int |M|^2 / (f f*)."""
    if M.kind != "landau":
        raise DissipationError("landau_action needs a landau-kind mobility")
    coarse = _landau_action_pieces(f, M, None, 0.0, spec.coarsened())["action"]
    value = _landau_action_pieces(f, M, None, 0.0, spec)["action"]
    return IntegralResult(value=0.5 * value, error_estimate=0.5 * abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


def metric_affine_landau(f: GaussianMixture, M: Mobility, psi, gamma: float,
                         spec: QuadratureSpec) -> IntegralResult:
    """int M . dtilde(psi) - 1/2 int |dtilde psi|^2 f f*; at most the Landau
    action, with equality at the matching gradient-type M."""
    if M.kind != "landau":
        raise DissipationError("metric_affine_landau needs a landau-kind mobility")
    pc = _landau_action_pieces(f, M, psi, gamma, spec.coarsened())
    pv = _landau_action_pieces(f, M, psi, gamma, spec)
    value = pv["m_dpsi"] - 0.5 * pv["quad"]
    coarse = pc["m_dpsi"] - 0.5 * pc["quad"]
    return IntegralResult(value=value, error_estimate=abs(value - coarse),
                          node_count=pair_grid(f, spec).n_pairs)


# ---------------------------------------------------------------------------
# the lift from collision rates to grazing rates


def lift_mobility(M: Mobility, lift: LiftSpec, gamma: float, kernel: CollisionKernel,
                  spec: QuadratureSpec) -> Mobility:
    """L_{q,delta}: collision rates to grazing rates by a weighted angular moment,

        |v-v*|^(-gamma/2-q) / (4 (1 + [|v|^2+|v*|^2]^(delta/2))) int M p d(sigma),

    integrated over the kernel's angular support.
    """
    if M.kind != "boltzmann":
        raise DissipationError("lift acts on boltzmann-kind mobilities")
    lift.validate(gamma)
    theta, wtheta = angular_nodes(kernel.angular, spec)
    bvals = beta_eps(kernel.angular, theta)
    n_phi = spec.sphere_phi_nodes
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cos_p, sin_p = np.cos(phi), np.sin(phi)

    def field(v, v_star):
        from .operators import chunk_geometry

        c = chunk_geometry(np.asarray(v, dtype=float), np.asarray(v_star, dtype=float))
        p = (c.h[..., None, :] * cos_p[:, None] + c.i[..., None, :] * sin_p[:, None])
        khat = c.k[..., None, :]
        acc = np.zeros(c.v.shape)
        for a in range(theta.size):
            sigma = cos_t[a] * khat + sin_t[a] * p
            m = M.field(c.v[..., None, :], c.v_star[..., None, :], sigma, theta[a])
            # d(sigma) = sin(theta) d(theta) d(phi); nodes absorb beta_eps
            wnode = wtheta[a] * wphi * sin_t[a] / bvals[a]
            acc += wnode * np.sum(m[..., None] * p, axis=-2)
        e2 = sq3(c.v) + sq3(c.v_star)
        pref = c.r ** (-0.5 * gamma - lift.q) / (4.0 * (1.0 + e2 ** (0.5 * lift.delta)))
        return pref[..., None] * acc

    return Mobility(kind="landau", field=field)


def scaled_mobility(M: Mobility, q: int, delta: float) -> Mobility:
    """|v-v*|^q (1 + [|v|^2+|v*|^2]^(delta/2)) theta M, the combination whose
    lift reproduces the grazing pairing."""
    def field(v, v_star, sigma, theta):
        v = np.asarray(v, dtype=float)
        v_star = np.asarray(v_star, dtype=float)
        r = np.sqrt(sq3(v - v_star))
        e2 = sq3(v) + sq3(v_star)
        return r**q * (1.0 + e2 ** (0.5 * delta)) * theta * M.field(v, v_star, sigma, theta)

    return Mobility(kind="boltzmann", field=field)


def _study_pieces(f: GaussianMixture, kernel: CollisionKernel, spec: QuadratureSpec,
                  psis: list[PairScalarTestFunction]) -> dict[str, float]:
    """One sweep computing D_B, D_B^R, and both affine pieces for every psi."""
    grid = pair_grid(f, spec)
    prep_d, terms_d = _dissipation_terms(f)
    terms: dict = dict(terms_d)
    factors: dict = {"diss": lambda c: kernel.kinetic_factor(c.r),
                     "reduced": lambda c: kernel.kinetic_factor(c.r)}

    for j, psi in enumerate(psis):
        def term_lin(chunk, vp, vsp, sigma, theta, _psi=psi, _j=j):
            chunk.psi_pre = chunk.psi_pre_all[_j]
            return _dbar_cached(_psi, _j, chunk, vp, vsp)

        def term_sq(chunk, vp, vsp, sigma, theta, _psi=psi, _j=j):
            chunk.psi_pre = chunk.psi_pre_all[_j]
            return _dbar_cached(_psi, _j, chunk, vp, vsp) ** 2

        terms[f"lin{j}"] = term_lin
        terms[f"quad{j}"] = term_sq
        factors[f"lin{j}"] = lambda c: c.sqF * kernel.kinetic_factor(c.r)
        factors[f"quad{j}"] = lambda c: kernel.kinetic_factor(c.r)

    def prepare(chunk):
        prep_d(chunk)
        chunk.sqF = np.exp(0.5 * chunk.logF)
        chunk.psi_pre_all = [2.0 * psi.value(chunk.v, chunk.v_star) for psi in psis]

    return collision_sweep(grid, kernel, spec, terms=terms, pair_factors=factors,
                           prepare=prepare)


def dissipation_study(f: GaussianMixture, kernel: CollisionKernel, eps_list: list[float],
                      psis: list[PairScalarTestFunction], spec: QuadratureSpec) -> dict:
    """Epsilon sweep of the dissipation chain.

    Per eps: D_B_eps, D_B^R, and for every DS psi the affine value with the
    optimal scalar rescaling (so reported affine values are nonnegative and
    the chain 0 <= affine <= D_B^R <= D_B_eps can be checked directly).
    The eps-free Landau quantities are computed once.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise DissipationError("eps_list must be strictly decreasing")
    gamma = kernel.gamma
    dL = landau_dissipation(f, gamma, spec)
    affine_L = []
    for psi in psis:
        lv, qv = _affine_landau_pieces(f, psi, gamma, spec)
        _, best = optimal_scaling(lv, qv, "landau")
        affine_L.append(best)
    from .operators import parallel_map

    def one_eps(eps):
        ker = kernel.with_epsilon(eps)
        return (_study_pieces(f, ker, spec, psis),
                _study_pieces(f, ker, spec.coarsened(), psis))

    pieces = parallel_map(one_eps, eps_list)
    rows = []
    for eps, (fine, coarse) in zip(eps_list, pieces):
        d_b = 0.25 * fine["diss"]
        d_r = fine["reduced"]
        err_b = abs(d_b - 0.25 * coarse["diss"])
        affine_vals = []
        for j in range(len(psis)):
            _, best = optimal_scaling(fine[f"lin{j}"], fine[f"quad{j}"], "boltzmann")
            affine_vals.append(best)
        rows.append({
            "eps": eps,
            "D_B_eps": d_b,
            "D_B_R": d_r,
            "D_L": dL.value,
            "err_D_B": err_b,
            "err_D_R": abs(d_r - coarse["reduced"]),
            "affine_boltzmann": affine_vals,
            "gap": abs(d_b - dL.value),
        })
    return {
        "rows": rows,
        "landau": dL.value,
        "landau_error": dL.error_estimate,
        "affine_landau": affine_L,
    }


def lift_pairing(f: GaussianMixture, M: Mobility, psi, lift: LiftSpec, gamma: float,
                 kernel: CollisionKernel, spec: QuadratureSpec) -> tuple[float, float]:
    """Both sides of the grazing-pairing bookkeeping at fixed eps.

    Left: int int L_{q,delta}(scaled M) . dtilde(psi).
    Right: 1/2 int int int M * [theta |v-v*| p.(grad-grad_*)psi / 2] d(sigma),
    i.e. the pairing with the small-angle linearization of dbar(psi) with the
    same theta weights inserted. The two are algebraically identical sums.
    """
    lifted = lift_mobility(scaled_mobility(M, lift.q, lift.delta), lift, gamma, kernel, spec)
    grid = pair_grid(f, spec)

    lhs = pair_reduce(grid, {
        "v": lambda c: dot3(lifted.field(c.v, c.v_star), dtilde(psi, c.v, c.v_star, gamma))
    })["v"]

    ang = kernel.angular

    def rhs_term(chunk, vp, vsp, sigma, theta):
        g = _pair_grad(psi, chunk.v, chunk.v_star)[:, None, :]
        p = (sigma - np.cos(theta) * chunk.k[:, None, :]) / np.sin(theta)
        lin = theta * 0.5 * chunk.r[:, None] * dot3(p, g)
        m = M.field(chunk.v[:, None, :], chunk.v_star[:, None, :], sigma, theta)
        return m * lin * np.sin(theta) / beta_eps(ang, np.asarray(theta))

    rhs = 0.5 * collision_sweep(grid, kernel, spec, terms={"v": rhs_term},
                                pair_factors={"v": lambda c: np.ones(c.r.shape)})["v"]
    return lhs, rhs
