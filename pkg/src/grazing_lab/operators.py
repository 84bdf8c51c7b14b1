"""Discrete and grazing collision gradients, weak-form operators, limit studies.

The four-point collision difference

    dbar psi = psi(v') + psi(v*') - psi(v) - psi(v*)

and the projected relative-velocity gradient

    dtilde psi = |v-v*|^(1+gamma/2) Pi[v-v*] (grad psi - grad_* psi)

are the two derivative notions paired with densities in the weak Boltzmann
and Landau forms. Every sigma-integral is evaluated in (theta, phi)
coordinates with the angular profile absorbed into the theta nodes, so the
kernel's endpoint singularity is handled once, in quadrature.

R^6 x S^2 integrals stream over fixed-size pair chunks; partial sums feed a
fixed-shape pairwise tree, so results are deterministic and memory stays
O(chunk) regardless of grid size.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable

import numpy as np

from .functions import GaussianMixture, dot3, sq3
from .geometry import CollisionConfiguration, GeometryError
from .kernels import CollisionKernel, angular_nodes
from .quadrature import IntegralResult, QuadratureSpec, pairwise_sum, r3_nodes

CHUNK = 4096


class OperatorError(RuntimeError):
    pass


def thread_count() -> int:
    """Worker count from GRAZING_LAB_THREADS (default 1)."""
    import os

    try:
        return max(1, int(os.environ.get("GRAZING_LAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fnc, items):
    """Map a pure function over items, optionally with a thread pool.

    Results keep list order regardless of scheduling, and every evaluation is
    pure, so the output is identical to the serial run.
    """
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) <= 1:
        return [fnc(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fnc, items))


# ---------------------------------------------------------------------------
# pointwise gradients


def dbar(psi, config: CollisionConfiguration) -> float:
    """Four-point collision difference at one configuration.

    Two-variable test functions use the symmetrized extension
    psi(v',v*') + psi(v*',v') - psi(v,v*) - psi(v*,v).
    """
    if psi.kind == "single":
        return float(psi.value(config.v_post) + psi.value(config.v_star_post)
                     - psi.value(config.v) - psi.value(config.v_star))
    return float(psi.value(config.v_post, config.v_star_post)
                 + psi.value(config.v_star_post, config.v_post)
                 - psi.value(config.v, config.v_star)
                 - psi.value(config.v_star, config.v))


def _pair_grad(psi, v: np.ndarray, v_star: np.ndarray) -> np.ndarray:
    """(grad - grad_*) psi as a batch over pairs."""
    if psi.kind == "single":
        return psi.gradient(v) - psi.gradient(v_star)
    return psi.grad_x(v, v_star)


def _pair_hess(psi, v: np.ndarray, v_star: np.ndarray) -> np.ndarray:
    """(grad - grad_*) (x) (grad - grad_*) psi as a batch over pairs."""
    if psi.kind == "single":
        return psi.hessian(v) + psi.hessian(v_star)
    return psi.hess_xx(v, v_star)


def dtilde(psi, v: np.ndarray, v_star: np.ndarray, gamma: float) -> np.ndarray:
    """|v-v*|^(1+gamma/2) Pi[v-v*] (grad - grad_*) psi."""
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    r = np.sqrt(sq3(u))
    if np.any(r == 0.0):
        raise GeometryError("zero relative velocity")
    uhat = u / r[..., None]
    g = _pair_grad(psi, v, v_star)
    pg = g - dot3(uhat, g)[..., None] * uhat
    return (r ** (1.0 + 0.5 * gamma))[..., None] * pg


def dtilde_div_dtilde(psi, v: np.ndarray, v_star: np.ndarray, gamma: float) -> np.ndarray:
    """The scalar dtilde . dtilde psi = |v-v*|^(2+gamma) div_x(Pi[x] grad_x psi).

    Uses the analytic Hessian together with
    div_x(Pi[x] g) = tr(Pi H) - (2/|x|) xhat.g, where x = (v - v*)/2.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    r = np.sqrt(sq3(u))
    if np.any(r == 0.0):
        raise GeometryError("zero relative velocity")
    uhat = u / r[..., None]
    g = _pair_grad(psi, v, v_star)
    H = _pair_hess(psi, v, v_star)
    trH = H[..., 0, 0] + H[..., 1, 1] + H[..., 2, 2]
    uHu = dot3(uhat, np.einsum("...ij,...j->...i", H, uhat))
    return r ** (2.0 + gamma) * (trH - uHu - (4.0 / r) * dot3(uhat, g))


# ---------------------------------------------------------------------------
# streaming pair grids


def chunk_geometry(v: np.ndarray, v_star: np.ndarray, w: np.ndarray | None = None) -> SimpleNamespace:
    """Collision-frame quantities for a batch of pairs.

    Exact-diagonal pairs get zero weight and a placeholder frame; every
    collision formula vanishes with the weight.
    """
    v = np.asarray(v, dtype=float)
    v_star = np.asarray(v_star, dtype=float)
    u = v - v_star
    r = np.sqrt(sq3(u))
    live = r > 1e-12
    if w is None:
        w = np.ones(r.shape)
    w = np.where(live, w, 0.0)
    rs = np.where(live, r, 1.0)
    k = u / rs[..., None]
    idx = np.argmin(np.abs(k), axis=-1)
    e = np.eye(3)[idx]
    h = e - dot3(e, k)[..., None] * k
    h /= np.sqrt(sq3(h))[..., None]
    i = np.cross(k, h)
    return SimpleNamespace(v=v, v_star=v_star, w=w, u=u, r=rs, k=k, h=h, i=i,
                           y=0.5 * (v + v_star))


@dataclass(frozen=True)
class PairGrid:
    """Lazy tensor grid over unordered pairs {v, v*}.

    Only the R^3 factor is materialized. Off-diagonal pairs are enumerated
    once (i < j) with doubled weight, which is exact for every collision
    integrand because they are invariant under the swap
    (v, v*, sigma) -> (v*, v, -sigma); non-symmetric integrands must be
    symmetrized by the caller. Diagonal pairs carry zero collision weight.
    """

    pts: np.ndarray
    wgt: np.ndarray

    @property
    def n_pairs(self) -> int:
        m = self.pts.shape[0]
        return m * (m - 1) // 2

    def _indices(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        m = self.pts.shape[0]
        t = np.arange(start, stop)
        # invert t = i*m - i*(i+1)/2 + (j - i - 1) for the i < j enumeration
        i = np.floor((2 * m - 1 - np.sqrt((2.0 * m - 1) ** 2 - 8.0 * t)) / 2).astype(np.int64)
        i = np.clip(i, 0, m - 2)
        base = i * m - i * (i + 1) // 2
        too_big = base > t
        while np.any(too_big):
            i[too_big] -= 1
            base = i * m - i * (i + 1) // 2
            too_big = base > t
        nxt = (i + 1) * m - (i + 1) * (i + 2) // 2
        too_small = t >= nxt
        while np.any(too_small):
            i[too_small] += 1
            base = i * m - i * (i + 1) // 2
            nxt = (i + 1) * m - (i + 1) * (i + 2) // 2
            too_small = t >= nxt
        j = t - base + i + 1
        return i, j

    def chunk(self, start: int, stop: int) -> SimpleNamespace:
        i, j = self._indices(start, stop)
        return chunk_geometry(self.pts[i], self.pts[j], 2.0 * self.wgt[i] * self.wgt[j])

    def chunks(self, size: int = CHUNK):
        for start in range(0, self.n_pairs, size):
            yield self.chunk(start, min(start + size, self.n_pairs))


def pair_grid(f: GaussianMixture, spec: QuadratureSpec, n: int | None = None) -> PairGrid:
    """Pair grid in the density's Gaussian frame."""
    center, scale = f.quadrature_frame()
    pts, wgt = r3_nodes(spec, center, scale, n=n or spec.pair_nodes)
    return PairGrid(pts=pts, wgt=wgt)


def pair_reduce(grid: PairGrid, fns: dict[str, Callable]) -> dict[str, float]:
    """sum over pairs of w * fn(chunk) for each named integrand."""
    partials = {name: [] for name in fns}
    for chunk in grid.chunks():
        for name, fn in fns.items():
            partials[name].append(pairwise_sum(chunk.w * fn(chunk)))
    return {name: pairwise_sum(np.array(vals)) for name, vals in partials.items()}


# ---------------------------------------------------------------------------
# the angular sweep


def collision_sweep(grid: PairGrid, kernel: CollisionKernel, spec: QuadratureSpec,
                    terms: dict[str, Callable], pair_factors: dict[str, Callable],
                    prepare: Callable | None = None,
                    n_phi: int | None = None) -> dict[str, float]:
    """Reduce sum_pairs w * pair_factor * (int int term beta_eps d(theta) d(phi)).

    terms[name](chunk, vp, vsp, sigma, theta) -> (C, n_phi) is evaluated at
    every theta node with all azimuthal nodes batched (vp, vsp, sigma have
    shape (C, n_phi, 3); per-pair chunk fields broadcast as (C, 1, ...)).
    pair_factors[name](chunk) -> (C,) multiplies the angular integral before
    the pair reduction. `prepare` may attach per-chunk caches to the chunk.
    """
    theta, wtheta = angular_nodes(kernel.angular, spec)
    n_phi = n_phi or spec.sphere_phi_nodes
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cos_p, sin_p = np.cos(phi), np.sin(phi)

    partials = {name: [] for name in terms}
    for chunk in grid.chunks():
        if prepare is not None:
            prepare(chunk)
        p = (chunk.h[:, None, :] * cos_p[None, :, None]
             + chunk.i[:, None, :] * sin_p[None, :, None])
        khat = chunk.k[:, None, :]
        rhalf = (0.5 * chunk.r)[:, None, None]
        y3 = chunk.y[:, None, :]
        acc = {name: np.zeros(chunk.r.shape[0]) for name in terms}
        for a in range(theta.size):
            sigma = cos_t[a] * khat + sin_t[a] * p
            half = rhalf * sigma
            vp = y3 + half
            vsp = y3 - half
            wnode = wtheta[a] * wphi
            for name, fn in terms.items():
                acc[name] += wnode * np.sum(fn(chunk, vp, vsp, sigma, theta[a]), axis=1)
        for name in terms:
            partials[name].append(pairwise_sum(chunk.w * pair_factors[name](chunk) * acc[name]))
    return {name: pairwise_sum(np.array(vals)) for name, vals in partials.items()}


def sigma_average(v: np.ndarray, v_star: np.ndarray, kernel: CollisionKernel,
                  spec: QuadratureSpec, term: Callable, prepare: Callable | None = None,
                  n_phi: int | None = None) -> np.ndarray:
    """Pointwise int_{S^2} term * B_eps d(sigma) for a batch of pairs
    (kinetic factor included)."""
    chunk = chunk_geometry(np.atleast_2d(np.asarray(v, dtype=float)),
                           np.atleast_2d(np.asarray(v_star, dtype=float)))
    if np.any(chunk.w == 0.0):
        raise GeometryError("zero relative velocity")
    if prepare is not None:
        prepare(chunk)
    theta, wtheta = angular_nodes(kernel.angular, spec)
    n_phi = n_phi or spec.sphere_phi_nodes
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    p = (chunk.h[:, None, :] * np.cos(phi)[None, :, None]
         + chunk.i[:, None, :] * np.sin(phi)[None, :, None])
    khat = chunk.k[:, None, :]
    rhalf = (0.5 * chunk.r)[:, None, None]
    y3 = chunk.y[:, None, :]
    acc = np.zeros(chunk.r.shape[0])
    for a in range(theta.size):
        sigma = np.cos(theta[a]) * khat + np.sin(theta[a]) * p
        half = rhalf * sigma
        acc += wtheta[a] * wphi * np.sum(term(chunk, y3 + half, y3 - half, sigma, theta[a]), axis=1)
    return kernel.kinetic_factor(chunk.r) * acc


def _dbar_values(psi, chunk, vp, vsp) -> np.ndarray:
    if psi.kind == "single":
        return psi.value(vp) + psi.value(vsp) - chunk.psi_pre[:, None]
    # two-variable test functions are symmetric by construction (DS class),
    # so psi(v',v*') + psi(v*',v') collapses to 2 psi(v',v*')
    return 2.0 * psi.value(vp, vsp) - chunk.psi_pre[:, None]


def _dbar_cached(psi, key, chunk, vp, vsp) -> np.ndarray:
    """Memoize dbar(psi) per angular node so several terms can share it."""
    memo = getattr(chunk, "_dbar_memo", None)
    if memo is None or memo[0] is not vp:
        memo = (vp, {})
        chunk._dbar_memo = memo
    store = memo[1]
    if key not in store:
        store[key] = _dbar_values(psi, chunk, vp, vsp)
    return store[key]


def _make_dbar_term(psi):
    def prepare(chunk):
        if psi.kind == "single":
            chunk.psi_pre = psi.value(chunk.v) + psi.value(chunk.v_star)
        else:
            chunk.psi_pre = 2.0 * psi.value(chunk.v, chunk.v_star)

    def term(chunk, vp, vsp, sigma, theta):
        return _dbar_values(psi, chunk, vp, vsp)

    return prepare, term


# ---------------------------------------------------------------------------
# weak-form collision operators


def _boltzmann_weak_value(f: GaussianMixture, psi, kernel: CollisionKernel,
                          spec: QuadratureSpec, form: str) -> tuple[float, int]:
    """One quadrature level of the weak Boltzmann pairing.

    second_order = 1/2 int int f f* int dbar(psi) B_eps
    first_order  = -1/8 int int int dbar(f f*) dbar(psi) B_eps
    """
    grid = pair_grid(f, spec)
    prep_psi, term_psi = _make_dbar_term(psi)

    if form == "second_order":
        out = collision_sweep(
            grid, kernel, spec, terms={"dpsi": term_psi},
            pair_factors={"dpsi": lambda c: f.pair_value(c.v, c.v_star) * kernel.kinetic_factor(c.r)},
            prepare=prep_psi)
        return 0.5 * out["dpsi"], grid.n_pairs

    def prepare(chunk):
        prep_psi(chunk)
        chunk.F = f.pair_value(chunk.v, chunk.v_star)

    def term_pair(chunk, vp, vsp, sigma, theta):
        dpsi = _dbar_values(psi, chunk, vp, vsp)
        dF = 2.0 * (f.pair_value(vp, vsp) - chunk.F[:, None])
        return dF * dpsi

    out = collision_sweep(grid, kernel, spec, terms={"dF_dpsi": term_pair},
                          pair_factors={"dF_dpsi": lambda c: kernel.kinetic_factor(c.r)},
                          prepare=prepare)
    return -0.125 * out["dF_dpsi"], grid.n_pairs


def boltzmann_weak(f: GaussianMixture, psi, kernel: CollisionKernel, spec: QuadratureSpec,
                   form: str = "second_order") -> IntegralResult:
    """Weak pairing <Q_B_eps(f,f), psi> in the requested form.

    The value is computed at the configured level; the error estimate is the
    difference against the next-coarser level.
    """
    if form not in ("second_order", "first_order"):
        raise OperatorError(f"unknown form {form!r}")
    coarse, _ = _boltzmann_weak_value(f, psi, kernel, spec.coarsened(), form)
    value, n = _boltzmann_weak_value(f, psi, kernel, spec, form)
    return IntegralResult(value=value, error_estimate=abs(value - coarse), node_count=n)


def _landau_chunk_terms(f: GaussianMixture, psi, gamma: float) -> dict[str, Callable]:
    def second(c: SimpleNamespace) -> np.ndarray:
        F = f.pair_value(c.v, c.v_star)
        g = _pair_grad(psi, c.v, c.v_star)
        H = _pair_hess(psi, c.v, c.v_star)
        trH = H[..., 0, 0] + H[..., 1, 1] + H[..., 2, 2]
        uHu = dot3(c.k, np.einsum("...ij,...j->...i", H, c.k))
        return F * c.r ** (2.0 + gamma) * (trH - uHu - (4.0 / c.r) * dot3(c.k, g))

    def first(c: SimpleNamespace) -> np.ndarray:
        g = _pair_grad(psi, c.v, c.v_star)
        a = (f.value(c.v_star)[:, None] * f.gradient(c.v)
             - f.value(c.v)[:, None] * f.gradient(c.v_star))
        ag = dot3(a, g) - dot3(c.k, a) * dot3(c.k, g)
        return c.r ** (2.0 + gamma) * ag

    return {"second": second, "first": first}


def _landau_weak_value(f: GaussianMixture, psi, gamma: float,
                       spec: QuadratureSpec, form: str) -> tuple[float, int]:
    grid = pair_grid(f, spec)
    terms = _landau_chunk_terms(f, psi, gamma)
    if form == "second_order":
        out = pair_reduce(grid, {"v": terms["second"]})
        return 0.5 * out["v"], grid.n_pairs
    out = pair_reduce(grid, {"v": terms["first"]})
    return -0.5 * out["v"], grid.n_pairs


def landau_weak(f: GaussianMixture, psi, gamma: float, spec: QuadratureSpec,
                form: str = "second_order") -> IntegralResult:
    """Weak pairing <Q_L(f,f), psi> in the requested form."""
    if form not in ("second_order", "first_order"):
        raise OperatorError(f"unknown form {form!r}")
    coarse, _ = _landau_weak_value(f, psi, gamma, spec.coarsened(), form)
    value, n = _landau_weak_value(f, psi, gamma, spec, form)
    return IntegralResult(value=value, error_estimate=abs(value - coarse), node_count=n)


# ---------------------------------------------------------------------------
# pointwise kernel averages (the grazing-limit building blocks)


def dbar_kernel_average(psi, v: np.ndarray, v_star: np.ndarray,
                        kernel: CollisionKernel, spec: QuadratureSpec) -> float:
    """int_{S^2} dbar(psi) B_eps d(sigma) at one pair; tends to
    2 dtilde . dtilde psi as eps drops."""
    prep, term = _make_dbar_term(psi)
    return float(sigma_average(v, v_star, kernel, spec, term, prepare=prep)[0])


def dbar_sq_kernel_average(psi, v: np.ndarray, v_star: np.ndarray,
                           kernel: CollisionKernel, spec: QuadratureSpec) -> float:
    """int_{S^2} |dbar(psi)|^2 B_eps d(sigma) at one pair; tends to
    8 |dtilde psi|^2 as eps drops."""
    prep, _ = _make_dbar_term(psi)

    def term(chunk, vp, vsp, sigma, theta):
        return _dbar_values(psi, chunk, vp, vsp) ** 2

    return float(sigma_average(v, v_star, kernel, spec, term, prepare=prep)[0])


# ---------------------------------------------------------------------------
# epsilon sweep


@dataclass(frozen=True)
class ConvergenceReport:
    """One grazing-limit study: weak Boltzmann values against the Landau value."""

    epsilons: list[float]
    boltzmann_values: list[float]
    boltzmann_errors: list[float]
    landau_value: float
    landau_error: float
    abs_errors: list[float]
    fitted_order: float | None
    metadata: dict

    def rows(self) -> list[dict]:
        return [
            {"eps": e, "q_boltz": qb, "q_landau": self.landau_value, "abs_err": ae}
            for e, qb, ae in zip(self.epsilons, self.boltzmann_values, self.abs_errors)
        ]


def fit_order(eps: list[float], errors: list[float], floor: float) -> float | None:
    """Least-squares slope of log(err) against log(eps), ignoring errors below
    the noise floor (10x the quadrature error estimate)."""
    pts = [(e, r) for e, r in zip(eps, errors) if r > floor]
    if len(pts) < 3:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def grazing_limit_study(f: GaussianMixture, psi, kernel: CollisionKernel,
                        eps_list: list[float], spec: QuadratureSpec,
                        form: str = "second_order") -> ConvergenceReport:
    """Sweep eps downward and compare <Q_B_eps, psi> with <Q_L, psi>."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise OperatorError("eps_list needs at least 3 decreasing values")
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise OperatorError("eps_list must be strictly decreasing")
    ql = landau_weak(f, psi, kernel.gamma, spec, form=form)
    results = parallel_map(
        lambda eps: boltzmann_weak(f, psi, kernel.with_epsilon(eps), spec, form=form),
        eps_list)
    qb_vals = [r.value for r in results]
    qb_errs = [r.error_estimate for r in results]
    abs_errs = [abs(v - ql.value) for v in qb_vals]
    floor = 10.0 * (max(qb_errs) + ql.error_estimate)
    order = fit_order(eps_list, abs_errs, floor)
    meta = {
        "form": form,
        "gamma": kernel.gamma,
        "noise_floor": floor,
        "order_defined": order is not None,
    }
    return ConvergenceReport(epsilons=eps_list, boltzmann_values=qb_vals,
                             boltzmann_errors=qb_errs, landau_value=ql.value,
                             landau_error=ql.error_estimate, abs_errors=abs_errs,
                             fitted_order=order, metadata=meta)
