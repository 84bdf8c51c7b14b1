"""Real spherical-harmonic analysis/synthesis on Gauss-Legendre x uniform grids.

Basis: orthonormal real harmonics

    Y_{l,0}  = N_{l,0} P_l(cos th)
    Y_{l,m}  = sqrt(2) N_{l,m} P_l^m(cos th) cos(m ph),  m > 0
    Y_{l,-m} = sqrt(2) N_{l,m} P_l^m(cos th) sin(m ph),  m > 0

with N_{l,m} = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!). Coefficient arrays are
indexed [l, m + lmax]. Analysis is exact for band-limited fields when
n_theta >= lmax + 1 and n_phi >= 2 lmax + 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

try:
    from scipy.special import assoc_legendre_p_all

    def _lpmn_table(lmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
        # returns (P, dP/dx) with shape (m, l), unnormalized convention
        out = assoc_legendre_p_all(lmax, lmax, x, diff_n=1)
        p = out[0][:, : lmax + 1]
        dp = out[1][:, : lmax + 1]
        return p.T, dp.T
except ImportError:  # older scipy
    from scipy.special import lpmn

    def _lpmn_table(lmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
        return lpmn(lmax, lmax, x)


@lru_cache(maxsize=16)
def _legendre_tables(lmax: int, n_theta: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes mu, weights, and normalized P / dP/d(theta) tables.

    Tables have shape (n_theta, lmax+1, lmax+1) indexed [node, m, l], already
    scaled by N_{l,m} (and the sqrt(2) for m > 0 is applied in the transform).
    """
    mu, wmu = np.polynomial.legendre.leggauss(n_theta)
    P = np.zeros((n_theta, lmax + 1, lmax + 1))
    dP_dtheta = np.zeros_like(P)
    sin_t = np.sqrt(1.0 - mu**2)
    for i, x in enumerate(mu):
        p, dp = _lpmn_table(lmax, x)
        P[i] = p
        dP_dtheta[i] = -sin_t[i] * dp
    ls = np.arange(lmax + 1)
    norm = np.zeros((lmax + 1, lmax + 1))
    from scipy.special import gammaln

    for m in range(lmax + 1):
        l_ok = ls >= m
        ln = 0.5 * (np.log(2 * ls + 1.0) - np.log(4 * np.pi)
                    + gammaln(ls - m + 1.0) - gammaln(ls + m + 1.0))
        norm[m, l_ok] = np.exp(ln[l_ok])
    P *= norm[None, :, :]
    dP_dtheta *= norm[None, :, :]
    return mu, wmu, P, dP_dtheta


@dataclass(frozen=True)
class SphereTransform:
    """Fixed-grid forward/inverse transform with tangential-gradient synthesis."""

    lmax: int
    n_theta: int
    n_phi: int
    _tables: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.n_theta < self.lmax + 1 or self.n_phi < 2 * self.lmax + 1:
            raise ValueError("grid too coarse for the requested degree: need "
                             "n_theta >= lmax+1 and n_phi >= 2*lmax+1")
        mu, wmu, P, dP = _legendre_tables(self.lmax, self.n_theta)
        phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        m = np.arange(1, self.lmax + 1)
        cos_m = np.cos(m[:, None] * phi[None, :])
        sin_m = np.sin(m[:, None] * phi[None, :])
        object.__setattr__(self, "_tables", (mu, wmu, P, dP, phi, cos_m, sin_m))

    # -- grid geometry ------------------------------------------------------

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self._tables[0])

    @property
    def phi(self) -> np.ndarray:
        return self._tables[4]

    @property
    def quad_weights(self) -> np.ndarray:
        """(n_theta, n_phi) weights integrating over the unit sphere."""
        wmu = self._tables[1]
        return np.broadcast_to(wmu[:, None] * (2.0 * np.pi / self.n_phi),
                               (self.n_theta, self.n_phi))

    def unit_vectors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(k, e_theta, e_phi) at grid nodes, each (n_theta, n_phi, 3)."""
        mu = self._tables[0]
        phi = self._tables[4]
        st = np.sqrt(1.0 - mu**2)
        ct = mu
        cp, sp = np.cos(phi), np.sin(phi)
        k = np.stack([st[:, None] * cp[None, :], st[:, None] * sp[None, :],
                      np.broadcast_to(ct[:, None], (self.n_theta, self.n_phi))], axis=-1)
        e_t = np.stack([ct[:, None] * cp[None, :], ct[:, None] * sp[None, :],
                        np.broadcast_to(-st[:, None], (self.n_theta, self.n_phi))], axis=-1)
        e_p = np.stack([np.broadcast_to(-sp[None, :], (self.n_theta, self.n_phi)),
                        np.broadcast_to(cp[None, :], (self.n_theta, self.n_phi)),
                        np.zeros((self.n_theta, self.n_phi))], axis=-1)
        return k, e_t, e_p

    # -- transforms ---------------------------------------------------------

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Forward transform of (n_theta, n_phi) samples to [l, m+lmax]."""
        mu, wmu, P, dP, phi, cos_m, sin_m = self._tables
        lmax = self.lmax
        wphi = 2.0 * np.pi / self.n_phi
        fw = values * wmu[:, None]
        # azimuthal projections
        a0 = fw.sum(axis=1) * wphi
        ac = fw @ cos_m.T * wphi
        as_ = fw @ sin_m.T * wphi
        coeffs = np.zeros((lmax + 1, 2 * lmax + 1))
        coeffs[:, lmax] = P[:, 0, :].T @ a0
        rt2 = np.sqrt(2.0)
        for m in range(1, lmax + 1):
            proj = P[:, m, :].T * rt2
            coeffs[:, lmax + m] = proj @ ac[:, m - 1]
            coeffs[:, lmax - m] = proj @ as_[:, m - 1]
        return coeffs

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Inverse transform to (n_theta, n_phi) samples."""
        mu, wmu, P, dP, phi, cos_m, sin_m = self._tables
        lmax = self.lmax
        out = np.outer(P[:, 0, :] @ coeffs[:, lmax], np.ones(self.n_phi))
        rt2 = np.sqrt(2.0)
        for m in range(1, lmax + 1):
            rad_c = P[:, m, :] @ coeffs[:, lmax + m] * rt2
            rad_s = P[:, m, :] @ coeffs[:, lmax - m] * rt2
            out += np.outer(rad_c, cos_m[m - 1]) + np.outer(rad_s, sin_m[m - 1])
        return out

    def surface_gradient(self, coeffs: np.ndarray) -> np.ndarray:
        """Tangential gradient of the synthesized field at the grid nodes,
        returned as (n_theta, n_phi, 3) Cartesian vectors."""
        mu, wmu, P, dP, phi, cos_m, sin_m = self._tables
        lmax = self.lmax
        st = np.sqrt(1.0 - mu**2)
        g_t = np.outer(dP[:, 0, :] @ coeffs[:, lmax], np.ones(self.n_phi))
        g_p = np.zeros((self.n_theta, self.n_phi))
        rt2 = np.sqrt(2.0)
        for m in range(1, lmax + 1):
            rad_c = P[:, m, :] @ coeffs[:, lmax + m] * rt2
            rad_s = P[:, m, :] @ coeffs[:, lmax - m] * rt2
            drad_c = dP[:, m, :] @ coeffs[:, lmax + m] * rt2
            drad_s = dP[:, m, :] @ coeffs[:, lmax - m] * rt2
            g_t += np.outer(drad_c, cos_m[m - 1]) + np.outer(drad_s, sin_m[m - 1])
            g_p += m * (np.outer(rad_s / st, cos_m[m - 1]) - np.outer(rad_c / st, sin_m[m - 1]))
        _, e_t, e_p = self.unit_vectors()
        return g_t[..., None] * e_t + g_p[..., None] * e_p

    def laplacian_coeffs(self, coeffs: np.ndarray) -> np.ndarray:
        """Spectral Laplace-Beltrami: multiplies degree l by -l(l+1)."""
        ls = np.arange(self.lmax + 1)
        return coeffs * (-(ls * (ls + 1.0)))[:, None]
