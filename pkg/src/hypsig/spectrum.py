"""Radial Laplacian on H_N: spectrum bottom and generalized ground states.

The rotation-invariant part of -Delta,

    -(sinh r)^(1-N) d/dr (sinh r)^(N-1) d/dr,

is discretized in flux form on a cell-centred grid with a Dirichlet face at
rho_max.  Multiplying by sqrt(w), w = sinh^(N-1), makes it a symmetric
tridiagonal matrix (the u = sinh^((N-1)/2) psi substitution on the grid),
so the lowest eigenvalue is an upper bound for (N-1)^2/4 that converges
as rho_max grows.

Conical functions come from the Laplace-type integral

    P^(-m)_(-1/2)(cosh r) = sqrt(2/pi) sinh(r)^(-m) / Gamma(m + 1/2)
                            * int_0^r (cosh r - cosh t)^(m - 1/2) dt,

with cosh r - cosh(r - s) = 2 sinh(r - s/2) sinh(s/2) and Gauss-Jacobi
quadrature in s for the endpoint singularity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg, special

from . import geometry

DEFAULT_RHO_MAX = 40.0
NODES_PER_UNIT = 100
RESIDUAL_RHO = 10.0
RESIDUAL_NODES = 1000
RESIDUAL_ANGLES = 256
ANNULUS_INNER = 1.0


class SpectrumError(ValueError):
    pass


def gap(N):
    """Bottom of the spectrum of -Delta on H_N."""
    return (N - 1) ** 2 / 4.0


def _log_sinh(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return r + np.log1p(-np.exp(-2.0 * r)) - np.log(2.0)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _log_cell_mean(logf, lo, hi):
    """log of the mean of exp(logf) over each cell [lo, hi] (Gauss-Legendre)."""
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    v = logf(x)
    top = np.max(v, axis=1, keepdims=True)
    return top[:, 0] + np.log(0.5 * np.sum(_GL_W[None, :] * np.exp(v - top), axis=1))


def _flux_ratios(N, centres, h):
    """w(face) / <w>_cell on both sides of each cell, w = sinh^(N-1).

    The cell weight is the exact cell mean of r^(N-1) times the smooth
    factor (sinh r / r)^(N-1) at the centre: second order in the first
    cell, where w ~ r^(N-1), and the plain centre value in the bulk, where
    the discrete spectrum then stays above (N-1)^2/4.
    """
    lo, hi = centres - 0.5 * h, centres + 0.5 * h
    a = np.maximum(lo, 0.0)
    k = N - 1
    lv = (np.log((hi**N - a**N) / (N * (hi - a))) + k * (_log_sinh(centres) - np.log(centres)))
    with np.errstate(divide="ignore"):
        left = np.exp((N - 1) * _log_sinh(np.maximum(lo, 0.0)) - lv)
    left[lo <= 0] = 0.0
    right = np.exp((N - 1) * _log_sinh(hi) - lv)
    return left, right, lv


@dataclass(frozen=True)
class RadialOperator:
    """Symmetric tridiagonal -Delta on the radial sector, Dirichlet at rho_max."""

    N: int
    rho_max: float
    n_nodes: int
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    @classmethod
    def build(cls, N, rho_max=DEFAULT_RHO_MAX, n_nodes=None):
        """``n_nodes=None`` gives a spacing of 1/NODES_PER_UNIT."""
        if not (isinstance(N, (int, np.integer)) and 2 <= N <= geometry.N_MAX):
            raise SpectrumError(f"N must be an integer in 2..{geometry.N_MAX}")
        if not rho_max > 0:
            raise SpectrumError("need rho_max > 0")
        if n_nodes is None:
            n_nodes = int(np.ceil(NODES_PER_UNIT * rho_max))
        if n_nodes < 3:
            raise SpectrumError("need at least 3 nodes")
        h = rho_max / n_nodes
        r = (np.arange(n_nodes) + 0.5) * h
        left, right, lv = _flux_ratios(N, r, h)
        # ghost value -psi_n beyond the Dirichlet face doubles the last flux
        d = left + right
        d[-1] += right[-1]
        d /= h * h
        # w_{i+1/2} / sqrt(<w>_i <w>_{i+1})
        lf = (N - 1) * _log_sinh(r[:-1] + 0.5 * h)
        e = -np.exp(lf - 0.5 * (lv[:-1] + lv[1:])) / (h * h)
        return cls(int(N), float(rho_max), int(n_nodes), d, e)

    @property
    def nodes(self):
        h = self.rho_max / self.n_nodes
        return (np.arange(self.n_nodes) + 0.5) * h

    def matrix(self):
        """Dense symmetric matrix; for tests on small grids."""
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)


def lowest_eigenvalue(op: RadialOperator):
    try:
        vals = linalg.eigh_tridiagonal(op.diagonal, op.offdiagonal, eigvals_only=True,
                                       select="i", select_range=(0, 0))
    except linalg.LinAlgError as exc:
        raise SpectrumError(f"eigensolver did not converge: {exc}") from None
    return float(vals[0])


def dirichlet_shift_estimate(N, rho_max):
    """(N-1)^2/4 + pi^2/rho_max^2, the leading truncation shift."""
    return gap(N) + (np.pi / rho_max) ** 2


# -- conical functions ------------------------------------------------------------

@dataclass(frozen=True)
class ConicalEvaluator:
    """P^mu_(-1/2)(x) for mu <= 0 by Gauss-Jacobi quadrature.

    ``n_points`` nodes in s = r - t with weight s^(m - 1/2), m = -mu.
    """

    mu: float
    n_points: int = 96

    def __post_init__(self):
        if not self.mu <= 0:
            raise SpectrumError("only orders mu <= 0 are supported")
        if self.n_points < 4:
            raise SpectrumError("need at least 4 quadrature points")

    @classmethod
    def for_dimension(cls, N, n_points=96):
        return cls(1.0 - N / 2.0, n_points)

    def value_at_one(self):
        """P^mu_(-1/2)(1): 1 for mu = 0, and 0 for mu < 0."""
        return 1.0 if self.mu == 0 else 0.0

    def boundary_coefficient(self):
        """lim_(x -> 1+) ((x - 1)/(x + 1))^(mu/2) P^mu_(-1/2)(x) = 1/Gamma(1 - mu)."""
        return 1.0 / special.gamma(1.0 - self.mu)

    def _rule(self):
        a = -self.mu - 0.5
        x, w = special.roots_jacobi(self.n_points, 0.0, a)
        return x, w, a


def conical_eval(ev: ConicalEvaluator, x):
    """P^mu_(-1/2)(x) for x >= 1; vectorized over x."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 1.0)):
        raise SpectrumError("conical_eval needs x >= 1")
    rho = np.arccosh(x)
    return conical_of_rho(ev, rho)


def conical_of_rho(ev: ConicalEvaluator, rho):
    """P^mu_(-1/2)(cosh rho), computed from rho directly for accuracy near 0."""
    rho = np.asarray(rho, dtype=float)
    m = -ev.mu
    out = np.full(rho.shape, ev.value_at_one())
    pos = rho > 0
    if not pos.any():
        return out
    r = rho[pos][:, None]
    xq, wq, a = ev._rule()
    s = 0.5 * r * (1.0 + xq[None, :])
    # (cosh r - cosh(r - s))^a = s^a * g(s)^a with g smooth and positive
    lg = np.log(2.0) + _log_sinh(r - 0.5 * s) + np.log(_sinhc_half(s))
    lsum = np.log(np.sum(wq[None, :] * np.exp(a * lg - a * _log_sinh(r)), axis=1))
    r = r[:, 0]
    logval = (0.5 * np.log(2.0 / np.pi) - special.gammaln(m + 0.5) + (a + 1.0) * np.log(0.5 * r)
              + (a - m) * _log_sinh(r) + lsum)
    out[pos] = np.exp(logval)
    return out


def boundary_limit(ev: ConicalEvaluator, rho=1e-6):
    """tanh(rho/2)^mu P^mu_(-1/2)(cosh rho) at small rho; tends to boundary_coefficient()."""
    return float(np.tanh(0.5 * rho) ** ev.mu * conical_of_rho(ev, np.array([rho]))[0])


def _sinhc_half(s):
    """sinh(s/2)/s, positive and smooth."""
    s = np.asarray(s, dtype=float)
    out = np.full(s.shape, 0.5)
    nz = s > 1e-8
    out[nz] = np.sinh(0.5 * s[nz]) / s[nz]
    return out


def agm(a, b, tol=1e-16):
    a, b = float(a), float(b)
    for _ in range(64):
        if abs(a - b) <= tol * a:
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return a


def legendre_half_agm(x):
    """P_(-1/2)(x) through the complete elliptic integral: sech(r/2) / AGM(1, sech(r/2))."""
    if not x >= 1:
        raise SpectrumError("need x >= 1")
    k = 1.0 / np.cosh(0.5 * np.arccosh(x))
    return k / agm(1.0, k)


def ground_state_profile(ev: ConicalEvaluator, rho, literal=False):
    """Rotation-invariant omega = 0 eigenfunction sinh(rho)^mu P^mu_(-1/2)(cosh rho).

    ``literal=True`` drops the sinh power; the two agree for N = 2 only.
    """
    p = conical_of_rho(ev, rho)
    if literal or ev.mu == 0:
        return p
    rho = np.asarray(rho, dtype=float)
    out = p.copy()
    pos = rho > 0
    out[pos] = p[pos] * np.exp(ev.mu * _log_sinh(rho[pos]))
    # limit at the origin: P^mu ~ (2 / rho)^mu / Gamma(1 - mu)
    out[~pos] = 2.0**ev.mu / special.gamma(1.0 - ev.mu)
    return out


# -- residuals --------------------------------------------------------------------

def radial_laplacian_apply(N, psi, h, centres):
    """-Delta psi at interior cells of a cell-centred radial grid."""
    left, right, _ = _flux_ratios(N, centres, h)
    lap = np.zeros_like(psi)
    lap[1:-1] = (left[1:-1] * (psi[1:-1] - psi[:-2]) + right[1:-1] * (psi[1:-1] - psi[2:])) / h**2
    if centres[0] - 0.5 * h <= 0:
        lap[0] = right[0] * (psi[0] - psi[1]) / h**2
        return lap, slice(0, len(psi) - 1)
    return lap, slice(1, len(psi) - 1)


def _polar_laplacian_apply(N, psi, h, rc, k, tc):
    """-Delta psi on a (rho, theta) grid for functions axially symmetric about axis 1."""
    lap = np.zeros_like(psi)
    for j in range(psi.shape[1]):
        lap[:, j] = radial_laplacian_apply(N, psi[:, j], h, rc)[0]
    q = N - 2
    faces = np.arange(len(tc) + 1) * k
    with np.errstate(divide="ignore"):
        lsf = q * np.log(np.sin(faces[1:-1])) if q else np.zeros(len(tc) - 1)
    lsc = _log_cell_mean(lambda t: q * np.log(np.sin(t)) if q else 0.0 * t, faces[:-1], faces[1:])
    # interior theta faces only: the two poles carry no flux by mirror symmetry
    d = psi[:, 1:] - psi[:, :-1]
    ang = np.zeros_like(psi)
    ang[:, :-1] -= np.exp(lsf - lsc[:-1])[None, :] * d
    ang[:, 1:] += np.exp(lsf - lsc[1:])[None, :] * d
    return lap + ang / (k**2 * np.sinh(rc)[:, None] ** 2)


def _transforms(probe_g):
    if probe_g is None:
        return [None]
    if isinstance(probe_g, np.ndarray) and probe_g.ndim == 2:
        return [probe_g]
    return list(probe_g)


def ground_state_residual(ev: ConicalEvaluator, N, probe_g: Union[None, np.ndarray, Sequence] = None,
                          rho_extent=RESIDUAL_RHO, n_nodes=RESIDUAL_NODES, n_angles=RESIDUAL_ANGLES,
                          literal=False):
    """Max relative residual |(-Delta - (N-1)^2/4) psi| / ((N-1)^2/4 |psi|) over interior nodes.

    psi(n) = Phi(mdot(g n, n_up)) with Phi the radial ground-state profile.
    A single g uses a radial grid centred at g^-1 n_up; a list of transforms
    is summed and sampled on a polar (rho, theta) grid centred at n_up, which
    needs all the points g^-1 n_up to lie on one axis through n_up.
    """
    if not np.isclose(ev.mu, 1.0 - N / 2.0):
        raise SpectrumError("evaluator order does not match 1 - N/2")
    lam = gap(N)
    gs = _transforms(probe_g)
    h = rho_extent / n_nodes
    rc = (np.arange(n_nodes) + 0.5) * h
    if len(gs) == 1:
        psi = ground_state_profile(ev, rc, literal)
        lap, inner = radial_laplacian_apply(N, psi, h, rc)
        res = np.abs(lap[inner] - lam * psi[inner]) / (lam * np.abs(psi[inner]))
        return float(np.max(res))
    # common axis of the centres g^-1 n_up
    up = geometry.n_up(N)
    centres = []
    axis = None
    for g in gs:
        q = up if g is None else geometry.lorentz_inverse(np.asarray(g, dtype=float)) @ up
        centres.append(q)
        v = q[1:]
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            if axis is None:
                axis = v / nv
            elif np.linalg.norm(v / nv - axis * np.dot(axis, v / nv)) > 1e-9:
                raise SpectrumError("centres of the combined ground states are not on one axis")
    if axis is None:
        axis = np.eye(N)[0]
    # annulus: the polar grid is singular at its own origin
    h = (rho_extent - ANNULUS_INNER) / n_nodes
    rc = ANNULUS_INNER + (np.arange(n_nodes) + 0.5) * h
    k = np.pi / n_angles
    tc = (np.arange(n_angles) + 0.5) * k
    R, TH = np.meshgrid(rc, tc, indexing="ij")
    psi = np.zeros_like(R)
    for q in centres:
        along = float(np.dot(q[1:], axis))
        # n = (cosh r, sinh r cos th along the axis, sinh r sin th transverse)
        dot = q[0] * np.cosh(R) - along * np.sinh(R) * np.cos(TH)
        dist = np.arccosh(np.maximum(dot, 1.0))
        psi += ground_state_profile(ev, dist.ravel(), literal).reshape(R.shape)
    lap = _polar_laplacian_apply(N, psi, h, rc, k, tc)
    inner = slice(1, n_nodes - 1)
    res = np.abs(lap[inner] - lam * psi[inner]) / (lam * np.abs(psi[inner]))
    return float(np.max(res))


def spectrum_row(N, rho_max=DEFAULT_RHO_MAX, n_nodes=None):
    """One CSV row: N, rho_max, n_nodes, lowest_eigenvalue, gap_target, residual."""
    op = RadialOperator.build(N, rho_max, n_nodes)
    ev = ConicalEvaluator.for_dimension(N)
    return {
        "N": int(N),
        "rho_max": float(rho_max),
        "n_nodes": op.n_nodes,
        "lowest_eigenvalue": lowest_eigenvalue(op),
        "gap_target": gap(N),
        "residual": ground_state_residual(ev, N),
    }
