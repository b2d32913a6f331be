"""Hyperboloid model of H_N and the Lorentz group SO0(1, N).

Points are numpy arrays whose last axis has length N + 1 and holds the
components (c0, c1, ..., cN).  All functions broadcast over leading axes
unless stated otherwise.  Transforms are plain (N+1, N+1) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HPOINT_TOL = 1e-9
N_MAX = 8
RENORM_EVERY = 64


class GeometryError(ValueError):
    """Raised when an input violates a hyperboloid or Lorentz invariant."""


def mdot(a, b):
    """Minkowski form a0*b0 - sum_i ai*bi over the last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def n_up(N=2):
    """The base point (1, 0, ..., 0)."""
    _check_dim(N)
    e = np.zeros(N + 1)
    e[0] = 1.0
    return e


def _check_dim(N):
    if not (isinstance(N, (int, np.integer)) and 2 <= N <= N_MAX):
        raise GeometryError(f"N must be an integer in [2, {N_MAX}], got {N!r}")


def check_hpoint(n, tol=HPOINT_TOL):
    """Raise GeometryError unless every point in ``n`` lies on the upper sheet."""
    n = np.asarray(n, dtype=float)
    if not np.all(np.isfinite(n)):
        raise GeometryError("non-finite point components")
    if np.any(n[..., 0] < 1.0 - tol):
        raise GeometryError("c0 < 1: point is not on the upper sheet")
    # relative check, points far out have |c|^2 ~ c0^2
    norm = mdot(n, n)
    scale = np.maximum(1.0, n[..., 0] ** 2)
    if np.any(np.abs(norm - 1.0) > tol * scale):
        raise GeometryError("mdot(n, n) != 1: point is off the hyperboloid")
    return n


def renormalize(c):
    """Project an approximately-unit timelike vector back onto the hyperboloid.

    Uses the rescaling c / sqrt(mdot(c, c)); the input must be future timelike.
    """
    c = np.asarray(c, dtype=float)
    q = mdot(c, c)
    if np.any(q <= 0) or np.any(c[..., 0] <= 0):
        raise GeometryError("cannot renormalize a vector that is not future timelike")
    return c / np.sqrt(q)[..., None]


def lift(spatial):
    """Point on the hyperboloid with the given spatial part."""
    spatial = np.asarray(spatial, dtype=float)
    c0 = np.sqrt(1.0 + np.sum(spatial * spatial, axis=-1))
    return np.concatenate([c0[..., None], spatial], axis=-1)


def spacelike_axis(alpha, N=2):
    """Canonical unit spacelike vector e = (sinh a, cosh a, 0, ..., 0).

    mdot(e, e) = -1 and mdot(e, n_up) = sinh(alpha).
    """
    _check_dim(N)
    e = np.zeros(N + 1)
    e[0] = np.sinh(alpha)
    e[1] = np.cosh(alpha)
    return e


def geodesic_distance(n, m):
    """Hyperbolic distance arccosh(mdot(n, m)).

    Evaluated as 2*asinh(|n - m|/2) with |v|^2 = -mdot(v, v), which keeps
    full relative precision for nearby points.
    """
    n = np.asarray(n, dtype=float)
    m = np.asarray(m, dtype=float)
    x = mdot(n, m)
    if np.any(x < 1.0 - 1e-7):
        raise GeometryError("mdot(n, m) < 1: inputs are not on the hyperboloid")
    v = n - m
    s = np.maximum(-mdot(v, v), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(s))


# -- Lorentz transforms ---------------------------------------------------

def boost(axis, rapidity, N=2):
    """Hyperbolic rotation by ``rapidity`` in the (0, axis) plane."""
    _check_dim(N)
    if not (isinstance(axis, (int, np.integer)) and 1 <= axis <= N):
        raise GeometryError(f"boost axis must be in 1..{N}, got {axis!r}")
    g = np.eye(N + 1)
    ch, sh = np.cosh(rapidity), np.sinh(rapidity)
    g[0, 0] = g[axis, axis] = ch
    g[0, axis] = g[axis, 0] = sh
    return g


def rotation(i, j, angle, N=2):
    """Rotation by ``angle`` in the spatial (i, j) plane, 1 <= i < j <= N."""
    _check_dim(N)
    if not (1 <= i <= N and 1 <= j <= N and i != j):
        raise GeometryError(f"invalid rotation plane ({i}, {j}) for N={N}")
    g = np.eye(N + 1)
    c, s = np.cos(angle), np.sin(angle)
    g[i, i] = g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g


def minkowski_metric(N):
    return np.diag([1.0] + [-1.0] * N)


def lorentz_inverse(g):
    """Inverse of a Lorentz matrix, eta g^T eta."""
    g = np.asarray(g, dtype=float)
    eta = minkowski_metric(g.shape[-1] - 1)
    return eta @ np.swapaxes(g, -1, -2) @ eta


def check_lorentz(g, tol=1e-9):
    """Raise GeometryError unless g is in SO0(1, N)."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise GeometryError("Lorentz transform must be a square matrix")
    eta = minkowski_metric(g.shape[0] - 1)
    # entries grow like cosh(rapidity); compare relative to that size
    scale = max(1.0, float(np.max(np.abs(g))) ** 2)
    if np.max(np.abs(g.T @ eta @ g - eta)) > tol * scale:
        raise GeometryError("matrix does not preserve the Minkowski form")
    if abs(np.linalg.det(g) - 1.0) > tol * scale:
        raise GeometryError("determinant is not +1")
    if g[0, 0] < 1.0 - tol:
        raise GeometryError("transform is not orthochronous")
    return g


def section(n):
    """Canonical group element g_s(n) with g_s(n) @ n_up = n.

    The pure boost along the geodesic from n_up to n:

        [[n0,  x^T                ],
         [x,   I + x x^T / (1+n0) ]]

    where x is the spatial part of n.
    """
    n = np.asarray(n, dtype=float)
    if n.ndim != 1:
        raise GeometryError("section expects a single point")
    check_hpoint(n)
    N = n.shape[0] - 1
    x = n[1:]
    g = np.empty((N + 1, N + 1))
    g[0, 0] = n[0]
    g[0, 1:] = x
    g[1:, 0] = x
    g[1:, 1:] = np.eye(N) + np.outer(x, x) / (1.0 + n[0])
    return g


def boost_from_origin(p, q):
    """Apply section(p) to q, vectorized over leading axes of p and q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    x = p[..., 1:]
    xq = np.sum(x * q[..., 1:], axis=-1)
    out = np.empty(np.broadcast_shapes(p.shape, q.shape))
    out[..., 0] = p[..., 0] * q[..., 0] + xq
    coef = q[..., 0] + xq / (1.0 + p[..., 0])
    out[..., 1:] = q[..., 1:] + x * coef[..., None]
    return out


def orbit(point, transforms: Sequence[np.ndarray]):
    """Apply transforms successively to ``point`` (first element first).

    The point is reprojected onto the hyperboloid after every
    RENORM_EVERY compositions to bound floating-point drift.
    """
    p = np.asarray(point, dtype=float).copy()
    for k, g in enumerate(transforms, start=1):
        p = g @ p
        if k % RENORM_EVERY == 0:
            p = renormalize(p)
    return p


def random_direction(rng, N, size=None):
    shape = (N,) if size is None else (*np.atleast_1d(size), N)
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_hpoint(spread, rng, N=2, size=None):
    """Point at rapidity |Normal(0, spread)| from n_up in a uniform direction."""
    _check_dim(N)
    if spread < 0:
        raise GeometryError("spread must be nonnegative")
    shape = () if size is None else tuple(np.atleast_1d(size))
    r = np.abs(rng.standard_normal(shape)) * spread
    d = random_direction(rng, N, size)
    out = np.empty((*shape, N + 1))
    out[..., 0] = np.cosh(r)
    out[..., 1:] = np.sinh(r)[..., None] * d
    return out


def random_lorentz(rng, N=2, max_rapidity=3.0):
    """Random element of SO0(1, N): rotation @ boost(1, t) @ rotation."""
    _check_dim(N)
    t = rng.uniform(-max_rapidity, max_rapidity)
    return _random_rotation(rng, N) @ boost(1, t, N) @ _random_rotation(rng, N)


def _random_rotation(rng, N):
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    g = np.eye(N + 1)
    g[1:, 1:] = q
    return g


# -- centre-of-mass reduction ---------------------------------------------

@dataclass
class ReducedConfig:
    """Element of (G x H_N^(nu-1)) / K, stored by its canonical representative."""

    group_part: np.ndarray
    relative_points: list = field(default_factory=list)

    def allclose(self, other, atol=1e-9):
        if len(self.relative_points) != len(other.relative_points):
            return False
        scale = max(1.0, float(np.max(np.abs(self.group_part))))
        if not np.allclose(self.group_part, other.group_part, rtol=0, atol=atol * scale):
            return False
        return all(
            np.allclose(a, b, rtol=0, atol=atol * max(1.0, a[0]))
            for a, b in zip(self.relative_points, other.relative_points)
        )


def _k_canonical(group_part, tol=1e-12):
    """Rotation k in K making the spatial rows of k @ group_part upper trapezoidal.

    Gram-Schmidt over the columns of the spatial block, skipping columns
    that lie in the span of earlier ones.  The first nonzero column ends up
    along axis 1 with positive coordinate, the next one in the (1, 2) plane
    with positive second coordinate, and so on.  If h n_up = n_up (h in K)
    the frame is built from the rotation columns, giving k = h^-1.
    """
    h = np.asarray(group_part, dtype=float)
    N = h.shape[0] - 1
    spatial = h[1:, :]
    scale = max(1.0, float(np.max(np.abs(spatial))))
    basis = []
    for col in spatial.T:
        v = col.copy()
        for q in basis:
            v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol * scale and len(basis) < N:
            basis.append(v / nv)
        if len(basis) == N:
            break
    Q = np.column_stack(basis)
    if np.linalg.det(Q) < 0:
        Q[:, -1] = -Q[:, -1]
    k = np.eye(N + 1)
    k[1:, 1:] = Q.T
    return k


def canonicalize(reduced: ReducedConfig) -> ReducedConfig:
    """Canonical representative of the left-diagonal K orbit of ``reduced``."""
    k = _k_canonical(reduced.group_part)
    return ReducedConfig(k @ reduced.group_part, [k @ p for p in reduced.relative_points])


def cm_reduce(config) -> ReducedConfig:
    """Split off the centre-of-mass group element of a configuration.

    (n1, ..., n_nu) -> [g_s(n1)^-1, g_s(n1)^-1 n2, ..., g_s(n1)^-1 n_nu]
    modulo the left diagonal action of K.
    """
    config = [np.asarray(p, dtype=float) for p in config]
    if len(config) == 0:
        raise GeometryError("cm_reduce needs at least one point")
    for p in config:
        check_hpoint(p)
    h = lorentz_inverse(section(config[0]))
    return canonicalize(ReducedConfig(h, [h @ p for p in config[1:]]))


def cm_reconstruct(reduced: ReducedConfig):
    """Inverse of cm_reduce: recover (n1, ..., n_nu) from any representative."""
    hinv = lorentz_inverse(reduced.group_part)
    N = hinv.shape[0] - 1
    return [hinv @ n_up(N)] + [hinv @ p for p in reduced.relative_points]


def right_action(reduced: ReducedConfig, g) -> ReducedConfig:
    """Action of g on the group entry, [h, ...] -> [h g^-1, ...].

    With this convention cm_reduce(g . config) == right_action(cm_reduce(config), g).
    """
    h = reduced.group_part @ lorentz_inverse(g)
    return canonicalize(ReducedConfig(h, [p.copy() for p in reduced.relative_points]))


def left_diagonal(g, config):
    """Rigid motion of a configuration: n_i -> g n_i for every particle."""
    return [np.asarray(g) @ np.asarray(p) for p in config]
