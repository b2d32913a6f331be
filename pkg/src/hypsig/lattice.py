"""Lattice configurations, gauge fixing and the checkerboard sweep engine."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numba
import numpy as np

from . import geometry
from .rng import TAG_KROT, RngState
from .sampling import heatbath_point, metropolis_point

MAX_SITES = 2**26
MIN_BETA = 0.05

# skip the TBB probe (warns on old TBB builds); same semantics for prange
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]


class LatticeError(ValueError):
    pass


class Boundary(str, enum.Enum):
    FIXED_SPIN_BOUNDARY = "fixed_spin_boundary"
    FIXED_SITE_INTERIOR = "fixed_site_interior"
    EXTERNAL_FIELD = "external_field"


@dataclass(frozen=True)
class HeatBath:
    name = "heatbath"


@dataclass(frozen=True)
class Metropolis:
    scale: float = 1.0
    name = "metropolis"

    def __post_init__(self):
        if not self.scale > 0:
            raise LatticeError("Metropolis scale must be positive")


def parse_kernel(kernel):
    if isinstance(kernel, (HeatBath, Metropolis)):
        return kernel
    if kernel in ("heatbath", "heat_bath", None):
        return HeatBath()
    if kernel == "metropolis":
        return Metropolis()
    raise LatticeError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class LatticeSpec:
    """Hypercubic block of Z^d with open edges and a gauge-fixing choice.

    boundary:
      fixed_spin_boundary  every boundary site frozen to n_up
      fixed_site_interior  only ``anchor`` frozen (default: the centre site)
      external_field       nothing frozen; epsilon * sum_x (n0(x) - 1) added to S
    """

    dims: Tuple[int, ...]
    boundary: Boundary = Boundary.FIXED_SPIN_BOUNDARY
    N: int = 2
    epsilon: float = 0.0
    anchor: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        dims = tuple(int(x) for x in np.atleast_1d(self.dims))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        if not 1 <= len(dims) <= 3:
            raise LatticeError("lattice dimension d must be 1, 2 or 3")
        if any(x < 1 for x in dims):
            raise LatticeError("lattice extents must be positive")
        if int(np.prod(dims)) > MAX_SITES:
            raise LatticeError(f"more than {MAX_SITES} sites")
        geometry._check_dim(self.N)
        if self.epsilon < 0:
            raise LatticeError("epsilon must be nonnegative")
        if self.boundary is Boundary.EXTERNAL_FIELD and not self.epsilon > 0:
            raise LatticeError("external_field gauge fixing needs epsilon > 0")
        if self.boundary is not Boundary.EXTERNAL_FIELD and self.epsilon != 0:
            raise LatticeError("epsilon is only used with external_field gauge fixing")
        if self.anchor is not None:
            anchor = tuple(int(x) for x in self.anchor)
            if len(anchor) != len(dims) or any(not 0 <= a < n for a, n in zip(anchor, dims)):
                raise LatticeError(f"anchor {anchor} outside lattice {dims}")
            object.__setattr__(self, "anchor", anchor)

    @property
    def d(self):
        return len(self.dims)

    @property
    def volume(self):
        return int(np.prod(self.dims))

    @property
    def center(self):
        return tuple(n // 2 for n in self.dims)

    def index(self, site):
        site = tuple(int(x) for x in np.atleast_1d(site))
        if len(site) != self.d or any(not 0 <= s < n for s, n in zip(site, self.dims)):
            raise LatticeError(f"site {site} outside lattice {self.dims}")
        return int(np.ravel_multi_index(site, self.dims))

    def coords(self):
        return np.stack(np.unravel_index(np.arange(self.volume), self.dims), axis=-1)

    def neighbors(self):
        """(V, 2d) array of neighbour indices, -1 where the edge is open."""
        c = self.coords()
        nbr = np.full((self.volume, 2 * self.d), -1, dtype=np.int64)
        for mu, n in enumerate(self.dims):
            for j, step in enumerate((1, -1)):
                cc = c.copy()
                cc[:, mu] += step
                ok = (cc[:, mu] >= 0) & (cc[:, mu] < n)
                idx = np.full(self.volume, -1, dtype=np.int64)
                idx[ok] = np.ravel_multi_index(tuple(cc[ok].T), self.dims)
                nbr[:, 2 * mu + j] = idx
        return nbr

    def bonds(self):
        """(n_bonds, 2) array of nearest-neighbour pairs, each counted once."""
        nbr = self.neighbors()
        i = np.repeat(np.arange(self.volume), self.d)
        j = nbr[:, 0::2].ravel()
        keep = j >= 0
        return np.stack([i[keep], j[keep]], axis=1)

    def frozen_mask(self):
        mask = np.zeros(self.volume, dtype=bool)
        if self.boundary is Boundary.FIXED_SPIN_BOUNDARY:
            c = self.coords()
            for mu, n in enumerate(self.dims):
                mask |= (c[:, mu] == 0) | (c[:, mu] == n - 1)
        elif self.boundary is Boundary.FIXED_SITE_INTERIOR:
            mask[self.index(self.anchor if self.anchor is not None else self.center)] = True
        return mask

    def colors(self):
        """Checkerboard parity of every site."""
        return (self.coords().sum(axis=1) % 2).astype(np.int64)

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "boundary": self.boundary.value,
            "N": self.N,
            "epsilon": self.epsilon,
            "anchor": None if self.anchor is None else list(self.anchor),
        }


@dataclass
class SpinField:
    spec: LatticeSpec
    spins: np.ndarray
    frozen: np.ndarray = None
    seed: int = 0
    sweep: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.spins = np.ascontiguousarray(self.spins, dtype=float)
        if self.spins.shape != (self.spec.volume, self.spec.N + 1):
            raise LatticeError(f"spins must have shape {(self.spec.volume, self.spec.N + 1)}")
        if self.frozen is None:
            self.frozen = self.spec.frozen_mask()
        geometry.check_hpoint(self.spins)
        up = geometry.n_up(self.spec.N)
        if not np.all(self.spins[self.frozen] == up):
            raise LatticeError("frozen sites must hold n_up exactly")

    @classmethod
    def cold(cls, spec, seed=0):
        spins = np.zeros((spec.volume, spec.N + 1))
        spins[:, 0] = 1.0
        return cls(spec, spins, seed=seed)

    @classmethod
    def hot(cls, spec, spread, seed=0):
        rng = np.random.default_rng(seed)
        spins = geometry.random_hpoint(spread, rng, spec.N, size=spec.volume)
        frozen = spec.frozen_mask()
        spins[frozen] = geometry.n_up(spec.N)
        return cls(spec, spins, frozen, seed=seed)

    def copy(self):
        return SpinField(self.spec, self.spins.copy(), self.frozen.copy(), self.seed, self.sweep)

    def neighbors(self):
        if "nbr" not in self._cache:
            self._cache["nbr"] = self.spec.neighbors()
        return self._cache["nbr"]

    def color_sites(self):
        if "colors" not in self._cache:
            col = self.spec.colors()
            free = ~self.frozen
            self._cache["colors"] = [
                np.flatnonzero(free & (col == c)).astype(np.int64) for c in (0, 1)
            ]
        return self._cache["colors"]

    @property
    def free_sites(self):
        return np.flatnonzero(~self.frozen)


# -- sweep engine --------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _local_field(spins, nbr, s, eps, M):
    M[:] = 0.0
    for j in range(nbr.shape[1]):
        t = nbr[s, j]
        if t >= 0:
            for c in range(spins.shape[1]):
                M[c] += spins[t, c]
    M[0] += eps


@numba.njit(cache=True, inline="always")
def _update_site(spins, nbr, s, beta, eps, seed, sweep, kind, scale):
    n = spins.shape[1]
    M = np.empty(n)
    out = np.empty(n)
    _local_field(spins, nbr, s, eps, M)
    if kind == 0:
        st = heatbath_point(M, beta, seed, s, sweep, out)
        if st < 0 or not np.isfinite(out[0]):
            return -1
        acc = 1
    else:
        acc = metropolis_point(spins[s].copy(), M, beta, scale, seed, s, sweep, out)
    spins[s, :] = out
    return acc


@numba.njit(cache=True)
def _update_serial(spins, nbr, sites, beta, eps, seed, sweep, kind, scale):
    total = 0
    bad = 0
    for i in range(sites.shape[0]):
        a = _update_site(spins, nbr, sites[i], beta, eps, seed, sweep, kind, scale)
        if a < 0:
            bad += 1
        else:
            total += a
    return total, bad


@numba.njit(cache=True, parallel=True)
def _update_parallel(spins, nbr, sites, beta, eps, seed, sweep, kind, scale):
    n = sites.shape[0]
    acc = np.zeros(n, dtype=np.int64)
    for i in numba.prange(n):
        acc[i] = _update_site(spins, nbr, sites[i], beta, eps, seed, sweep, kind, scale)
    bad = 0
    total = 0
    for i in range(n):
        if acc[i] < 0:
            bad += 1
        else:
            total += acc[i]
    return total, bad


def configure_threads():
    """Cap numba worker threads at HYPSIG_THREADS if set."""
    cap = os.environ.get("HYPSIG_THREADS")
    if not cap:
        return numba.get_num_threads()
    try:
        n = int(cap)
    except ValueError:
        raise LatticeError(f"HYPSIG_THREADS must be a positive integer, got {cap!r}") from None
    if n < 1:
        raise LatticeError(f"HYPSIG_THREADS must be a positive integer, got {cap!r}")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()


def sweep(field: SpinField, beta, kernel=None, rng=None, parallel=False):
    """One checkerboard pass updating every free site once, in place.

    Even sites first, then odd.  Each site draws from the stream
    (seed, site, field.sweep), so serial and parallel passes agree bit for
    bit.  ``rng`` may be an integer seed or an RngState; by default the
    field's own seed is used.  Returns the Metropolis acceptance count.
    """
    if not beta >= MIN_BETA:
        raise LatticeError(f"beta must be >= {MIN_BETA}")
    kernel = parse_kernel(kernel)
    seed = field.seed if rng is None else getattr(rng, "seed", rng)
    seed = np.uint64(int(seed))
    kind = 0 if isinstance(kernel, HeatBath) else 1
    scale = float(getattr(kernel, "scale", 1.0))
    eps = float(field.spec.epsilon)
    nbr = field.neighbors()
    update = _update_parallel if parallel else _update_serial
    accepted = 0
    for sites in field.color_sites():
        if sites.size == 0:
            continue
        a, bad = update(field.spins, nbr, sites, float(beta), eps, seed, field.sweep, kind, scale)
        if bad:
            raise LatticeError("sampler failure: local field not timelike or rejection stalled")
        accepted += a
    field.sweep += 1
    return accepted


def symmetry_move(field: SpinField):
    """Rotate every spin by one Haar-random rotation fixing n_up, in place.

    Every gauge fixing is invariant under the stabilizer of n_up (frozen
    spins equal n_up, the field term couples to n0), so this leaves the
    Gibbs measure unchanged while randomizing its slow global angle.  The
    rotation is drawn from the stream (seed, site=V, field.sweep).
    """
    N = field.spec.N
    z = RngState(int(field.seed), field.spec.volume, field.sweep).normals(N * N, TAG_KROT).reshape(N, N)
    q, r = np.linalg.qr(z)
    q = q * np.sign(np.diag(r))[None, :]
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    field.spins[:, 1:] = field.spins[:, 1:] @ q.T
    return q


# -- action --------------------------------------------------------------------

def action(field: SpinField):
    """Sum of mdot(n(x), n(y)) over nearest-neighbour bonds."""
    b = field.spec.bonds()
    if b.size == 0:
        return 0.0
    return float(np.sum(geometry.mdot(field.spins[b[:, 0]], field.spins[b[:, 1]])))


def gauge_action(field: SpinField):
    """epsilon * sum_x (n0(x) - 1); zero unless external-field gauge fixing."""
    eps = field.spec.epsilon
    if eps == 0:
        return 0.0
    return float(eps * np.sum(field.spins[:, 0] - 1.0))


def n_bonds(spec: LatticeSpec):
    return sum(spec.volume // n * (n - 1) for n in spec.dims)
