"""Monte Carlo against the exact transfer-operator solution of the 1D chain.

A lattice of 2L + 1 sites with both end spins frozen to n_up is the chain
with DeltaAt(n_up) at sites -L and L; site 0 is the lattice centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

from . import chain
from .lattice import Boundary, LatticeSpec
from .mc import run_mc, te_name, two_point_name

DEFAULT_CV_ALPHAS = (float(math.asinh(1.0)), 1.0)


@dataclass
class Comparison:
    observable: str
    exact: float
    mc: float
    sigma: float
    n_measurements: int = 0

    @property
    def delta(self):
        return self.mc - self.exact

    @property
    def pull(self):
        return self.delta / self.sigma if self.sigma and self.sigma > 0 else math.inf

    def agrees(self, n_sigma=3.0):
        return abs(self.delta) <= n_sigma * self.sigma

    def to_dict(self):
        return {"observable": self.observable, "exact": self.exact, "mc": self.mc,
                "sigma": self.sigma, "delta": self.delta, "pull": self.pull}


def bridge_spec(L):
    if L < 1:
        raise chain.ChainError("need L >= 1")
    return LatticeSpec((2 * L + 1,), Boundary.FIXED_SPIN_BOUNDARY, N=2)


def exact_values(beta, L, alphas=DEFAULT_CV_ALPHAS, grid=None):
    """Transfer-operator <T_e(n(0))> for each alpha and <n(0).n(1)> on the bridge."""
    grid = chain.PolarGrid.default(beta) if grid is None else grid
    op = chain.TransferOperator(beta, grid)
    left = right = chain.DeltaAt()
    marg = chain.evolve(op, left, right, L, L)
    ev = chain.TeEvaluator()
    out = {te_name(a): ev(marg, a) for a in alphas}
    out[two_point_name(1)] = chain.expectation_two_point(op, left, right, L, L, 1)
    return out


def cross_validate(beta=1.0, L=32, sweeps=100_000, seed=0, alphas: Sequence[float] = DEFAULT_CV_ALPHAS,
                   thermalization=None, parallel=False, symmetry_moves=True) -> List[Comparison]:
    """Compare MC means (blocked-jackknife errors) with the exact bridge values.

    Global rotations about n_up are on by default: they remove the slow
    azimuthal drift of the whole bridge, which otherwise dominates the
    error of T_e.
    """
    exact = exact_values(beta, L, alphas)
    spec = bridge_spec(L)
    rec = run_mc(spec, beta, "heatbath", sweeps=sweeps, thermalization=thermalization, seed=seed,
                 alphas=alphas, probe_site=(L,), max_distance=1, parallel=parallel,
                 symmetry_moves=symmetry_moves)
    out = []
    for name, v in exact.items():
        m, e = rec.mean_error(name)
        out.append(Comparison(name, float(v), m, e, rec.n_measurements))
    return out
