"""Ward identities from Killing-vector integration by parts.

For a generator A of so(1, N) acting on the free spins, invariance of
dOmega gives for every probe F

    < sum_x X_A^(x) F >  =  beta < F  sum_x X_A^(x) S >,

exactly, at any beta and volume, with S the full action including any
gauge-fixing field term.  Probes are registered functions linear or
bilinear in spin components, so the Killing derivatives are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from . import geometry
from .lattice import LatticeError, SpinField
from .stats import jackknife_pooled, tau_int


def so1n_basis(N):
    """Generators of so(1, N): spatial rotations J_ij (i < j), then boosts B_i.

    Returns a list of (name, matrix).  exp(t A) acts on column vectors.
    """
    geometry._check_dim(N)
    basis = []
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            a = np.zeros((N + 1, N + 1))
            a[i, j] = -1.0
            a[j, i] = 1.0
            basis.append((f"rot({i},{j})", a))
    for i in range(1, N + 1):
        a = np.zeros((N + 1, N + 1))
        a[0, i] = a[i, 0] = 1.0
        basis.append((f"boost({i})", a))
    return basis


def generator(N, index):
    basis = so1n_basis(N)
    if not (isinstance(index, (int, np.integer)) and 0 <= index < len(basis)):
        raise LatticeError(f"generator index {index!r} out of range 0..{len(basis) - 1}")
    return basis[index]


def is_compact(N, index):
    return generator(N, index)[0].startswith("rot")


@dataclass(frozen=True)
class Probe:
    """F and sum_x X_A F evaluated on a field, at a probe site p."""

    name: str
    value: Callable
    killing: Callable


def _linear_probe(name, coeff):
    # F = mdot(n_p, v) with v fixed
    def make_v(N):
        v = np.zeros(N + 1)
        k, s = coeff
        v[k] = s
        return v

    def value(spins, free, p, q):
        return geometry.mdot(spins[p], make_v(spins.shape[1] - 1))

    def killing(spins, free, p, q, A):
        if not free[p]:
            return 0.0
        return geometry.mdot(A @ spins[p], make_v(spins.shape[1] - 1))

    return Probe(name, value, killing)


def _two_point_value(spins, free, p, q):
    return geometry.mdot(spins[p], spins[q])


def _two_point_killing(spins, free, p, q, A):
    out = 0.0
    if free[p]:
        out += geometry.mdot(A @ spins[p], spins[q])
    if free[q]:
        out += geometry.mdot(spins[p], A @ spins[q])
    return out


PROBES: Dict[str, Probe] = {
    # n0(p) = mdot(n_p, n_up)
    "n0": _linear_probe("n0", (0, 1.0)),
    # n1(p) = -mdot(n_p, e_1)
    "n1": _linear_probe("n1", (1, -1.0)),
    # n(p) . n(p + e_0)
    "two_point": Probe("two_point", _two_point_value, _two_point_killing),
}


def get_probe(name):
    try:
        return PROBES[name]
    except KeyError:
        raise LatticeError(f"unknown probe {name!r}; registered: {sorted(PROBES)}") from None


def killing_action(field: SpinField, A, nbr=None):
    """sum over free x of X_A^(x) S, with the gauge-field term included."""
    spins = field.spins
    nbr = field.neighbors() if nbr is None else nbr
    free = ~field.frozen
    if not free.any():
        return 0.0
    ext = np.vstack([spins, np.zeros((1, spins.shape[1]))])
    M = ext[nbr].sum(axis=1)
    M[:, 0] += field.spec.epsilon
    An = spins @ A.T
    return float(np.sum(geometry.mdot(An[free], M[free])))


def probe_partner(spec, p):
    """Second site of the two-point probe: p + e_0, or p - e_0 at the edge."""
    c = list(np.unravel_index(p, spec.dims))
    c[0] = c[0] + 1 if c[0] + 1 < spec.dims[0] else c[0] - 1
    if c[0] < 0:
        return p
    return int(np.ravel_multi_index(tuple(c), spec.dims))


def ward_terms(field: SpinField, gen_index, probe_name, site, XS=None):
    """(sum_x X_A F, F * sum_x X_A S) for one configuration."""
    _, A = generator(field.spec.N, gen_index)
    probe = get_probe(probe_name)
    p = field.spec.index(site) if not isinstance(site, (int, np.integer)) else int(site)
    q = probe_partner(field.spec, p)
    free = ~field.frozen
    if XS is None:
        XS = killing_action(field, A)
    lhs = float(probe.killing(field.spins, free, p, q, A))
    F = float(probe.value(field.spins, free, p, q))
    return lhs, F * XS


def series_name(gen_index, probe_name, part):
    return f"ward_g{gen_index}_{probe_name}_{part}"


def ward_residual(records, generator_index, probe):
    """Residual <sum X F> - beta <F sum X S> and its jackknife error.

    ``records`` is a RunRecord or a list of them, all at the same beta and
    lattice spec.  Each record must have been run with Ward measurements.
    """
    if not isinstance(records, (list, tuple)):
        records = [records]
    if not records:
        raise LatticeError("empty ensemble")
    get_probe(probe)
    p0 = records[0].parameters
    generator(p0["spec"]["N"], generator_index)
    parts = []
    for rec in records:
        if rec.parameters["beta"] != p0["beta"] or rec.parameters["spec"] != p0["spec"]:
            raise LatticeError("ensemble mixes different (beta, spec)")
        lname = series_name(generator_index, probe, "lhs")
        rname = series_name(generator_index, probe, "rhs")
        if lname not in rec.series:
            raise LatticeError(f"record has no Ward series for generator {generator_index}, probe {probe!r}")
        parts.append(np.asarray(rec.series[lname]) - p0["beta"] * np.asarray(rec.series[rname]))
    if not any(len(x) for x in parts):
        return 0.0, 0.0
    x = np.concatenate(parts)
    if np.all(x == 0):
        return 0.0, 0.0
    tau = max(tau_int(y) for y in parts if len(y))
    return jackknife_pooled(parts, tau=tau)


def ward_pass(residual, sigma, n_sigma=3.0, atol=1e-12):
    """|residual| <= n_sigma * sigma, with an absolute floor for identities that are 0 = 0 in floating point."""
    return abs(residual) <= n_sigma * sigma + atol
