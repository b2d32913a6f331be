"""Observables of a spin field: order parameter, invariant correlators, fluctuations."""

from __future__ import annotations

import numpy as np

from . import geometry
from .lattice import LatticeError, SpinField, action, n_bonds


def _site_index(field: SpinField, site):
    if isinstance(site, (int, np.integer)):
        if not 0 <= site < field.spec.volume:
            raise LatticeError(f"site index {site} outside lattice")
        return int(site)
    return field.spec.index(site)


def order_parameter_Te(field: SpinField, e, site):
    """tanh(n(site) . e) for a unit spacelike e (or a rapidity alpha)."""
    if np.isscalar(e):
        e = geometry.spacelike_axis(float(e), field.spec.N)
    n = field.spins[_site_index(field, site)]
    return float(np.tanh(geometry.mdot(n, e)))


def invariant_two_point(field: SpinField, x, y):
    """n(x) . n(y); at least 1 for points on the hyperboloid."""
    n = field.spins[_site_index(field, x)]
    m = field.spins[_site_index(field, y)]
    return float(geometry.mdot(n, m))


def magnetization(field: SpinField):
    """Sum of spins over free sites (future timelike when nonempty)."""
    free = ~field.frozen
    if not free.any():
        raise LatticeError("no free sites")
    return field.spins[free].sum(axis=0)


def sz_fluctuation(field: SpinField):
    """Mean over free sites of n(x) . m_hat - 1, with m_hat the unit mean spin.

    A G-invariant, nonnegative measure of quadratic fluctuations about the
    mean magnetization direction; zero iff all free spins coincide.
    """
    m = magnetization(field)
    m_hat = m / np.sqrt(geometry.mdot(m, m))
    free = field.spins[~field.frozen]
    # n.m_hat - 1 = -|n - m_hat|^2 / 2, accurate for small fluctuations
    v = free - m_hat
    return float(np.mean(np.maximum(-0.5 * geometry.mdot(v, v), 0.0)))


def action_density(field: SpinField):
    """Action per bond; 1 for an aligned field."""
    nb = n_bonds(field.spec)
    return action(field) / nb if nb else 0.0


def default_probe_site(field_or_spec):
    """Centre site, or its +x neighbour when the centre is frozen."""
    spec = getattr(field_or_spec, "spec", field_or_spec)
    c = list(spec.center)
    frozen = spec.frozen_mask()
    if frozen[spec.index(c)] and c[0] + 1 < spec.dims[0]:
        c[0] += 1
    return tuple(c)
