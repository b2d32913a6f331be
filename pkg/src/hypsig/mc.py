"""Monte Carlo driver: thermalize, sweep, measure, estimate errors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from . import geometry, observables, ward
from .lattice import (
    MIN_BETA,
    LatticeError,
    LatticeSpec,
    Metropolis,
    SpinField,
    parse_kernel,
    sweep,
    symmetry_move,
)
from .stats import jackknife, tau_int

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.0, 0.5, float(np.arcsinh(1.0)), 1.0, 2.0)
PILOT_SWEEPS = 1000
MIN_THERM = 1000


@dataclass
class RunRecord:
    """Measurement series of one Monte Carlo run plus its parameters."""

    parameters: dict
    sweep_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    series: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_measurements(self):
        return int(len(self.sweep_index))

    def mean_error(self, name):
        x = self.series[name]
        return jackknife(x)

    def summary(self):
        means, errors, taus = {}, {}, {}
        for name, x in self.series.items():
            x = np.asarray(x)
            if x.size == 0:
                means[name] = errors[name] = taus[name] = None
                continue
            t = tau_int(x)
            m, e = jackknife(x, tau=t)
            means[name], errors[name], taus[name] = m, _finite(e), t
        return {
            "parameters": self.parameters,
            "n_measurements": self.n_measurements,
            "means": means,
            "errors": errors,
            "tau_int": taus,
        }


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


def te_name(alpha):
    return f"te_alpha_{alpha:.6f}"


def two_point_name(r):
    return f"two_point_r{r}"


class _Measurer:
    """Vectorized measurement of the standard observable set on one field."""

    def __init__(self, spec: LatticeSpec, probe_site, alphas, max_distance, ward_probes):
        self.spec = spec
        self.p = spec.index(probe_site)
        self.alphas = [float(a) for a in alphas]
        self.axes = np.stack([geometry.spacelike_axis(a, spec.N) for a in self.alphas]) if alphas else None
        pc = np.array(probe_site)
        self.partners = []
        for r in range(1, max_distance + 1):
            if pc[0] + r >= spec.dims[0]:
                break
            c = pc.copy()
            c[0] += r
            self.partners.append((r, spec.index(c)))
        self.bonds = spec.bonds()
        self.nb = len(self.bonds)
        self.frozen = spec.frozen_mask()
        self.free = ~self.frozen
        self.ward_probes = list(ward_probes or [])
        self.gens = ward.so1n_basis(spec.N) if self.ward_probes else []
        self.nbr = spec.neighbors()

    def names(self):
        out = [te_name(a) for a in self.alphas]
        out += [two_point_name(r) for r, _ in self.partners]
        if self.free.any():
            out += ["sz_fluctuation"]
            out += [f"magnetization_{mu}" for mu in range(self.spec.N + 1)]
        out += ["action_density"]
        for g in range(len(self.gens)):
            for pr in self.ward_probes:
                out += [ward.series_name(g, pr, "lhs"), ward.series_name(g, pr, "rhs")]
        return out

    def __call__(self, f: SpinField):
        s = f.spins
        n = s[self.p]
        vals = []
        if self.alphas:
            vals.extend(np.tanh(geometry.mdot(n[None, :], self.axes)).tolist())
        for _, q in self.partners:
            vals.append(float(geometry.mdot(n, s[q])))
        if self.free.any():
            m = s[self.free].sum(axis=0)
            vals.append(observables.sz_fluctuation(f))
            vals.extend(m.tolist())
        if self.nb:
            S = float(np.sum(geometry.mdot(s[self.bonds[:, 0]], s[self.bonds[:, 1]])))
            vals.append(S / self.nb)
        else:
            vals.append(0.0)
        for g, (_, A) in enumerate(self.gens):
            XS = ward.killing_action(f, A, self.nbr)
            for pr in self.ward_probes:
                vals.extend(ward.ward_terms(f, g, pr, self.p, XS=XS))
        return vals


def estimate_thermalization(spec, beta, kernel, seed, parallel=False):
    """max(MIN_THERM, 20 tau) with tau from a pilot run on the action density."""
    f = SpinField.cold(spec, seed=seed)
    m = _Measurer(spec, observables.default_probe_site(spec), [], 0, [])
    xs = []
    for _ in range(PILOT_SWEEPS):
        sweep(f, beta, kernel, parallel=parallel)
        xs.append(m(f)[-1])
    return int(max(MIN_THERM, np.ceil(20 * tau_int(xs))))


def run_mc(
    spec: LatticeSpec,
    beta,
    kernel=None,
    sweeps=10000,
    thermalization: Optional[int] = None,
    measure_every=1,
    seed=0,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    probe_site=None,
    max_distance=8,
    ward_probes: Sequence[str] = (),
    parallel=False,
    init_spread=0.0,
    initial: Optional[SpinField] = None,
    symmetry_moves=False,
) -> RunRecord:
    """Run heat-bath or Metropolis Monte Carlo and record measurement series.

    Measured every ``measure_every`` sweeps after thermalization:
    T_e at the probe site for each alpha, n(p).n(p + r e_0) for r up to
    ``max_distance``, sz_fluctuation with the raw magnetization components,
    the action density and, if ``ward_probes`` is given, the two sides of
    every Ward identity for all generators.  ``thermalization=None``
    chooses max(1000, 20 tau) from a pilot run.  ``initial`` continues
    from a given field (for example a loaded checkpoint); it is copied, and
    its seed and sweep counter carry the random stream forward.
    ``symmetry_moves`` follows every sweep with a random global rotation
    about n_up (see lattice.symmetry_move).
    """
    if not beta >= MIN_BETA:
        raise LatticeError(f"beta must be >= {MIN_BETA} (beta -> 0 is not supported)")
    if sweeps < 0 or measure_every < 1 or (thermalization is not None and thermalization < 0):
        raise LatticeError("sweep counts must be nonnegative and measure_every >= 1")
    kernel = parse_kernel(kernel)
    for pr in ward_probes:
        ward.get_probe(pr)
    probe_site = observables.default_probe_site(spec) if probe_site is None else tuple(probe_site)
    if thermalization is None:
        thermalization = estimate_thermalization(spec, beta, kernel, seed, parallel)
    params = {
        "beta": float(beta),
        "spec": spec.to_dict(),
        "kernel": kernel.name,
        "metropolis_scale": getattr(kernel, "scale", None),
        "sweeps": int(sweeps),
        "thermalization": int(thermalization),
        "measure_every": int(measure_every),
        "seed": int(seed),
        "probe_site": list(probe_site),
        "alphas": [float(a) for a in alphas],
        "ward_probes": list(ward_probes),
        "init_spread": float(init_spread),
        "symmetry_moves": bool(symmetry_moves),
    }
    if initial is not None:
        if initial.spec != spec:
            raise LatticeError("initial field has a different lattice spec")
        f = initial.copy()
        params["seed"] = int(f.seed)
        params["start_sweep"] = int(f.sweep)
    elif init_spread > 0:
        f = SpinField.hot(spec, init_spread, seed=seed)
    else:
        f = SpinField.cold(spec, seed=seed)
    meas = _Measurer(spec, probe_site, alphas, max_distance, ward_probes)
    names = meas.names()

    def step():
        a = sweep(f, beta, kernel, parallel=parallel)
        if symmetry_moves:
            symmetry_move(f)
        return a

    for _ in range(thermalization):
        step()
    n_meas = sweeps // measure_every
    data = np.empty((n_meas, len(names)))
    idx = np.empty(n_meas, dtype=np.int64)
    accepted = 0
    k = 0
    for t in range(1, sweeps + 1):
        accepted += step()
        if t % measure_every == 0 and k < n_meas:
            data[k] = meas(f)
            idx[k] = f.sweep
            k += 1
    n_free = int((~f.frozen).sum())
    if isinstance(kernel, Metropolis) and sweeps and n_free:
        params["acceptance"] = accepted / (sweeps * n_free)
    rec = RunRecord(params, idx, {name: data[:, j].copy() for j, name in enumerate(names)})
    rec.final_field = f
    log.info("run_mc: %d measurements on %s at beta=%g", n_meas, spec.dims, beta)
    return rec
