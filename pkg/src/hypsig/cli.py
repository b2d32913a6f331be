"""Command-line driver: one experiment per process.

Exit codes: 0 success, 2 configuration error, 3 invariant failure,
4 numerical failure.  Every run that gets past configuration writes a
manifest.json (config hash, versions, wall time, checks); CSV bodies carry
no timestamps, so identical configs give byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, artifacts, chain, crossval, spectrum, ward
from .config import ConfigError, ExperimentConfig, parse_config
from .lattice import LatticeError, Metropolis, configure_threads
from .mc import run_mc
from .sampling import SamplerError

log = logging.getLogger("hypsig")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 2, 3, 4

CHAIN_COLUMNS = ["L", "alpha", "beta", "Te_value", "limit_value", "abs_error"]
SPECTRUM_COLUMNS = ["N", "rho_max", "n_nodes", "lowest_eigenvalue", "gap_target", "residual"]
WARD_COLUMNS = ["generator", "name", "compact", "probe", "residual", "sigma", "pull", "passed"]
CROSSVAL_COLUMNS = ["observable", "exact", "mc", "sigma", "delta", "pull", "passed"]

GRID_TOL = 1e-6
SYMMETRY_TOL = 1e-10
SIGMA_BOUND = 3.0


class _Checks:
    def __init__(self):
        self.items = []

    def add(self, name, passed, **detail):
        self.items.append({"name": name, "passed": bool(passed), **detail})
        if not passed:
            log.warning("check failed: %s %s", name, detail)
        return passed

    @property
    def ok(self):
        return all(c["passed"] for c in self.items)


def _kernel(cfg):
    return Metropolis(cfg.metropolis_scale) if cfg.kernel == "metropolis" else "heatbath"


def _grid(cfg):
    return chain.PolarGrid.default(cfg.beta, cfg.nodes or chain.DEFAULT_NODES, cfg.modes or chain.DEFAULT_MODES,
                                   cfg.rho_max)


# -- modes --------------------------------------------------------------------------

def run_simulate(cfg, out, checks):
    spec = cfg.lattice_spec()
    rec = run_mc(spec, cfg.beta, _kernel(cfg), sweeps=cfg.sweeps, thermalization=cfg.therm,
                 measure_every=cfg.measure_every, seed=cfg.seed, alphas=cfg.alpha, parallel=cfg.parallel,
                 symmetry_moves=cfg.symmetry_moves)
    paths = artifacts.write_run_record(rec, out)
    paths.append(artifacts.save_checkpoint(rec.final_field, out / "final.hsig"))
    tp = [x for k, x in rec.series.items() if k.startswith("two_point_")]
    checks.add("two_point_at_least_one", all(np.all(x >= 1 - 1e-9) for x in tp))
    if "sz_fluctuation" in rec.series:
        checks.add("sz_fluctuation_nonnegative", bool(np.all(rec.series["sz_fluctuation"] >= 0)))
    return paths


def run_chain_exact(cfg, out, checks):
    grid = _grid(cfg)
    op = chain.TransferOperator(cfg.beta, grid)
    Ls = sorted(set(cfg.L))
    rows = []
    per_alpha = []
    for a in cfg.alpha:
        lim = chain.limit_formula(a)
        vals = dict(chain.te_scan(op, a, Ls))
        for L in Ls:
            rows.append({"L": L, "alpha": a, "beta": cfg.beta, "Te_value": vals[L], "limit_value": lim,
                         "abs_error": abs(vals[L] - lim)})
        if a == 0:
            checks.add("alpha0_symmetry", max(abs(v) for v in vals.values()) <= SYMMETRY_TOL,
                       max_abs=max(abs(v) for v in vals.values()))
        Lmax = Ls[-1]
        v, v2, d = chain.grid_convergence(
            lambda o: chain.expectation_Te(o, chain.DeltaAt(), chain.FreeWeight(), Lmax, 0, a), cfg.beta, grid)
        checks.add(f"grid_convergence_alpha_{a:g}", d < GRID_TOL, L=Lmax, delta=d)
        marg = chain.evolve(op, chain.DeltaAt(), chain.FreeWeight(), Lmax, 0)
        checks.add(f"positivity_alpha_{a:g}", chain.check_positivity(marg))
        L_star, _ = chain.find_L_star(op, a, L_max=max(Lmax, 1))
        rich = [{"L": L, "extrapolated": chain.richardson(vals[L], vals[2 * L])} for L in Ls if 2 * L in vals]
        per_alpha.append({"alpha": a, "limit_value": lim, "L_star": L_star, "grid_check": {
            "L": Lmax, "value": v, "refined_value": v2, "delta": d}, "richardson": rich})
    cal = grid.self_calibration_error()
    checks.add("grid_self_calibration", cal < 1e-10, error=cal)
    paths = [artifacts.write_csv(out / "chain.csv", CHAIN_COLUMNS, rows)]
    report = {"beta": cfg.beta, "grid": {"n_nodes": len(grid.rho), "n_modes": grid.n_modes,
                                         "rho_max": grid.rho_max},
              "one_at_origin": op.one_at_origin(), "alphas": per_alpha}
    paths.append(artifacts.write_json(out / "chain_report.json", report))
    return paths


def run_spectrum(cfg, out, checks):
    N = cfg.N
    R = cfg.rho_max or spectrum.DEFAULT_RHO_MAX
    n = cfg.nodes or int(math.ceil(spectrum.NODES_PER_UNIT * R))
    ev = spectrum.ConicalEvaluator.for_dimension(N)
    res = spectrum.ground_state_residual(ev, N)
    res_coarse = spectrum.ground_state_residual(ev, N, n_nodes=spectrum.RESIDUAL_NODES // 2)
    rows = []
    lam = {}
    for rmax in (R, 2 * R):
        base = n if rmax == R else 2 * n
        for nn in (base, int(round(1.1 * base))):
            val = spectrum.lowest_eigenvalue(spectrum.RadialOperator.build(N, rmax, nn))
            lam[(rmax, nn)] = val
            rows.append({"N": N, "rho_max": rmax, "n_nodes": nn, "lowest_eigenvalue": val,
                         "gap_target": spectrum.gap(N), "residual": res})
    g = spectrum.gap(N)
    checks.add("no_spectrum_below_gap", min(lam.values()) >= g - 1e-6, min=min(lam.values()), gap=g)
    checks.add("dirichlet_monotone", lam[(2 * R, 2 * n)] <= lam[(R, n)])
    cont = max(abs(lam[(R, n)] - lam[(R, int(round(1.1 * n)))]),
               abs(lam[(2 * R, 2 * n)] - lam[(2 * R, int(round(2.2 * n)))]))
    checks.add("eigenvalue_continuity", cont < 1e-3, max_change=cont)
    checks.add("conical_boundary_limit", abs(spectrum.boundary_limit(ev) - ev.boundary_coefficient()) <= 1e-8)
    ratio = res_coarse / res if res > 0 else math.inf
    checks.add("residual_second_order", 3.0 <= ratio <= 5.0, ratio=ratio)
    if N == 2:
        checks.add("residual_bound", res <= 1e-4, residual=res)
    paths = [artifacts.write_csv(out / "spectrum.csv", SPECTRUM_COLUMNS, rows)]
    paths.append(artifacts.write_json(out / "spectrum_report.json", {
        "N": N, "gap": g, "residual": res, "residual_half_resolution": res_coarse,
        "conical_at_one": float(spectrum.conical_eval(ev, 1.0)), "boundary_limit": spectrum.boundary_limit(ev),
        "boundary_coefficient": ev.boundary_coefficient()}))
    return paths


def run_ward_check(cfg, out, checks):
    spec = cfg.lattice_spec()
    rec = run_mc(spec, cfg.beta, _kernel(cfg), sweeps=cfg.sweeps, thermalization=cfg.therm,
                 measure_every=cfg.measure_every, seed=cfg.seed, alphas=(), ward_probes=cfg.ward_probes,
                 parallel=cfg.parallel, symmetry_moves=cfg.symmetry_moves)
    rows = []
    for g, (name, _) in enumerate(ward.so1n_basis(spec.N)):
        for p in cfg.ward_probes:
            r, e = ward.ward_residual(rec, g, p)
            ok = ward.ward_pass(r, e, SIGMA_BOUND)
            pull = r / e if e > 0 else 0.0
            rows.append({"generator": g, "name": name, "compact": ward.is_compact(spec.N, g), "probe": p,
                         "residual": r, "sigma": e, "pull": pull, "passed": ok})
            checks.add(f"ward_{name}_{p}", ok, residual=r, sigma=e)
    paths = [artifacts.write_csv(out / "ward.csv", WARD_COLUMNS, rows)]
    paths.append(artifacts.write_json(out / "ward_report.json", {
        "parameters": rec.parameters, "n_measurements": rec.n_measurements, "rows": rows}))
    return paths


def run_cross_validate(cfg, out, checks):
    L = cfg.L[0]
    comps = crossval.cross_validate(cfg.beta, L, sweeps=cfg.sweeps, seed=cfg.seed, alphas=cfg.alpha,
                                    thermalization=cfg.therm, parallel=cfg.parallel,
                                    symmetry_moves=True)
    rows = []
    for c in comps:
        ok = c.agrees(SIGMA_BOUND)
        rows.append({**c.to_dict(), "passed": ok})
        checks.add(f"crossval_{c.observable}", ok, pull=c.pull)
    paths = [artifacts.write_csv(out / "crossval.csv", CROSSVAL_COLUMNS, rows)]
    paths.append(artifacts.write_json(out / "crossval_report.json", {
        "beta": cfg.beta, "L": L, "sweeps": cfg.sweeps, "n_measurements": comps[0].n_measurements,
        "rows": rows}))
    return paths


RUNNERS = {
    "Simulate": run_simulate,
    "ChainExact": run_chain_exact,
    "Spectrum": run_spectrum,
    "WardCheck": run_ward_check,
    "CrossValidate": run_cross_validate,
}


def versions():
    import numba
    import scipy

    return {"hypsig": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def run(cfg: ExperimentConfig):
    """Execute a validated config; returns the exit status."""
    try:
        threads = configure_threads()
    except LatticeError as exc:
        print(json.dumps({"status": "config_error", "exit_code": EXIT_CONFIG, "key": "HYPSIG_THREADS",
                          "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    checks = _Checks()
    status, code, error, paths = "ok", EXIT_OK, None, []
    try:
        paths = RUNNERS[cfg.mode](cfg, out, checks)
        if not checks.ok:
            status, code = "invariant_failure", EXIT_INVARIANT
    except (chain.NumericalFailure, spectrum.SpectrumError, SamplerError, FloatingPointError) as exc:
        status, code, error = "numerical_failure", EXIT_NUMERICAL, exc
    except (LatticeError, chain.ChainError) as exc:
        status, code, error = "config_error", EXIT_CONFIG, exc
    manifest = {
        "mode": cfg.mode,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "versions": versions(),
        "started_at": started,
        "wall_time_s": time.perf_counter() - t0,
        "status": status,
        "exit_code": code,
        "checks": checks.items,
        "artifacts": sorted(str(Path(p).relative_to(out)) for p in paths),
        "threads": threads,
    }
    if error is not None:
        manifest["error"] = {"type": type(error).__name__, "message": str(error)}
        print(json.dumps({"status": status, "exit_code": code, **manifest["error"]}), file=sys.stderr)
    artifacts.write_json(out / "manifest.json", manifest)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="hypsig", description=__doc__.splitlines()[0])
    p.add_argument("--mode", help="Simulate | ChainExact | Spectrum | WardCheck | CrossValidate")
    p.add_argument("--config", help="INI-style or JSON config file")
    p.add_argument("--beta", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--dims", help="lattice extents, e.g. 16x16 or 16,16")
    p.add_argument("--alpha", help="comma-separated rapidities")
    p.add_argument("--gauge-fix", dest="gauge_fix",
                   help="fixed_spin_boundary | fixed_site_interior | external_field")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--kernel", help="heatbath | metropolis")
    p.add_argument("--sweeps", type=int)
    p.add_argument("--therm", type=int)
    p.add_argument("--measure-every", dest="measure_every", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--L", help="comma-separated chain lengths")
    p.add_argument("--rho-max", dest="rho_max", type=float)
    p.add_argument("--nodes", type=int)
    p.add_argument("--modes", type=int)
    p.add_argument("--out")
    p.add_argument("--print-config", action="store_true", help="print the effective config as JSON and exit")
    return p


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("config", "print_config") and v is not None}
    try:
        cfg = parse_config(args.config, flags)
    except ConfigError as exc:
        print(json.dumps({"status": "config_error", "exit_code": EXIT_CONFIG, "key": exc.key,
                          "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(cfg.to_json())
        return EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
