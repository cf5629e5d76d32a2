"""Experiment orchestration: JSON configs in, CSV/JSON artifacts + manifest out.

One experiment per process invocation.  Exit codes: 0 success, 1 invalid
configuration, 2 invariant violation during the run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .diagnostics import (closeness_scaling_sweep, compare_to_references,
                          positivity_margin, sup_kernel, alpha_hs_norm)
from .errors import ConfigError, HFBGasError
from .fock import (FockSpace, assemble_generator, build_operators,
                   build_quasifree, hermiticity_defect, random_symplectic_blocks,
                   symplectic_defect, verify_bogoliubov_pdm,
                   verify_commutator_identity, verify_weyl_shift, verify_wick)
from .grid import (Field, Grid, TrapSpec, heat_kernel_fourier_check,
                   lowest_eigenpairs)
from .hartree import InteractionSpec, minimize_hartree, propagate_hartree
from .hfb import (hfb_energy, particle_number, run_hfb_dense, run_hfb_modes,
                  thermal_to_dense_state, thermal_to_mode_state)
from .thermal import (assumption_diagnostics, build_thermal_model,
                      build_thermal_pdm, condensate_fraction,
                      condensate_amplitude, critical_temperature,
                      ideal_gas_excited_target)

MODES = ("thermal_build", "hfb_run", "closeness_sweep", "fock_verify",
         "heat_kernel_check")

_SCHEMA = {
    "mode": None,
    "seed": None,
    "output_dir": None,
    "grid": {"dim", "points_per_axis", "box_half_length"},
    "trap": {"exponent_s", "prefactor"},
    "interaction": {"shape", "v0", "sigma", "n_scale"},
    "thermal": {"n_total", "lambda_over_tc", "temperature", "target_excited",
                "target_policy", "mode_count", "m_cap", "discard_tol"},
    "integrator": {"dt", "t_end", "frames", "method"},
    "sweep": {"n_values", "c_probe"},
    "fock": {"m_modes", "n_max", "gamma", "phi", "n_seeds", "cutoff_level",
             "block_scale"},
    "heat_kernel": {"t_values", "mode_count", "diag_steps"},
    "hartree": {"g", "grad_tol"},
}


def validate_config(cfg: dict) -> dict:
    """Whitelist validation: unknown keys rejected, physical ranges checked."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, val in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        sub = _SCHEMA[key]
        if sub is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            unknown = set(val) - sub
            if unknown:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
    mode = cfg.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    trap = cfg.get("trap", {})
    if trap:
        if not (0 < trap.get("exponent_s", 1) <= 2):
            raise ConfigError("trap.exponent_s must lie in (0, 2]")
        if trap.get("prefactor", 1) <= 0:
            raise ConfigError("trap.prefactor must be positive")
    th = cfg.get("thermal", {})
    if th:
        if th.get("n_total", 1) <= 0:
            raise ConfigError("thermal.n_total must be positive")
        if ("lambda_over_tc" in th) == ("temperature" in th):
            raise ConfigError("thermal requires exactly one of lambda_over_tc/temperature")
    grid = cfg.get("grid", {})
    if grid:
        n = grid.get("points_per_axis", 2)
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigError("grid.points_per_axis must be a power of two")
        if grid.get("box_half_length", 1) <= 0:
            raise ConfigError("grid.box_half_length must be positive")
    integ = cfg.get("integrator", {})
    if integ:
        if integ.get("dt", 1e-3) <= 0 or integ.get("t_end", 1) <= 0:
            raise ConfigError("integrator.dt and t_end must be positive")
        if integ.get("method", "dense") not in ("dense", "modes"):
            raise ConfigError("integrator.method must be dense or modes")
    return cfg


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    mode: str
    started_at: str
    finished_at: str | None = None
    status: str = "incomplete"
    csv_path: str | None = None
    summary_path: str | None = None
    warnings: list = field(default_factory=list)


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(_canonical_json(cfg).encode()).hexdigest()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _json_default(x):
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x)!r}")


def write_csv(path: str, header: list, rows: list):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _write_manifest(path: str, manifest: RunManifest):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(asdict(manifest), fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def _build_grid(cfg) -> Grid:
    g = cfg.get("grid", {"dim": 1, "points_per_axis": 64, "box_half_length": 8.0})
    return Grid(g.get("dim", 1), g.get("points_per_axis", 64),
                g.get("box_half_length", 8.0))


def _build_trap(cfg) -> TrapSpec:
    t = cfg.get("trap", {})
    return TrapSpec(t.get("exponent_s", 2.0), t.get("prefactor", 1.0))


def _build_interaction(cfg, n_total) -> InteractionSpec:
    i = cfg.get("interaction", {})
    return InteractionSpec(shape=i.get("shape", "gaussian"), v0=i.get("v0", 1.0),
                           sigma=i.get("sigma", 1.0),
                           N_scale=i.get("n_scale", n_total))


def _thermal_pipeline(cfg, warnings_log):
    """Shared setup: spectrum, thermal weights, condensate profile."""
    grid = _build_grid(cfg)
    trap = _build_trap(cfg)
    th = cfg["thermal"]
    n_total = th["n_total"]
    n_modes = th.get("mode_count", min(grid.points_per_axis - 2, 48))
    spec = lowest_eigenpairs(grid, trap, n_modes)
    if spec.boundary_warning:
        warnings_log.append("boundary mass above 1e-6 in retained eigenfunctions")
    model = build_thermal_model(trap, n_total,
                                lam_over_tc=th.get("lambda_over_tc"),
                                temperature=th.get("temperature"))
    policy = th.get("target_policy", "ideal_gas")
    if "target_excited" in th:
        target = th["target_excited"]
    elif policy == "condensate_formula":
        g_frac = condensate_fraction(model.lambda_scaled, trap)
        target = n_total * (1.0 - g_frac)
    elif policy == "ideal_gas":
        _, target = ideal_gas_excited_target(spec, model.temperature, n_total)
    else:
        raise ConfigError(f"unknown thermal.target_policy {policy!r}")
    pdm = build_thermal_pdm(model, spec, target_excited=target,
                            m_cap=th.get("m_cap"),
                            discard_tol=th.get("discard_tol", 1e-3))
    hart = cfg.get("hartree", {})
    g_coupling = hart.get("g", min(1.0, max(0.0, 1.0 - target / n_total)))
    n_total_inter = _build_interaction(cfg, n_total)
    result = minimize_hartree(grid, trap, n_total_inter, g_coupling,
                              grad_tol=hart.get("grad_tol", 1e-8))
    amp = condensate_amplitude(model, pdm)
    phi0 = Field(grid, amp * result.minimizer.values)
    return grid, trap, spec, model, pdm, phi0, n_total_inter, result


def run_thermal_build(cfg, outdir, warnings_log):
    grid, trap, spec, model, pdm, phi0, inter, hres = _thermal_pipeline(cfg, warnings_log)
    op_norm, f_l1, h3 = assumption_diagnostics(pdm, spec, grid)
    tc, alpha, kappa = critical_temperature(trap, model.N_total)
    budget = phi0.norm() ** 2 + pdm.trace + pdm.discarded_trace
    header = ["j", "eigenvalue", "weight"]
    rows = [[int(i), spec.eigenvalues[i], w]
            for w, i in zip(pdm.weights, pdm.mode_indices)]
    csv_path = os.path.join(outdir, "thermal_modes.csv")
    write_csv(csv_path, header, rows)
    summary = {
        "schema_version": 1,
        "n_total": model.N_total,
        "temperature": model.temperature,
        "critical_temperature": tc,
        "alpha": alpha,
        "kappa": kappa,
        "chemical_potential": pdm.chemical_potential,
        "trace_gamma": pdm.trace,
        "discarded_trace": pdm.discarded_trace,
        "condensate_norm2": phi0.norm() ** 2,
        "budget_total": budget,
        "budget_rel_error": abs(budget - model.N_total) / model.N_total,
        "operator_norm": op_norm,
        "fourier_l1_bound": f_l1,
        "h3_trace": h3,
        "hartree_energy": hres.energy,
        "hartree_mu": hres.mu_H,
        "hartree_initial_step": hres.initial_step,
    }
    spath = os.path.join(outdir, "summary.json")
    write_json(spath, summary)
    return csv_path, spath


def run_hfb(cfg, outdir, warnings_log):
    grid, trap, spec, model, pdm, phi0, inter, _ = _thermal_pipeline(cfg, warnings_log)
    integ = cfg.get("integrator", {})
    dt = integ.get("dt", 1e-3)
    t_end = integ.get("t_end", 1.0)
    frames = integ.get("frames", 11)
    method = integ.get("method", "dense")
    if method == "dense":
        state0 = thermal_to_dense_state(pdm, phi0, inter)
        traj = run_hfb_dense(state0, dt, t_end, n_frames=frames)
    else:
        state0 = thermal_to_mode_state(pdm, phi0, inter)
        traj = run_hfb_modes(state0, dt, t_end, n_frames=frames)
    n0 = particle_number(traj.states[0])
    e0 = hfb_energy(traj.states[0])
    header = ["t", "number", "energy", "alpha_hs", "sup_kernel_bound",
              "positivity_margin"]
    rows = []
    for t, st in traj:
        pos = positivity_margin(st) if method == "dense" else float("nan")
        rows.append([t, particle_number(st), hfb_energy(st), alpha_hs_norm(st),
                     sup_kernel(st)[0], pos])
    csv_path = os.path.join(outdir, "hfb_frames.csv")
    write_csv(csv_path, header, rows)
    nums = [r[1] for r in rows]
    ens = [r[2] for r in rows]
    summary = {
        "schema_version": 1,
        "method": method,
        "number_initial": n0,
        "energy_initial": e0,
        "number_rel_drift": max(abs(n - n0) for n in nums) / abs(n0),
        "energy_rel_drift": max(abs(e - e0) for e in ens) / max(abs(e0), 1e-300),
        "symmetry_drift": traj.symmetry_drift,
    }
    spath = os.path.join(outdir, "summary.json")
    write_json(spath, summary)
    return csv_path, spath


def _closeness_single(cfg, n_total, warnings_log):
    sub = json.loads(json.dumps(cfg))
    sub["thermal"]["n_total"] = n_total
    grid, trap, spec, model, pdm, phi0, inter, _ = _thermal_pipeline(sub, warnings_log)
    integ = sub.get("integrator", {})
    dt = integ.get("dt", 2e-3)
    t_end = integ.get("t_end", 1.0)
    frames = integ.get("frames", 6)
    state0 = thermal_to_dense_state(pdm, phi0, inter)
    traj = run_hfb_dense(state0, dt, t_end, n_frames=frames)
    h_traj = propagate_hartree(phi0, inter, dt, t_end, n_frames=frames)
    if len(h_traj.times) != len(traj.times):
        h_traj = propagate_hartree(phi0, inter, dt, t_end,
                                   n_frames=len(traj.times))
    free0 = thermal_to_mode_state(pdm, phi0, inter, include_full_basis=False)
    tc, _, _ = critical_temperature(trap, n_total)
    report = compare_to_references(
        traj, h_traj, free0,
        normalizers={"N": n_total, "T_c": tc, "s": trap.exponent_s},
    )
    return report


def run_sweep(cfg, outdir, warnings_log, n_values=None):
    sw = cfg.get("sweep", {})
    n_values = n_values or sw.get("n_values")
    if not n_values or len(n_values) < 3:
        raise ConfigError("sweep requires at least 3 N values")
    c_probe = sw.get("c_probe", 0.5)
    reports = [_closeness_single(cfg, float(n), warnings_log) for n in n_values]
    for n, rep in zip(n_values, reports):
        h, rws = rep.csv_rows()
        write_csv(os.path.join(outdir, f"comparison_N{int(n)}.csv"), h, rws)
    result = closeness_scaling_sweep(reports, c_probe=c_probe)
    header = ["N", "T_c", "ratio_gamma_max", "ratio_phi_max", "slope_flag"]
    rows = [[r.N, r.T_c, r.ratio_gamma_max, r.ratio_phi_max, result.slope_flag]
            for r in result.rows]
    csv_path = os.path.join(outdir, "sweep.csv")
    write_csv(csv_path, header, rows)
    summary = {
        "schema_version": 1,
        "c_probe": c_probe,
        "slope_gamma": result.slope_gamma,
        "slope_phi": result.slope_phi,
        "slope_flag": result.slope_flag,
        "rows": [asdict(r) for r in result.rows],
    }
    spath = os.path.join(outdir, "summary.json")
    write_json(spath, summary)
    return csv_path, spath


def run_fock_verify(cfg, outdir, warnings_log):
    fc = cfg.get("fock", {})
    m = fc.get("m_modes", 2)
    n_max = fc.get("n_max", 6)
    seed = cfg.get("seed", 0)
    n_seeds = fc.get("n_seeds", 5)
    cutoff = fc.get("cutoff_level")
    space = FockSpace(m, n_max)
    ops = build_operators(space)
    reports = []
    small_ops = build_operators(FockSpace(1, 40))
    reports.append(verify_weyl_shift(build_operators(FockSpace(1, 16)),
                                     np.array([0.3 + 0j]), 1e-8))
    reports.append(verify_bogoliubov_pdm(small_ops, np.array([[0.25]]), 1e-9))
    qf = build_quasifree(small_ops, np.array([[0.2]]), np.array([0.35 + 0.1j]))
    reports.append(verify_wick(small_ops, qf.state_vector(small_ops.space), 1e-8,
                               n_samples=4, seed=seed))
    rng = np.random.default_rng(seed)
    for k in range(n_seeds):
        U, V = random_symplectic_blocks(2 * m, rng, scale=fc.get("block_scale", 0.3))
        phi = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        vmat = rng.standard_normal((m, m))
        vmat = (vmat + vmat.T) / 2
        gen = assemble_generator(ops, U, V, phi, vmat, N_scale=10.0,
                                 cutoff_level=cutoff)
        rep = verify_commutator_identity(space, gen)
        rep["seed_index"] = k
        rep["symplectic_defect"] = symplectic_defect(U, V)
        rep["G_hermiticity"] = hermiticity_defect(gen["G"])
        reports.append(rep)
    header = ["identity", "max_deviation", "tolerance", "passed"]
    rows = [[r["identity"], r["max_deviation"], r["tolerance"], r["passed"]]
            for r in reports]
    csv_path = os.path.join(outdir, "fock_reports.csv")
    write_csv(csv_path, header, rows)
    summary = {"schema_version": 1, "reports": reports,
               "all_passed": all(r["passed"] for r in reports)}
    spath = os.path.join(outdir, "summary.json")
    write_json(spath, summary)
    if not summary["all_passed"]:
        raise HFBGasError("fock verification failed")
    return csv_path, spath


def run_heat_kernel(cfg, outdir, warnings_log):
    hk = cfg.get("heat_kernel", {})
    t_values = hk.get("t_values", [0.5, 1.0, 2.0])
    grid = _build_grid(cfg)
    trap = _build_trap(cfg)
    spec = lowest_eigenpairs(grid, trap, hk.get("mode_count", 24))
    rows = []
    for t in t_values:
        rep = heat_kernel_fourier_check(grid, trap, spec, t,
                                        diag_steps=hk.get("diag_steps", 200))
        rows.append([trap.exponent_s, t, rep.l1_mass, rep.diag_mass, rep.bound,
                     rep.min_kernel_value, rep.tail_estimate])
    header = ["s", "t", "l1_mass_modes", "l1_mass_diag", "bound", "min_kernel",
              "tail_estimate"]
    csv_path = os.path.join(outdir, "heat_kernel.csv")
    write_csv(csv_path, header, rows)
    summary = {
        "schema_version": 1,
        "rows": [dict(zip(header, r)) for r in rows],
        "bound_satisfied": all(r[3] <= r[4] * 1.001 for r in rows),
    }
    spath = os.path.join(outdir, "summary.json")
    write_json(spath, summary)
    return csv_path, spath


_DISPATCH = {
    "thermal_build": run_thermal_build,
    "hfb_run": run_hfb,
    "closeness_sweep": run_sweep,
    "fock_verify": run_fock_verify,
    "heat_kernel_check": run_heat_kernel,
}


def run(cfg: dict, output_dir: str | None = None, n_values=None) -> RunManifest:
    try:
        cfg = validate_config(cfg)
    except ConfigError as exc:
        outdir = output_dir or (cfg.get("output_dir") if isinstance(cfg, dict)
                                else None)
        if outdir:
            os.makedirs(outdir, exist_ok=True)
            bad = RunManifest(
                config_hash=hashlib.sha256(repr(cfg).encode()).hexdigest(),
                code_version=__version__,
                mode=str(cfg.get("mode")) if isinstance(cfg, dict) else "?",
                started_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
                finished_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
                status="failed",
                warnings=[f"ConfigError: {exc}"],
            )
            _write_manifest(os.path.join(outdir, "manifest.json"), bad)
        raise
    outdir = output_dir or cfg.get("output_dir") or "."
    os.makedirs(outdir, exist_ok=True)
    manifest = RunManifest(
        config_hash=_config_hash(cfg),
        code_version=__version__,
        mode=cfg["mode"],
        started_at=time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    )
    mpath = os.path.join(outdir, "manifest.json")
    _write_manifest(mpath, manifest)
    warnings_log = manifest.warnings
    try:
        import warnings as _w
        with _w.catch_warnings(record=True) as caught:
            _w.simplefilter("always")
            if cfg["mode"] == "closeness_sweep":
                csv_path, spath = run_sweep(cfg, outdir, warnings_log,
                                            n_values=n_values)
            else:
                csv_path, spath = _DISPATCH[cfg["mode"]](cfg, outdir, warnings_log)
        for w in caught:
            warnings_log.append(str(w.message))
        manifest.csv_path = csv_path
        manifest.summary_path = spath
        manifest.status = "complete"
    except Exception as exc:
        manifest.status = "failed"
        manifest.warnings.append(f"{type(exc).__name__}: {exc}")
        raise
    finally:
        manifest.finished_at = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
        _write_manifest(mpath, manifest)
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hfbgas",
                                     description="positive-temperature Bose gas "
                                                 "effective-dynamics experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "verify-fock"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON experiment config")
        p.add_argument("--output-dir", default=None)
        if name == "sweep":
            p.add_argument("--n-values", default=None,
                           help="comma-separated particle numbers")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    n_values = None
    if getattr(args, "n_values", None):
        n_values = [float(x) for x in args.n_values.split(",")]
    if args.command == "sweep":
        cfg.setdefault("mode", "closeness_sweep")
    if args.command == "verify-fock":
        cfg.setdefault("mode", "fock_verify")
    try:
        run(cfg, output_dir=args.output_dir, n_values=n_values)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except HFBGasError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # failed runs still leave a manifest
        print(f"invariant violation: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
