"""Command-line orchestration: one binary, five subcommands.

``dispersion`` | ``linear`` | ``nonlinear`` | ``decompose`` | ``rates``
each read a flat key = value configuration file, run the corresponding
pipeline, and write CSV/JSON artifacts stamped with a schema version and
the configuration hash.  Exit codes: 0 success, 2 configuration or usage
error, 3 solver blow-up, 4 non-convergence, 5 I/O failure.

All artifact metadata and column names are ``#`` comment lines followed by
pure numeric comma-separated rows (17 significant digits), so files load
with any standard CSV reader and identical configurations produce byte
identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .characteristics import FieldBlowupError
from .config import (SCHEMA_VERSION, ConfigError, RunConfig, config_hash,
                     parse_config, serialize)
from .diagnostics import fit_decay_rate, fit_oscillation, fit_stat_osc
from .dispersion import RootConvergenceError, eval_penrose, landau_roots
from .linresponse import make_datum, solve_linear
from .nonlinear import (NonlinearConfig, PicardNonContractionError,
                        run_direct, run_picard)
from .radial import e_from_modes, radial_poisson

EPILOG = """\
Units: the equations are nondimensionalized so that time is measured in
inverse plasma-frequency units and the background velocity scale is 1; in
these variables the equilibrium transform is exp(-|k|) and the field
carrier oscillates at frequency 1.  The mode grid excludes k = 0, where
the dispersion function has a pole and no evaluation is defined.
"""


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        handler = _HANDLERS[args.command]
        handler(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FieldBlowupError as exc:
        print(f"solver blow-up: {exc}", file=sys.stderr)
        return 3
    except (PicardNonContractionError, RootConvergenceError,
            NonConvergenceError) as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 5
    return 0


class NonConvergenceError(RuntimeError):
    """A pipeline stage failed to reach its stopping tolerance."""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="landau3d",
        description="Landau-damping simulation and verification pipelines",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("dispersion", "tabulate the damped roots over the mode grid"),
            ("linear", "linearized density and field history"),
            ("nonlinear", "nonlinear solver (direct march or fixed point)"),
            ("decompose", "static/oscillatory split of a stored run"),
            ("rates", "decay-rate and frequency fits of stored artifacts")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--outdir", help="override the artifact directory")
        if name == "nonlinear":
            p.add_argument("--mode", choices=("direct", "picard"),
                           help="override the solver mode")
    return parser


def _load_config(args):
    if args.config is not None:
        config = parse_config(args.config)
    else:
        config = RunConfig()
    updates = {}
    if args.outdir is not None:
        updates["outdir"] = args.outdir
    if getattr(args, "mode", None) is not None:
        updates["mode"] = args.mode
    if updates:
        from dataclasses import replace
        config = replace(config, **updates)
    return config


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------

def _outdir(config):
    import pathlib
    path = pathlib.Path(config.outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path, config, columns, rows):
    """Metadata and column names as comments, then numeric CSV rows."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema_version = {SCHEMA_VERSION}\n")
        fh.write(f"# config_hash = {config_hash(config)}\n")
        fh.write(f"# columns: {','.join(columns)}\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_json(path, config, payload):
    body = {"schema_version": SCHEMA_VERSION,
            "config_hash": config_hash(config)}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_artifact_csv(path):
    """Load a CSV artifact; returns (data, header) with the # metadata."""
    header = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                header[key.strip()] = val.strip()
            elif body.startswith("columns:"):
                header["columns"] = [c.strip()
                                     for c in body[8:].split(",")]
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    return data, header


def _check_same_hash(headers, paths):
    hashes = {h.get("config_hash") for h in headers}
    if len(hashes) > 1:
        raise ConfigError(
            "config_hash mismatch across inputs: "
            + ", ".join(f"{p}={h.get('config_hash')}"
                        for p, h in zip(paths, headers)))


def _datum(config):
    return make_datum(eps=config.eps, spatial=config.spatial,
                      width=config.spatial_width, velocity=config.velocity)


def _k_grid(config):
    return np.geomspace(config.k_min, config.k_max, config.n_k)


def _times(config):
    n_t = int(round(config.t_max / config.dt)) + 1
    return np.arange(n_t) * config.dt


def _solver_config(config):
    return NonlinearConfig(n_r=config.n_r, r_max=config.r_max,
                           n_u=config.n_u, n_w=config.n_l, dt=config.dt,
                           t_max=config.t_max, tol_picard=config.tol_picard,
                           n_max_picard=config.n_max_picard,
                           window_t=config.window_t, relax=config.relax)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_dispersion(config):
    out = _outdir(config)
    rows = []
    for k in _k_grid(config):
        root = max(landau_roots(k, tol=config.quad_tol),
                   key=lambda lam: lam.real)
        residual = abs(eval_penrose(k, root))
        rows.append((k, root.real, root.imag, residual))
    _write_csv(out / "dispersion.csv", config,
               ("k", "re_lambda", "im_lambda", "residual"), rows)


def cmd_linear(config):
    out = _outdir(config)
    k = _k_grid(config)
    times = _times(config)
    run = solve_linear(_datum(config), k, times)
    rows = ((k[i], times[n], run.rho_hat[i, n].real, run.rho_hat[i, n].imag)
            for i in range(k.size) for n in range(times.size))
    _write_csv(out / "linear_modes.csv", config,
               ("k", "t", "re_rho", "im_rho"), rows)

    r = np.linspace(0.0, config.r_max, config.n_r)
    e_rt = np.empty((r.size, times.size))
    for n in range(times.size):
        e_rt[:, n] = e_from_modes(run.rho_hat[:, n].real, k, r)
    sup = np.max(np.abs(e_rt), axis=0)
    shell = 4 * np.pi * r ** 2
    l1 = np.trapezoid(shell[:, None] * np.abs(e_rt), r, axis=0)
    _write_csv(out / "linear_field.csv", config,
               ("t", "sup_abs_e", "l1_e"),
               zip(times, sup, l1))

    meta = {"times": [float(times[0]), float(times[-1])]}
    meta["decay_fit"] = _try_fit(lambda: fit_decay_rate(times, sup))
    # lowest mode: its exp(-t k) damping never buries the carrier
    meta["oscillation_fit"] = _try_fit(
        lambda: _freq_payload(times, run.rho_hat[0].real), kind="freq")
    _write_json(out / "linear_meta.json", config, meta)


def _freq_payload(t, series):
    freq, stderr = fit_oscillation(t, series)
    return {"frequency": freq, "stderr": stderr}


def _try_fit(thunk, kind="rate"):
    try:
        result = thunk()
    except ValueError as exc:
        return {"rejected": True, "note": str(exc)}
    if kind == "freq":
        return result
    return {"slope": result.slope, "intercept": result.intercept,
            "r_squared": result.r_squared, "window": list(result.window),
            "n_points": result.n_points, "rejected": result.rejected,
            "note": result.note}


def cmd_nonlinear(config):
    out = _outdir(config)
    f0 = _datum(config)
    solver = _solver_config(config)
    start = time.perf_counter()
    if config.mode == "picard":
        hist = run_picard(f0, solver)
        iterations = hist.meta["iterations"]
        converged = hist.meta["converged"]
    else:
        hist = run_direct(f0, solver)
        iterations = []
        converged = True
    wall = time.perf_counter() - start

    r, times = hist.grid.r, hist.times
    _write_csv(out / "rho_rt.csv", config, ("t", "r", "rho"),
               ((times[n], r[i], hist.rho[i, n])
                for n in range(times.size) for i in range(r.size)))
    _write_csv(out / "field_rt.csv", config, ("t", "r", "e"),
               ((times[n], r[i], hist.e[i, n])
                for n in range(times.size) for i in range(r.size)))
    _write_json(out / "picard_log.json", config,
                {"mode": config.mode, "iterations": iterations,
                 "converged": converged,
                 "windows": hist.meta.get("windows"),
                 "window_passes": hist.meta.get("window_passes")})

    scale = float(np.max(np.abs(hist.rho[:, 0]))) or 1.0
    conservation = {
        "mass_drift": float(np.max(np.abs(hist.mass - hist.mass[0]))),
        "mass_scale": scale,
        "max_leak": float(np.max(np.abs(hist.leak))),
        "boundary_peak_ratio": hist.meta["boundary_peak_ratio"],
    }
    _write_json(out / "run_meta.json", config,
                {"config": {k: v for k, v in
                            (line.split(" = ", 1)
                             for line in serialize(config).splitlines())},
                 "mode": config.mode, "wall_seconds": wall,
                 "converged": converged, "conservation": conservation})
    if not converged:
        raise NonConvergenceError(
            "fixed-point iteration stopped above tol_picard; see picard_log.json")


def cmd_decompose(config):
    out = _outdir(config)
    data, header = read_artifact_csv(out / "rho_rt.csv")
    _check_same_hash([header, {"config_hash": config_hash(config)}],
                     ["rho_rt.csv", "<config>"])
    times = np.unique(data[:, 0])
    r = np.unique(data[:, 1])
    rho = data[:, 2].reshape(times.size, r.size).T
    try:
        centers, c0, c1, _ = fit_stat_osc(times, rho)
    except ValueError as exc:
        raise ConfigError(f"cannot decompose this run: {exc}") from exc
    e_stat = np.empty(centers.size)
    e_osc = np.empty(centers.size)
    for w in range(centers.size):
        e_stat[w] = np.max(np.abs(radial_poisson(c0[:, w], r)))
        e_re = radial_poisson(c1[:, w].real, r)
        e_im = radial_poisson(c1[:, w].imag, r)
        e_osc[w] = np.max(np.hypot(e_re, e_im))
    _write_csv(out / "decomposition.csv", config,
               ("t", "sup_e_stat", "sup_e_osc"),
               zip(centers, e_stat, e_osc))


def cmd_rates(config):
    out = _outdir(config)
    sources = []
    headers = []
    series = None
    linear_field = out / "linear_field.csv"
    field_rt = out / "field_rt.csv"
    if linear_field.exists():
        data, header = read_artifact_csv(linear_field)
        times, sup = data[:, 0], data[:, 1]
        headers.append(header)
        sources.append(str(linear_field))
        modes = out / "linear_modes.csv"
        if modes.exists():
            mdata, mheader = read_artifact_csv(modes)
            headers.append(mheader)
            sources.append(str(modes))
            k = np.unique(mdata[:, 0])
            # lowest mode: the carrier outlives the exp(-t k) damping
            mask = mdata[:, 0] == k[0]
            series = (mdata[mask, 1], mdata[mask, 2])
    elif field_rt.exists():
        data, header = read_artifact_csv(field_rt)
        times = np.unique(data[:, 0])
        r = np.unique(data[:, 1])
        e = data[:, 2].reshape(times.size, r.size).T
        sup = np.max(np.abs(e), axis=0)
        series = (times, e[int(np.argmax(np.abs(e[:, 0]))), :])
        headers.append(header)
        sources.append(str(field_rt))
    else:
        raise ConfigError(
            f"no linear_field.csv or field_rt.csv under {out}")
    _check_same_hash(headers, sources)

    payload = {"inputs": sources,
               "decay_fit": _rate_with_ci(times, sup)}
    if series is not None:
        payload["oscillation_fit"] = _try_fit(
            lambda: _freq_payload(series[0], series[1]), kind="freq")
    _write_json(out / "rates.json", config, payload)


def _rate_with_ci(times, sup):
    try:
        fit = fit_decay_rate(times, sup)
    except ValueError as exc:
        return {"rejected": True, "note": str(exc)}
    # OLS standard error of the slope on the fitted peaks
    from .diagnostics import envelope_peaks
    pt, pv = envelope_peaks(times, sup)
    mask = (pt >= fit.window[0]) & (pt <= fit.window[1]) & (pv > 0)
    lx, ly = np.log(pt[mask]), np.log(pv[mask])
    resid = ly - (fit.slope * lx + fit.intercept)
    dof = max(lx.size - 2, 1)
    se = np.sqrt(np.sum(resid ** 2) / dof / np.sum((lx - lx.mean()) ** 2))
    payload = _try_fit(lambda: fit)
    payload["slope_stderr"] = float(se)
    payload["slope_ci95"] = [fit.slope - 1.96 * se, fit.slope + 1.96 * se]
    return payload


_HANDLERS = {
    "dispersion": cmd_dispersion,
    "linear": cmd_linear,
    "nonlinear": cmd_nonlinear,
    "decompose": cmd_decompose,
    "rates": cmd_rates,
}


if __name__ == "__main__":
    sys.exit(main())
