"""Command line entry point: ``dtcsim <command> [config.ini]``.

Exit codes: 0 success, 1 configuration error, 2 numerical failures in at
least one cell, 3 validation failure.  ``DTCSIM_WORKERS`` sets the number of
worker processes used for scan cells (default 1).  All physical outputs are
expressed in units of ``f Gamma``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config

__all__ = ["main", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_VALIDATION", "WORKERS_ENV"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_VALIDATION = 3
WORKERS_ENV = "DTCSIM_WORKERS"

log = logging.getLogger("dtcsim")


# --------------------------------------------------------------------------
# plumbing
# --------------------------------------------------------------------------
class Run:
    """Output directory, manifest bookkeeping and the cell runner."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.output)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.cells: list[dict] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def record(self, label, status, seconds):
        self.cells.append({"cell": label, "status": status, "seconds": round(seconds, 3)})

    @property
    def failed(self) -> bool:
        return any(c["status"] != "ok" for c in self.cells)

    def finish(self) -> int:
        manifest = {
            "command": self.command,
            "config_hash": self.cfg.digest,
            "code_version": __version__,
            "cells": self.cells,
            "files": sorted(set(self.files)),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return EXIT_NUMERIC if self.failed else EXIT_OK

    def map_cells(self, func, cells, labels):
        """Evaluate ``func`` over ``cells`` in order; failures become ``None``."""
        workers = max(1, int(os.environ.get(WORKERS_ENV, "1") or 1))
        if workers > 1 and len(cells) > 1:
            with ProcessPoolExecutor(workers) as pool:
                outcomes = list(pool.map(_guarded, [func] * len(cells), cells))
        else:
            outcomes = [_guarded(func, c) for c in cells]
        results = []
        for label, (status, value, seconds) in zip(labels, outcomes):
            self.record(label, status, seconds)
            if status != "ok":
                log.warning("cell %s failed: %s", label, status)
            results.append(value)
        return results


def _guarded(func, cell):
    t0 = time.perf_counter()
    try:
        value = func(cell)
        status = "ok"
    except Exception as exc:  # noqa: BLE001 - a failing cell must not stop the scan
        value, status = None, f"failed: {type(exc).__name__}: {exc}"
    return status, value, time.perf_counter() - t0


def _f(x) -> str:
    return repr(float(x))


def _header(fh, cfg: RunConfig, extra: dict | None = None):
    fh.write(f"# dtcsim {__version__}; config sha256 {cfg.digest}\n")
    for k, v in (extra or {}).items():
        fh.write(f"# {k} = {v}\n")


# --------------------------------------------------------------------------
# engines
# --------------------------------------------------------------------------
def _exact_trace(params, cfg: RunConfig):
    from .dynamics import steady_state
    from .liouvillian import build_liouvillian
    from .regression import correlator, default_tau_grid, fitting_tau_grid

    L = build_liouvillian(params)
    rho = steady_state(L)
    if cfg.eta_max == "auto":
        grid = fitting_tau_grid(params, rho, periods=cfg.fit_periods, samples=cfg.samples)
    else:
        grid = default_tau_grid(params, cfg.eta_max, cfg.samples)
    return correlator(L, rho, grid)


def _cumulant_trace(params, cfg: RunConfig, grid=None):
    from .cumulant import _cumulant_tau_grid, cumulant_correlator, cumulant_steady_state
    from .meanfield import sample_lorentzian_detunings
    from .regression import default_tau_grid

    det = sample_lorentzian_detunings(params.n_spins, cfg.disorder_over_f * params.f * params.gamma,
                                      cfg.seed)
    st = cumulant_steady_state(params, det + params.detuning)
    if grid is None:
        if cfg.eta_max == "auto":
            grid = _cumulant_tau_grid(params, float(np.real(st.first["z"].sum())),
                                      periods=cfg.fit_periods, samples=cfg.samples)
        else:
            grid = default_tau_grid(params, cfg.eta_max, cfg.samples)
    return cumulant_correlator(st, grid)


def _oracle_trace(params, cfg: RunConfig, grid=None):
    from . import oracle
    from .regression import CorrelatorTrace, default_tau_grid

    if grid is None:
        eta = 6.0 if cfg.eta_max == "auto" else cfg.eta_max
        grid = default_tau_grid(params, eta, cfg.samples)
    rho = oracle.oracle_steady(params)
    return CorrelatorTrace(grid, oracle.oracle_correlator(params, rho, grid), params)


def _trace(engine, params, cfg, grid=None):
    if engine == "exact":
        if grid is None:
            return _exact_trace(params, cfg)
        from .dynamics import steady_state
        from .liouvillian import build_liouvillian
        from .regression import correlator

        L = build_liouvillian(params)
        return correlator(L, steady_state(L), grid)
    if engine == "cumulant":
        return _cumulant_trace(params, cfg, grid)
    if engine == "oracle":
        return _oracle_trace(params, cfg, grid)
    raise ConfigError(f"run.engine: engine {engine!r} has no correlator")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------
def cmd_steady(cfg: RunConfig) -> int:
    run = Run(cfg, "steady")
    params = cfg.params()
    unit = params.f * params.gamma

    def cell(_):
        rec = {"engine": cfg.engine, "params": params.as_dict(), "rate_unit": "f*Gamma"}
        if cfg.engine in ("exact", "oracle"):
            from .dynamics import collective_expectations, steady_state, steady_state_residual
            from .liouvillian import build_liouvillian

            if cfg.engine == "exact":
                L = build_liouvillian(params)
                rho = steady_state(L)
                rec["residual"] = steady_state_residual(L, rho)
            else:
                from . import oracle

                rho = oracle.dense_to_sym(oracle.oracle_steady(params))
            e = collective_expectations(rho)
            n = params.n_spins
            rec.update(sz=e.sz, spsm=e.spsm, szsz=e.szsz, sp_re=e.sp.real, sp_im=e.sp.imag,
                       c0=e.spsm / n**2, z_q=float(np.sqrt(max(e.spsm, 0.0))) / n)
        elif cfg.engine == "cumulant":
            from .cumulant import cumulant_steady_state
            from .meanfield import sample_lorentzian_detunings

            det = sample_lorentzian_detunings(params.n_spins, cfg.disorder_over_f * unit, cfg.seed)
            st = cumulant_steady_state(params, det + params.detuning)
            n = params.n_spins
            spsm = st.collective_spsm()
            rec.update(sz=float(np.real(st.first["z"].sum())) / 2, spsm=spsm, c0=spsm / n**2,
                       z_q=float(np.sqrt(max(spsm, 0.0))) / n)
        else:
            from .meanfield import find_sync_solution

            sol = find_sync_solution(params)
            rec.update(z=sol.z, omega_mf=sol.omega_mf / unit, exists=sol.exists, s=sol.s)
        return rec

    (rec,) = run.map_cells(cell, [None], ["steady"])
    if rec is not None:
        run.path("steady.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
        print(json.dumps(rec, sort_keys=True))
    return run.finish()


def cmd_correlator(cfg: RunConfig) -> int:
    from .regression import write_correlator_csv
    from .spectral import fit_damped_cosine, fit_to_json

    run = Run(cfg, "correlator")
    params = cfg.params()
    unit = params.f * params.gamma

    def cell(_):
        tr = _trace(cfg.engine, params, cfg)
        other = _trace(cfg.compare, params, cfg, tr.tau_grid) if cfg.compare else None
        return tr, fit_damped_cosine(tr), other

    (res,) = run.map_cells(cell, [None], ["correlator"])
    if res is None:
        return run.finish()
    tr, fit, other = res
    write_correlator_csv(run.path("correlator.csv"), tr, {"engine": cfg.engine})
    run.path("fit.json").write_text(fit_to_json(fit, params.as_dict(), unit) + "\n")
    if other is not None:
        with open(run.path("correlator_compare.csv"), "w", newline="") as fh:
            _header(fh, cfg, {"engines": f"{cfg.engine} vs {cfg.compare}"})
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eta", f"re_C_{cfg.engine}", f"re_C_{cfg.compare}", "abs_deviation"])
            for e, a, b in zip(tr.eta_grid, tr.values, other.values):
                w.writerow([_f(e), _f(a.real), _f(b.real), _f(abs(a - b))])
    if cfg.report:
        from .report import plot_correlator

        extra = (cfg.compare, other.values) if other is not None else None
        plot_correlator(run.path("correlator.png"), tr.eta_grid, tr.values, cfg.engine, extra)
    print(fit_to_json(fit, None, unit))
    return run.finish()


def _stability_cell(args):
    n, gf, cfg = args
    from .spectral import fit_damped_cosine

    params = cfg.params(n_spins=n, g_over_f=gf)
    fit = fit_damped_cosine(_trace(cfg.engine, params, cfg))
    unit = params.f * params.gamma
    # rates in units of f Gamma
    from dataclasses import replace

    return replace(fit, omega=fit.omega / unit, bandwidth_b=fit.bandwidth_b / unit)


def cmd_stability_scan(cfg: RunConfig) -> int:
    from .spectral import stability_map, write_stability_csv

    run = Run(cfg, "stability-scan")
    ns = cfg.scan_n_spins or (cfg.n_spins,)
    gfs = cfg.scan_g_over_f or (cfg.g_over_f,)
    cells = [(n, gf, cfg) for n in ns for gf in gfs]
    labels = [f"N={n},g/f={gf!r}" for n, gf, _ in cells]
    fits = run.map_cells(_stability_cell, cells, labels)
    results = [(n, gf, fit, None if fit is not None else "failed")
               for (n, gf, _), fit in zip(cells, fits)]
    rows = stability_map(results)
    write_stability_csv(run.path("stability_map.csv"), rows,
                        {"engine": cfg.engine, "config_sha256": cfg.digest})
    if cfg.report:
        from .report import plot_stability

        plot_stability(run.path("stability_map.png"), rows)
    if not rows:
        log.error("empty scan")
        run.finish()
        return EXIT_NUMERIC
    return run.finish()


def _mi_cell(args):
    n, gf, cfg = args
    from .dynamics import coherent_x_state
    from .entropy import mutual_info_trace
    from .liouvillian import build_liouvillian

    params = cfg.params(n_spins=n, g_over_f=gf)
    L = build_liouvillian(params)
    res = mutual_info_trace(L, coherent_x_state(L.space), eta_probe=cfg.eta_probe, d_eta=cfg.d_eta)
    return res.growth_rate / (params.f * params.gamma)


def cmd_mi_scan(cfg: RunConfig) -> int:
    from .entropy import growth_law

    run = Run(cfg, "mi-scan")
    ns = cfg.scan_n_spins or (cfg.n_spins,)
    gfs = cfg.scan_g_over_f or (cfg.g_over_f,)
    cells = [(n, gf, cfg) for n in ns for gf in gfs]
    rates = run.map_cells(_mi_cell, cells, [f"N={n},g/f={gf!r}" for n, gf, _ in cells])
    rows = []
    for (n, gf, _), rate in zip(cells, rates):
        law = growth_law(n, gf, 1.0, 1.0, cfg.eta_probe)
        r = float("nan") if rate is None else rate
        rows.append((n, gf, r, 1.0 / r if r else float("inf"), law))
    with open(run.path("mi_scan.csv"), "w", newline="") as fh:
        _header(fh, cfg, {"eta_probe": cfg.eta_probe, "log": "natural"})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "g_over_f", "I_prime", "fGamma_over_I_prime", "law"])
        for row in rows:
            w.writerow([row[0]] + [_f(v) for v in row[1:]])
    if cfg.report:
        from .report import plot_mi

        plot_mi(run.path("mi_scan.png"), rows)
    return run.finish()


def _sync_cell(args):
    from .meanfield import find_sync_solution

    w, cfg = args
    return find_sync_solution(cfg.params(w_over_f=w).with_(detuning=0.0))


def _disorder_cell(args):
    from .meanfield import disorder_frequency_shift

    params, widths, seeds = args
    return disorder_frequency_shift(params, widths, seeds)


def cmd_meanfield(cfg: RunConfig) -> int:
    from .meanfield import sync_window, write_disorder_csv

    run = Run(cfg, "meanfield")
    params = cfg.params()
    unit = params.f * params.gamma
    n = params.n_spins
    ws = cfg.scan_w_over_f or tuple(float(v) for v in np.linspace(0.5, n + 1, 40))
    sols = run.map_cells(_sync_cell, [(w, cfg) for w in ws], [f"W/fGamma={w!r}" for w in ws])
    with open(run.path("sync_sweep.csv"), "w", newline="") as fh:
        _header(fh, cfg, {"n_spins": n})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["W_over_fGamma", "Z", "omega_over_fGamma", "exists"])
        for wf, sol in zip(ws, sols):
            if sol is None:
                w.writerow([_f(wf), "nan", "nan", "failed"])
            else:
                w.writerow([_f(wf), _f(sol.z), _f(sol.omega_mf / unit), int(sol.exists)])
    with open(run.path("sync_window.csv"), "w", newline="") as fh:
        _header(fh, cfg)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "W_min_over_fGamma", "W_max_over_fGamma", "has_window"])
        for nn in cfg.scan_n_spins or tuple(range(2, 21)):
            win = sync_window(nn)
            if win is None:
                w.writerow([nn, "nan", "nan", 0])
            else:
                w.writerow([nn, _f(win[0]), _f(win[1]), 1])
    if cfg.scan_delta_over_f:
        widths = [d * unit for d in cfg.scan_delta_over_f]
        (rows,) = run.map_cells(_disorder_cell, [(params, widths, cfg.seeds)], ["disorder"])
        if rows is not None:
            write_disorder_csv(run.path("disorder_shift.csv"), rows, unit)
    if cfg.report:
        from .report import plot_meanfield

        ok = [(wf, s) for wf, s in zip(ws, sols) if s is not None]
        plot_meanfield(run.path("sync_sweep.png"), [o[0] for o in ok], [o[1].z for o in ok],
                       [o[1].omega_mf / unit for o in ok])
    return run.finish()


def _fig3_cell(args):
    from .cumulant import fig3_sweep

    gf, dls, c = args
    return fig3_sweep(c.n_spins, (gf,), dls, c.seeds, c.f, c.gamma, c.samples)


def cmd_fig3(cfg: RunConfig) -> int:
    from .cumulant import write_fig3_csv

    run = Run(cfg, "fig3")
    gfs = cfg.scan_g_over_f or (cfg.g_over_f,)
    dls = cfg.scan_delta_over_f or (0.0, 0.05, 0.1)
    cells = [(gf, dls, cfg) for gf in gfs]
    out = run.map_cells(_fig3_cell, cells, [f"g/f={gf!r}" for gf in gfs])
    flat = [c for block in out if block is not None for c in block]
    for c in flat:
        if c.status != "ok":
            run.record(f"g/f={c.g_over_f!r},Delta={c.delta_over_f!r}", c.status, 0.0)
    write_fig3_csv(run.path("fig3.csv"), flat)
    if cfg.report and flat:
        from .report import plot_fig3

        plot_fig3(run.path("fig3.png"), flat)
    return run.finish()


def cmd_validate(cfg: RunConfig | None = None) -> int:
    """Cross-check the symmetric, cumulant and mean-field engines against the oracle."""
    from .validate import run_validation

    ok = run_validation(print)
    return EXIT_OK if ok else EXIT_VALIDATION


COMMANDS = {
    "steady": cmd_steady,
    "correlator": cmd_correlator,
    "stability-scan": cmd_stability_scan,
    "mi-scan": cmd_mi_scan,
    "meanfield": cmd_meanfield,
    "fig3": cmd_fig3,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dtcsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--report", action="store_true", help="also render PNG figures")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", nargs="?", help="INI configuration file")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config is None:
            if args.command != "validate":
                raise ConfigError("<file>: a configuration file is required")
            cfg = parse_config("")
        else:
            cfg = load_config(args.config)
        if args.report:
            from dataclasses import replace

            cfg = replace(cfg, report=True)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return COMMANDS[args.command](cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
