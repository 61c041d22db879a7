"""Command-line entry point: ``chst <subcommand> --config run.cfg``.

Exit codes: 0 success, 2 validation failure, 3 numerical blow-up.
Every output directory receives ``config.cfg`` (the exact configuration
used, in canonical form) and ``run.json`` (config hash, seed, version).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import (
    DiagnosticReport,
    convergence_study,
    energy_residuals,
    ensemble_stats,
    interior_heat_residual,
    vorticity_transport_residual,
)
from .elliptic import neumann_map
from .fields import BoundaryField, inner, norm_L2
from .linear import BlowUpError, simulate_w
from .nonlinear import NonContractionError, march_u, march_v, picard_adaptive, solve_split
from .snapshot import SnapshotFormatError, read_snapshot, write_snapshot

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_INVALID", "EXIT_BLOWUP"]

EXIT_OK, EXIT_INVALID, EXIT_BLOWUP = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError([f"usage: {message}"])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chst", description="Stochastic channel Navier-Stokes with boundary noise.")
    p.add_argument("--version", action="version", version=f"chst {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="run configuration file")
        sp.add_argument("--out", help="output directory (overrides output.directory)")

    sp = sub.add_parser("simulate", help="split run: w, v and u = v + w")
    common(sp)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--linear-only", action="store_true", help="only the linear part w")
    mode.add_argument("--direct", action="store_true", help="only the direct march for u")

    sp = sub.add_parser("neumann", help="apply the Neumann map to boundary data")
    common(sp, config_required=False)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", help="constant:C or cosine:K[:AMP]")
    src.add_argument("--file", help="boundary-field snapshot")

    sp = sub.add_parser("picard", help="Picard iteration on [0, T_bar]")
    common(sp)

    sp = sub.add_parser("diagnose", help="energy and interior residuals")
    common(sp)

    sp = sub.add_parser("converge", help="self-convergence study")
    common(sp)
    sp.add_argument("--axis", choices=["dt", "N_z", "N_x", "J"])
    sp.add_argument("--levels", type=int)

    sp = sub.add_parser("ensemble", help="statistics over independent paths")
    common(sp)
    sp.add_argument("--paths", type=int)
    sp.add_argument("--workers", type=int)
    return p


# --- output helpers ----------------------------------------------------------


def _prepare(cfg: RunConfig, out: Optional[str]) -> str:
    d = out or cfg.directory
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "config.cfg"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_text())
    meta = {"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__}
    with open(os.path.join(d, "run.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return d


def _write_text(d: str, name: str, text: str) -> None:
    with open(os.path.join(d, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_rows(d: str, name: str, header: Sequence[str], rows) -> None:
    with open(os.path.join(d, name), "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _write_report(d: str, rep: DiagnosticReport, stem: str) -> None:
    _write_text(d, f"{stem}.csv", rep.metrics_csv())
    for t in rep.tables:
        _write_text(d, f"{stem}_{t}.csv", rep.table_csv(t))
    _write_text(d, f"{stem}.json", rep.to_json() + "\n")


def _snap(d: str, prefix: str, n: int, f) -> None:
    write_snapshot(f, os.path.join(d, f"{prefix}_{n:06d}.chst"))


# --- subcommands ---------------------------------------------------------------


def _simulate(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    grid, model = cfg.grid, cfg.model
    if args.linear_only:
        path = simulate_w(model, grid, cfg.T, cfg.dt, cfg.nu, 0, cfg.substeps, cfg.stride)
        rows = []
        for i, (t, w) in enumerate(zip(path.times, path.snapshots)):
            _snap(d, "w", i * cfg.stride, w)
            rows.append((t, inner(w, w)))
        _write_rows(d, "series.csv", ["t", "w_L2sq"], rows)
        return EXIT_OK
    u0 = cfg.initial_condition()
    if args.direct:
        path = march_u(u0, model, cfg.T, cfg.dt, cfg.nu, 0, cfg.substeps, cfg.stride)
        rows = []
        for i, (t, u) in enumerate(zip(path.times, path.u_snapshots)):
            _snap(d, "u", i * cfg.stride, u)
            rows.append((t, inner(u, u)))
        _write_rows(d, "series.csv", ["t", "u_L2sq"], rows)
        return EXIT_OK
    lin, nl, gap = solve_split(u0, model, cfg.T, cfg.dt, cfg.nu, 0, cfg.substeps, cfg.stride)
    rows = []
    for i, t in enumerate(nl.times):
        n = i * cfg.stride
        w, v, u = lin.snapshots[i], nl.snapshots[i], nl.u_snapshots[i]
        for prefix, f in (("w", w), ("v", v), ("u", u)):
            _snap(d, prefix, n, f)
        rows.append((t, inner(w, w), inner(v, v), inner(u, u), float(nl.residual[n])))
    _write_rows(d, "series.csv", ["t", "w_L2sq", "v_L2sq", "u_L2sq", "energy_residual"], rows)
    _write_rows(d, "summary.csv", ["metric", "value"], [("split_gap", gap), ("sup_L2_v", nl.sup_L2), ("sup_L2_w", lin.sup_L2)])
    return EXIT_OK


def _parse_preset(spec: str, n_x: int) -> BoundaryField:
    parts = spec.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return BoundaryField.constant(n_x, float(parts[1]))
        if parts[0] == "cosine" and len(parts) in (2, 3):
            k = int(parts[1])
            amp = float(parts[2]) if len(parts) == 3 else 1.0
            if not 0 <= k < n_x // 2:
                raise ValueError
            return BoundaryField.cosine(n_x, k, amp)
    except ValueError:
        pass
    raise ConfigError([f"--preset: expected constant:C or cosine:K[:AMP], got {spec!r}"])


def _neumann(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    grid = cfg.grid
    if args.preset:
        g = _parse_preset(args.preset, grid.n_x)
    else:
        g = read_snapshot(args.file)
        if not isinstance(g, BoundaryField) or g.n_x != grid.n_x:
            raise ConfigError([f"--file: {args.file} does not hold boundary data with N_x={grid.n_x}"])
    u, p = neumann_map(g, grid, cfg.nu)
    write_snapshot(u, os.path.join(d, "neumann_u.chst"))
    write_snapshot(p, os.path.join(d, "neumann_p.chst"))
    _write_rows(d, "summary.csv", ["metric", "value"], [("L2sq", inner(u, u))])
    return EXIT_OK


def _picard(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    T_bar = min(cfg.T_bar, cfg.T)
    lin = simulate_w(cfg.model, cfg.grid, T_bar, cfg.dt, cfg.nu, 0, cfg.substeps)
    u0 = cfg.initial_condition()
    res = picard_adaptive(u0, lin.snapshots, cfg.dt, T_bar, cfg.picard_tol, cfg.picard_max_iter, cfg.nu)
    ratios = [float("nan"), *res.ratios]
    _write_rows(
        d, "picard.csv", ["iteration", "difference", "ratio"],
        [(i + 1, dd, r) for i, (dd, r) in enumerate(zip(res.differences, ratios))],
    )
    n = len(res.path.snapshots) - 1
    march = march_v(u0, lin.snapshots[: n + 1], cfg.dt, cfg.nu, ledger=False)
    gap = norm_L2(march.final - res.path.final)
    _write_rows(
        d, "summary.csv", ["metric", "value"],
        [("T_bar", res.T_bar), ("iterations", res.iterations), ("halvings", res.halvings), ("march_gap", gap)],
    )
    write_snapshot(res.path.final, os.path.join(d, "picard_final.chst"))
    return EXIT_OK


def _diagnose(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    T = min(cfg.T, cfg.t2)
    lo, hi = cfg.window
    lin, nl, gap = solve_split(cfg.initial_condition(), cfg.model, T, cfg.dt, cfg.nu, 0, cfg.substeps, 1, direct=False)
    _write_report(d, energy_residuals(nl), "energy")
    if cfg.t1 < T:
        _write_report(d, interior_heat_residual(lin, (lo, hi), cfg.t1, T, cfg.nu), "heat")
        _write_report(d, vorticity_transport_residual(nl, lin, (lo, hi), cfg.t1, T, cfg.nu), "transport")
    return EXIT_OK


def _converge(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    rep = convergence_study(cfg, args.axis, args.levels)
    _write_report(d, rep, "convergence")
    return EXIT_OK


def _ensemble(cfg: RunConfig, args) -> int:
    d = _prepare(cfg, args.out)
    rep = ensemble_stats(cfg, args.paths, args.workers)
    _write_report(d, rep, "ensemble")
    return EXIT_OK


_COMMANDS = {
    "simulate": _simulate,
    "neumann": _neumann,
    "picard": _picard,
    "diagnose": _diagnose,
    "converge": _converge,
    "ensemble": _ensemble,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Dispatch a command line; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config) if args.config else parse_config("")
        if getattr(args, "levels", None) is not None and args.levels < 3:
            raise ConfigError([f"--levels: must be >= 3, got {args.levels}"])
        if getattr(args, "paths", None) is not None and args.paths < 2:
            raise ConfigError([f"--paths: must be >= 2, got {args.paths}"])
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, SnapshotFormatError) as exc:
        print(f"chst: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BlowUpError, NonContractionError) as exc:
        print(f"chst: numerical failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, OSError) as exc:
        print(f"chst: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
