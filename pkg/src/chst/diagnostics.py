"""Measurements on completed paths: energy residuals, interior smoothing
probes, self-convergence studies and ensemble statistics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .elliptic import neumann_map
from .fields import BoundaryField, VelocityField, advection, curl, inner, norm_L2
from .grid import Grid
from .linear import LinearPath, ou_mode0_exact_variance, simulate_w
from .nonlinear import NonlinearPath, solve_split
from .parallel import ordered_map

__all__ = [
    "Metric",
    "DiagnosticReport",
    "successive_rates",
    "fitted_order",
    "nested_substeps",
    "energy_residuals",
    "energy_rate_study",
    "interior_heat_residual",
    "heat_residual_refinement",
    "vorticity_transport_residual",
    "transport_refinement",
    "restrict_velocity",
    "convergence_study",
    "ensemble_stats",
]


@dataclass
class Metric:
    name: str
    value: float
    unit: str = ""
    at: str = ""


@dataclass
class DiagnosticReport:
    """Named metrics, refinement tables, verdicts and provenance."""

    name: str
    metrics: Dict[str, Metric] = field(default_factory=dict)
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    verdicts: Dict[str, Tuple[bool, str]] = field(default_factory=dict)
    provenance: Dict[str, str] = field(default_factory=dict)

    def add(self, name: str, value: float, unit: str = "", at: str = "") -> None:
        self.metrics[name] = Metric(name, float(value), unit, at)

    def value(self, name: str) -> float:
        return self.metrics[name].value

    def row(self, table: str, **values) -> None:
        self.tables.setdefault(table, []).append(values)

    def verdict(self, name: str, ok: bool, detail: str = "") -> bool:
        self.verdicts[name] = (bool(ok), detail)
        return bool(ok)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "metrics": {k: vars(m) for k, m in self.metrics.items()},
            "tables": self.tables,
            "verdicts": {k: {"pass": ok, "detail": d} for k, (ok, d) in self.verdicts.items()},
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["name", "value", "unit", "at"])
        for m in self.metrics.values():
            w.writerow([m.name, repr(m.value), m.unit, m.at])
        return buf.getvalue()

    def table_csv(self, table: str) -> str:
        rows = self.tables[table]
        cols: List[str] = []
        for r in rows:
            cols.extend(c for c in r if c not in cols)
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(cols)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in cols])
        return buf.getvalue()


def _cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _at(grid: Grid, dt: Optional[float] = None) -> str:
    s = f"N_x={grid.n_x} N_z={grid.n_z} a={grid.a!r}"
    return s + (f" dt={dt!r}" if dt is not None else "")


def _provenance(cfg: Optional[RunConfig]) -> Dict[str, str]:
    out = {"version": __version__}
    if cfg is not None:
        out.update(config_hash=cfg.digest(), seed=str(cfg.seed))
    return out


def successive_rates(errors: Sequence[float], factor: float = 2.0) -> List[float]:
    """log_factor(e_i / e_{i+1}) for successive entries; nan when undefined."""
    e = np.asarray(errors, float)
    out = []
    for a, b in zip(e[:-1], e[1:]):
        out.append(float(np.log(a / b) / np.log(factor)) if a > 0 and b > 0 else float("nan"))
    return out


def fitted_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    h, e = np.asarray(h, float), np.asarray(errors, float)
    if len(h) < 2 or np.any(e <= 0):
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def nested_substeps(dts: Sequence[float]) -> List[int]:
    """Substep counts that put every dt on the finest noise grid."""
    fine = min(dts)
    out = []
    for dt in dts:
        r = int(round(dt / fine))
        if abs(r * fine - dt) > 1e-9 * dt:
            raise ValueError("time steps must be integer multiples of the finest one")
        out.append(r)
    return out


# --- energy identity -------------------------------------------------------


def energy_residuals(path: NonlinearPath, refinements: Sequence[NonlinearPath] = ()) -> DiagnosticReport:
    """Residual series of the discrete energy identity.

    With ``refinements`` (the same run at successively halved dt) the
    dt-halving rates of |R_N| are added.
    """
    if path.ledger is None:
        raise ValueError("path carries no energy ledger")
    rep = DiagnosticReport("energy_residuals", provenance=_provenance(None))
    grid = path.snapshots[0].grid
    res = np.abs(path.residual)
    rep.add("R_final", res[-1], "energy", _at(grid, path.dt))
    rep.add("R_max", res.max(), "energy", _at(grid, path.dt))
    rep.add("cubic_max", float(np.max(np.abs(path.ledger.cubic))), "energy", _at(grid, path.dt))
    rep.row("residual_series", t=0.0, R=float(path.residual[0]))
    for n in range(1, len(res)):
        rep.row("residual_series", t=n * path.dt, R=float(path.residual[n]))
    if refinements:
        all_paths = [path, *refinements]
        finals = [abs(p.residual[-1]) for p in all_paths]
        rates = successive_rates(finals, path.dt / refinements[0].dt)
        for p, r, rate in zip(all_paths, finals, [float("nan"), *rates]):
            rep.row("refinement", dt=p.dt, R_final=float(r), rate=rate)
        for i, rate in enumerate(rates):
            rep.add(f"rate_{i}", rate, "", f"dt={all_paths[i].dt!r}->{all_paths[i + 1].dt!r}")
    return rep


def energy_rate_study(
    u0: VelocityField,
    model,
    T: float,
    dts: Sequence[float] = (2e-3, 1e-3, 5e-4),
    nu: float = 1.0,
    path_index: int = 0,
) -> DiagnosticReport:
    """Energy residual at several dt on one noise record, with rates."""
    subs = nested_substeps(dts)
    paths = [solve_split(u0, model, T, dt, nu, path_index, s, direct=False)[1] for dt, s in zip(dts, subs)]
    return energy_residuals(paths[0], paths[1:])


# --- interior probes -------------------------------------------------------


def _window_rows(grid: Grid, window: Tuple[float, float], margin: int) -> np.ndarray:
    lo, hi = window
    if not (0 < lo < hi < grid.a):
        raise ValueError(f"window ({lo}, {hi}) must lie strictly inside (0, {grid.a})")
    z = grid.z_nodes
    rows = np.nonzero((z >= lo - 1e-12) & (z <= hi + 1e-12))[0]
    if rows.size == 0:
        raise ValueError("window contains no grid nodes")
    if rows[0] - margin < 1 or rows[-1] + margin > grid.n_z - 1:
        raise ValueError("window is too close to a wall for the stencil")
    return rows


def _window_norm(vals: np.ndarray, rows: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(2 * np.pi * grid.dz * np.sum(np.abs(vals[:, rows]) ** 2)))


def _lap2(om: np.ndarray, rows: np.ndarray, grid: Grid) -> np.ndarray:
    k2 = grid.k2[:, None]
    s = 1.0 / grid.dz ** 2
    return s * (om[:, rows + 1] - 2 * om[:, rows] + om[:, rows - 1]) - k2 * om[:, rows]


def _lap4(om: np.ndarray, rows: np.ndarray, grid: Grid) -> np.ndarray:
    k2 = grid.k2[:, None]
    s = 1.0 / (12 * grid.dz ** 2)
    zz = -om[:, rows + 2] + 16 * om[:, rows + 1] - 30 * om[:, rows] + 16 * om[:, rows - 1] - om[:, rows - 2]
    return s * zz - k2 * om[:, rows]


def _high_fraction(om: np.ndarray, rows, grid: Grid) -> Tuple[float, float]:
    e = np.sum(np.abs(om[:, rows]) ** 2, axis=1)
    high = np.abs(grid.k) > grid.n_x / 4
    return float(np.sum(e[high])), float(np.sum(e))


def _consecutive(times: Sequence[float], dt: float, t1: float, t2: float) -> List[int]:
    """Indices n with t_{n+1} in [t1, t2] and t_{n+1} - t_n = dt."""
    times = np.asarray(times)
    idx = []
    for n in range(len(times) - 1):
        if t1 - 1e-12 <= times[n + 1] <= t2 + 1e-12 and abs(times[n + 1] - times[n] - dt) < 1e-9 * dt:
            idx.append(n)
    if not idx:
        raise ValueError(f"no consecutive snapshot pairs with t in [{t1}, {t2}]")
    return idx


def interior_heat_residual(
    w_path: LinearPath,
    window: Tuple[float, float] = (0.25, 0.75),
    t1: float = 0.1,
    t2: Optional[float] = None,
    nu: float = 1.0,
) -> DiagnosticReport:
    """Windowed heat-equation residual of the vorticity of w.

    ``scheme_residual`` uses the solver's own second-order Laplacian and
    vanishes to round-off in the interior.  ``reference_residual`` uses a
    fourth-order z-stencil and measures the consistency of the discrete
    vorticity with the continuum heat equation; it decreases under grid
    refinement.  ``spectral_contrast`` is the high-|k| (|k| > N_x/4)
    energy fraction of the vorticity in the window divided by that over
    the whole domain, averaged over the same steps.
    """
    grid = w_path.grid
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    t2 = w_path.times[-1] if t2 is None else t2
    rows = _window_rows(grid, window, 2)
    dt = w_path.dt
    steps = _consecutive(w_path.times, dt, t1, t2)
    oms = {}

    def om(n):
        if n not in oms:
            oms[n] = curl(w_path.snapshots[n]).values
        return oms[n]

    r2, r4, fw, fa = [], [], [], []
    for n in steps:
        a, b = om(n), om(n + 1)
        dtom = (b - a) / dt
        r2.append(_window_norm(dtom[:, rows] - nu * _lap2(b, rows, grid), np.arange(rows.size), grid))
        r4.append(_window_norm(dtom[:, rows] - nu * _lap4(b, rows, grid), np.arange(rows.size), grid))
        hw, ew = _high_fraction(b, rows, grid)
        ha, ea = _high_fraction(b, slice(None), grid)
        fw.append(hw / ew if ew > 0 else 0.0)
        fa.append(ha / ea if ea > 0 else 0.0)
        oms.pop(n, None)
    rep = DiagnosticReport("interior_heat_residual", provenance=_provenance(None))
    at = _at(grid, dt)
    rep.add("scheme_residual", np.mean(r2), "vorticity/time", at)
    rep.add("reference_residual", np.mean(r4), "vorticity/time", at)
    frac_w, frac_a = float(np.mean(fw)), float(np.mean(fa))
    rep.add("high_fraction_window", frac_w, "", at)
    rep.add("high_fraction_domain", frac_a, "", at)
    rep.add("spectral_contrast", frac_w / frac_a if frac_a > 0 else 0.0, "", at)
    return rep


def heat_residual_refinement(
    model,
    n_x: int,
    n_zs: Sequence[int],
    T: float,
    dt: float,
    window: Tuple[float, float] = (0.25, 0.75),
    t1: float = 0.1,
    a: float = 1.0,
    nu: float = 1.0,
    path_index: int = 0,
    contrast_threshold: float = 0.1,
) -> DiagnosticReport:
    """Interior heat residual over a sequence of N_z on one noise record."""
    rep = DiagnosticReport("heat_residual_refinement", provenance=_provenance(None))
    ref, dzs, contrasts = [], [], []
    for n_z in n_zs:
        grid = Grid(n_x, n_z, a)
        path = simulate_w(model, grid, T, dt, nu, path_index, record_from=t1 - dt)
        r = interior_heat_residual(path, window, t1, T, nu)
        ref.append(r.value("reference_residual"))
        dzs.append(grid.dz)
        contrasts.append(r.value("spectral_contrast"))
        rep.row(
            "refinement",
            N_z=n_z,
            scheme_residual=r.value("scheme_residual"),
            reference_residual=ref[-1],
            spectral_contrast=contrasts[-1],
        )
    order = fitted_order(dzs, ref)
    rep.add("order", order, "", f"N_z={list(n_zs)}")
    rep.add("spectral_contrast", max(contrasts), "", f"t>={t1}")
    rep.verdict("order>=1", order >= 1.0, f"order={order:.3f}")
    rep.verdict(
        f"contrast<{contrast_threshold}",
        max(contrasts) < contrast_threshold,
        f"contrast={max(contrasts):.3e}",
    )
    return rep


def vorticity_transport_residual(
    v_path: NonlinearPath,
    w_path: LinearPath,
    window: Tuple[float, float] = (0.25, 0.75),
    t1: float = 0.1,
    t2: Optional[float] = None,
    nu: float = 1.0,
) -> DiagnosticReport:
    """Windowed residual of the vorticity equation of v.

    With U = v + w all evaluated at the new level,

        (om_{n+1} - om_n) / dt - nu Lap om_{n+1} + curl B(U, U),

    where curl B(U, U) contains the advection of om by v and the
    divergence of the curls of the products involving w.  The residual
    is first order in dt.
    """
    grid = v_path.snapshots[0].grid
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    if len(v_path.snapshots) != len(w_path.snapshots):
        raise ValueError("v and w paths must be recorded at the same levels")
    t2 = v_path.times[-1] if t2 is None else t2
    rows = _window_rows(grid, window, 1)
    dt = v_path.dt
    steps = _consecutive(v_path.times, dt, t1, t2)
    vals = []
    for n in steps:
        a = curl(v_path.snapshots[n]).values
        v1 = v_path.snapshots[n + 1]
        b = curl(v1).values
        U = v1 + w_path.snapshots[n + 1]
        nl = curl(advection(U, U)).values
        r = (b - a)[:, rows] / dt - nu * _lap2(b, rows, grid) + nl[:, rows]
        vals.append(_window_norm(r, np.arange(rows.size), grid))
    rep = DiagnosticReport("vorticity_transport_residual", provenance=_provenance(None))
    rep.add("residual", np.mean(vals), "vorticity/time", _at(grid, dt))
    return rep


def transport_refinement(
    u0: VelocityField,
    model,
    T: float,
    dts: Sequence[float],
    window: Tuple[float, float] = (0.25, 0.75),
    t1: float = 0.1,
    nu: float = 1.0,
    path_index: int = 0,
) -> DiagnosticReport:
    """Vorticity transport residual over a dt sweep on one noise record."""
    rep = DiagnosticReport("transport_refinement", provenance=_provenance(None))
    subs = nested_substeps(dts)
    res = []
    for dt, s in zip(dts, subs):
        lin, nl, _ = solve_split(u0, model, T, dt, nu, path_index, s, direct=False)
        r = vorticity_transport_residual(nl, lin, window, t1, T, nu).value("residual")
        res.append(r)
        rep.row("refinement", dt=dt, residual=r)
    order = fitted_order(dts, res)
    rep.add("order", order, "", f"dt={list(dts)}")
    return rep


# --- self-convergence ------------------------------------------------------


def restrict_velocity(fine: VelocityField, coarse: Grid) -> VelocityField:
    """Restrict a field from a grid refined by an integer factor r in z.

    Nodes coincide (every r-th fine node); a coarse center takes the mean of
    the two fine centers nearest to it (the middle one when r is odd).
    x-coefficients are truncated or zero-padded.
    """
    fg = fine.grid
    r = fg.n_z // coarse.n_z
    if r * coarse.n_z != fg.n_z or abs(fg.a - coarse.a) > 1e-14:
        raise ValueError("fine grid must refine the coarse one by an integer factor in z")
    j = np.arange(coarse.n_z)
    if r % 2:
        c1 = fine.u1[:, r * j + r // 2]
    else:
        c1 = 0.5 * (fine.u1[:, r * j + r // 2 - 1] + fine.u1[:, r * j + r // 2])
    c2 = fine.u2[:, r * np.arange(coarse.n_z + 1)]

    def resample(c):
        out = np.zeros((coarse.n_x, c.shape[1]), complex)
        m = min(coarse.n_x, fg.n_x) // 2
        out[:m] = c[:m]
        out[-m + 1 :] = c[-m + 1 :]
        return out

    return VelocityField(resample(c1), resample(c2), coarse, fine.t)


def _neumann_levels(cfg: RunConfig, rep: DiagnosticReport) -> None:
    sols = []
    for i in range(cfg.levels):
        g = Grid(cfg.n_x, cfg.n_z * 2 ** i, cfg.a)
        sols.append(neumann_map(BoundaryField.cosine(g.n_x, 1), g, cfg.nu)[0])
    gaps = [norm_L2(sols[i] - restrict_velocity(sols[i + 1], sols[i].grid)) for i in range(cfg.levels - 1)]
    _gap_table(rep, "N_z", [s.grid.n_z for s in sols], gaps, "neumann_map_L2_gap")


def _dt_levels(cfg: RunConfig, rep: DiagnosticReport) -> None:
    dts = [cfg.dt / 2 ** i for i in range(cfg.levels)]
    subs = [2 ** (cfg.levels - 1 - i) * cfg.substeps for i in range(cfg.levels)]
    u0 = cfg.initial_condition()
    finals = []
    for dt, s in zip(dts, subs):
        lin, nl, _ = solve_split(u0, cfg.model, cfg.T, dt, cfg.nu, 0, s, direct=False)
        finals.append(nl.final + lin.final)
    gaps = [norm_L2(finals[i] - finals[i + 1]) for i in range(cfg.levels - 1)]
    _gap_table(rep, "dt", dts, gaps, "final_u_L2_gap")


def _scalar_levels(cfg: RunConfig, rep: DiagnosticReport, axis: str) -> None:
    params, metric = [], []
    for i in range(cfg.levels):
        n_x, J = cfg.n_x, cfg.J
        if axis == "N_x":
            n_x = cfg.n_x * 2 ** i
        else:
            J = cfg.J * 2 ** i
            if J >= n_x:
                raise ConfigError([f"diagnostics.levels: J={J} at level {i} is not resolved on N_x={n_x}"])
        grid = Grid(n_x, cfg.n_z, cfg.a)
        model = cfg.model.with_(J=J)
        path = simulate_w(model, grid, cfg.T, cfg.dt, cfg.nu, 0, cfg.substeps, stride=10 ** 9)
        params.append(n_x if axis == "N_x" else J)
        metric.append(path.sup_L2)
    gaps = [abs(metric[i] - metric[i + 1]) for i in range(cfg.levels - 1)]
    for p, m in zip(params, metric):
        rep.row("levels", **{axis: p, "sup_L2_w": m})
    _gap_table(rep, axis, params, gaps, "sup_L2_w_gap")


def _gap_table(rep: DiagnosticReport, axis: str, params, gaps, metric: str) -> None:
    ratio = params[0] / params[1]
    ratio = ratio if ratio > 1 else 1 / ratio
    rates = successive_rates(gaps, ratio)
    for i, gap in enumerate(gaps):
        rep.row("convergence", axis=axis, level=params[i], metric=metric, gap=gap, rate=rates[i - 1] if i else float("nan"))
    for i, rate in enumerate(rates):
        rep.add(f"rate_{i}", rate, "", f"{axis}={params[i]}->{params[i + 2]}")
    rep.add("gap_last", gaps[-1], metric, f"{axis}={params[-1]}")


def convergence_study(
    cfg: RunConfig, axis: Optional[str] = None, levels: Optional[int] = None
) -> DiagnosticReport:
    """Self-convergence over ``levels`` successive refinements of one axis.

    dt: L2 gap of u(T) between successive dt (fixed noise record).
    N_z: L2 gap of the Neumann map of cos(x) between successive N_z.
    N_x, J: gap of sup_t |w|_{L2} between successive levels.
    """
    axis = cfg.axis if axis is None else axis
    levels = cfg.levels if levels is None else levels
    cfg = cfg.with_(axis=axis, levels=levels)
    rep = DiagnosticReport(f"convergence_{axis}", provenance=_provenance(cfg))
    if axis == "dt":
        _dt_levels(cfg, rep)
    elif axis == "N_z":
        _neumann_levels(cfg, rep)
    else:
        _scalar_levels(cfg, rep, axis)
    return rep


# --- ensembles -------------------------------------------------------------


def _ensemble_path(i: int, cfg: RunConfig, j_star: int) -> Tuple[float, float, float, float]:
    u0 = cfg.initial_condition()
    lin, nl, _ = solve_split(u0, cfg.model, cfg.T, cfg.dt, cfg.nu, i, cfg.substeps, stride=10 ** 9)
    w, u = lin.final, nl.u_final
    return inner(w, w), inner(u, u), nl.int_L4_u, float(w.u1[0, j_star].real)


def ensemble_stats(
    cfg: RunConfig, n_paths: Optional[int] = None, workers: Optional[int] = None, z_star: Optional[float] = None
) -> DiagnosticReport:
    """Means and variances over independent paths, with the k = 0 variance
    oracle for the horizontal velocity of w at height ``z_star``."""
    n = cfg.n_paths if n_paths is None else n_paths
    if n < 2:
        raise ValueError("ensemble needs at least two paths")
    grid = cfg.grid
    z_star = 0.5 * cfg.a if z_star is None else z_star
    j = int(np.argmin(np.abs(grid.z_centers - z_star)))
    fn = partial(_ensemble_path, cfg=cfg, j_star=j)
    data = np.asarray(ordered_map(fn, range(n), workers))
    rep = DiagnosticReport("ensemble", provenance=_provenance(cfg))
    at = _at(grid, cfg.dt) + f" paths={n}"
    for col, name in enumerate(["w_T_L2sq", "u_T_L2sq", "int_u_L4_4"]):
        x = data[:, col]
        rep.add(f"{name}_mean", x.mean(), "", at)
        rep.add(f"{name}_var", x.var(ddof=1), "", at)
        rep.add(f"{name}_se", np.sqrt(x.var(ddof=1) / n), "", at)
    x2 = data[:, 3] ** 2
    exact = ou_mode0_exact_variance(cfg.model, grid, cfg.T, cfg.dt, z_star, cfg.nu)
    se = float(np.sqrt(x2.var(ddof=1) / n))
    rep.add("ou_exact_variance", exact, "", f"z={grid.z_centers[j]!r}")
    rep.add("ou_mc_variance", x2.mean(), "", at)
    rep.add("ou_se", se, "", at)
    z = (x2.mean() - exact) / se if se > 0 else 0.0
    rep.add("ou_z_score", z, "", at)
    rep.verdict("ou_within_3se", abs(z) <= 3.0, f"z={z:.3f}")
    return rep
