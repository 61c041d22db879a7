"""Acceptance criteria, one test each.  Every test prints a PASS/FAIL line;
the lines are also repeated in the terminal summary."""

import filecmp
import os

import numpy as np
import pytest

from chst.cli import main
from chst.diagnostics import energy_rate_study, fitted_order, heat_residual_refinement, restrict_velocity
from chst.elliptic import helmholtz_project, neumann_map, stokes_operator
from chst.fields import (
    BoundaryField,
    besov_boundary_norm,
    divergence,
    inner,
    norm_H1,
    norm_L2,
    random_velocity,
    trilinear_b,
)
from chst.grid import Grid
from chst.initial import single_mode
from chst.linear import ou_mode0_oracle, simulate_w
from chst.noise import BoundaryNoiseModel
from chst.nonlinear import perturbation_family, march_v, picard_adaptive, solve_split

from conftest import ACCEPTANCE_LINES

DESK = Grid(64, 64, 1.0)


def record(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_c01_oddity(rng):
    worst = 0.0
    for _ in range(100):
        u = helmholtz_project(random_velocity(DESK, rng))
        v, w = random_velocity(DESK, rng), random_velocity(DESK, rng)
        scale = norm_L2(u) * norm_H1(v) * norm_H1(w)
        worst = max(worst, abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) / scale)
    record(1, "trilinear oddity", worst <= 1e-12, f"max relative |b(u,v,w)+b(u,w,v)| = {worst:.2e} (tol 1e-12)")


def test_c02_projection(rng):
    idem = orth = div = 0.0
    for _ in range(100):
        f = random_velocity(DESK, rng)
        pf = helmholtz_project(f)
        nf = norm_L2(f)
        idem = max(idem, norm_L2(helmholtz_project(pf) - pf) / nf)
        orth = max(orth, abs(inner(f - pf, pf)) / nf ** 2)
        dv = divergence(pf).values
        div = max(div, np.sqrt(2 * np.pi * DESK.dz * np.sum(np.abs(dv) ** 2)) / nf)
    ok = max(idem, orth, div) <= 1e-10
    record(2, "Helmholtz projection", ok, f"idempotence {idem:.2e}, orthogonality {orth:.2e}, divergence {div:.2e} (tol 1e-10)")


def test_c03_neumann_map():
    exact_err = 0.0
    for c in (1.0, -2.5):
        u, _ = neumann_map(BoundaryField.constant(DESK.n_x, c), DESK)
        exact_err = max(exact_err, np.max(np.abs(u.u1[0] - c * DESK.z_centers)), np.max(np.abs(u.u2)))
        exact_err = max(exact_err, np.max(np.abs(np.delete(u.u1, 0, axis=0))))
    orders = {}
    for k in (1, 4):
        errs, hs = [], []
        for n_z in (16, 32, 64):
            g, ref = Grid(16, n_z), Grid(16, 4 * n_z)
            b = BoundaryField.cosine(16, k)
            u = neumann_map(b, g)[0]
            errs.append(norm_L2(u - restrict_velocity(neumann_map(b, ref)[0], g)))
            hs.append(g.dz)
        orders[k] = [fitted_order(hs[i:i + 2], errs[i:i + 2]) for i in range(2)]
    all_orders = [o for v in orders.values() for o in v]
    ok = exact_err <= 1e-12 and all(abs(o - 2.0) <= 0.2 for o in all_orders)
    detail = f"N(c) error {exact_err:.2e} (tol 1e-12); orders " + ", ".join(
        f"k={k}: {o[0]:.3f}/{o[1]:.3f}" for k, o in orders.items()
    ) + " (target 2 +- 0.2)"
    record(3, "Neumann map", ok, detail)


def test_c04_elliptic_bound():
    g = Grid(128, 128)
    ratios = []
    for k in range(1, 33):
        b = BoundaryField.cosine(g.n_x, k)
        ratios.append(norm_H1(neumann_map(b, g)[0]) / besov_boundary_norm(b, -0.5, 2.0))
    spread = max(ratios) / min(ratios)
    record(4, "elliptic estimate", spread <= 4.0, f"max/min of H1 / B^(-1/2)_(2,2) over k=1..32 = {spread:.3f} (tol 4)")


def test_c05_ou_oracle():
    model = BoundaryNoiseModel(J=3, sigma0=0.1, beta=1.0, seed=2024)
    exact, mc, se = ou_mode0_oracle(model, Grid(4, 32), 0.5, 0.01, 0.75, n_paths=1000)
    z = (mc - exact) / se
    record(5, "OU oracle", abs(z) <= 3.0, f"exact {exact:.5e}, Monte Carlo {mc:.5e}, {z:+.2f} SE over 1000 paths (tol 3 SE)")


def test_c06_energy_identity():
    g = Grid(32, 32)
    rep = energy_rate_study(single_mode(g, 1, 0, 0.1), BoundaryNoiseModel(J=16, sigma0=0.1, seed=0), 0.2, (2e-3, 1e-3, 5e-4))
    rates = [rep.value("rate_0"), rep.value("rate_1")]
    ok = all(0.8 <= r <= 1.2 for r in rates)
    finals = [r["R_final"] for r in rep.tables["refinement"]]
    record(6, "energy identity", ok, f"|R_N| = {finals[0]:.2e}, {finals[1]:.2e}, {finals[2]:.2e}; rates {rates[0]:.3f}, {rates[1]:.3f} (band [0.8, 1.2])")


def test_c07_splitting():
    g = Grid(16, 16)
    u0 = single_mode(g, 1, 0, 0.1)
    model = BoundaryNoiseModel(J=15, sigma0=0.1, beta=1.0, seed=0)
    dts = (1e-3, 5e-4, 2.5e-4)
    gaps = [solve_split(u0, model, 0.2, dt, substeps=s)[2] for dt, s in zip(dts, (4, 2, 1))]
    order = fitted_order(dts, gaps)
    zero_gap = solve_split(u0, model.with_(sigma0=0.0), 0.2, 1e-3)[2]
    ok = order >= 0.8 and zero_gap <= 1e-12
    record(7, "splitting consistency", ok, f"gaps {gaps[0]:.2e}, {gaps[1]:.2e}, {gaps[2]:.2e}; order {order:.3f} (tol >= 0.8); zero-noise gap {zero_gap:.1e} (tol 1e-12)")


def test_c08_picard():
    g = Grid(32, 32)
    u0 = single_mode(g, 1, 0, 0.1)
    dt, tol = 1e-3, 1e-12
    w = simulate_w(BoundaryNoiseModel(J=16, sigma0=0.05, seed=0), g, 0.1, dt).snapshots
    res = picard_adaptive(u0, w, dt, 0.1, tol=tol)
    n = len(res.path.snapshots)
    march = march_v(u0, w[:n], dt, ledger=False)
    gap = norm_L2(march.final - res.path.final)
    ratios = res.ratios
    ok = all(r < 1 for r in ratios) and all(r <= 0.6 for r in ratios[2:]) and gap <= 5 * max(tol, dt)
    record(8, "Picard contraction", ok, f"T_bar {res.T_bar}, ratios from iteration 2: " + ", ".join(f"{r:.2e}" for r in ratios) + f"; march gap {gap:.1e} (tol {5 * max(tol, dt):.0e})")


def test_c09_interior_regularity():
    model = BoundaryNoiseModel(J=31, sigma0=0.1, beta=1.0, seed=0)
    rep = heat_residual_refinement(model, 32, (32, 64), 0.15, 1e-3, (0.25, 0.75), t1=0.1)
    order, contrast = rep.value("order"), rep.value("spectral_contrast")
    res = [r["reference_residual"] for r in rep.tables["refinement"]]
    record(9, "interior regularity", rep.passed, f"heat residual {res[0]:.3e} -> {res[1]:.3e}, order {order:.3f} (tol >= 1); spectral contrast {contrast:.3e} (tol < 0.1)")


def test_c10_continuous_dependence():
    g = Grid(32, 32)
    u0 = single_mode(g, 1, 0, 0.1)
    w = simulate_w(BoundaryNoiseModel(J=16, sigma0=0.1, seed=0), g, 0.2, 1e-3).snapshots
    a = perturbation_family(u0, w, 1e-3, direction=single_mode(g, 2, 0, 1.0))
    b = perturbation_family(u0, w, 1e-3, scale_w=True)
    ok = a["spread"] <= 4 and b["spread"] <= 4
    record(10, "continuous dependence", ok, f"spread over deltas 1e-2..1e-4: initial-data {a['spread']:.3f}, noise-scaling {b['spread']:.3f} (tol 4)")


CONFIG = """
[grid]
N_x = 16
N_z = 16
[time]
T = 0.05
dt = 0.005
[initial]
preset = single-mode
amplitude = 0.1
[noise]
J = 8
seed = 11
[diagnostics]
t1 = 0.02
t2 = 0.05
[output]
stride = 2
"""


def test_c11_reproducibility(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG)
    mismatched, files = [], 0
    for cmd in (["simulate"], ["diagnose"], ["converge", "--axis", "dt", "--levels", "3"]):
        dirs = [tmp_path / f"{cmd[0]}_{i}" for i in range(2)]
        for d in dirs:
            assert main(cmd + ["--config", str(cfg), "--out", str(d)]) == 0
        names = sorted(os.listdir(dirs[0]))
        assert names == sorted(os.listdir(dirs[1]))
        _, bad, err = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        mismatched += bad + err
        files += len(names)
    record(11, "reproducibility", not mismatched, f"{files} output files compared byte for byte, {len(mismatched)} differ")


def test_c12_self_adjoint(rng):
    sym = 0.0
    pos = np.inf
    for _ in range(100):
        u = helmholtz_project(random_velocity(DESK, rng))
        v = helmholtz_project(random_velocity(DESK, rng))
        au, av = stokes_operator(u), stokes_operator(v)
        sym = max(sym, abs(inner(au, v) - inner(u, av)) / (norm_L2(au) * norm_L2(v)))
        pos = min(pos, inner(au, u) / inner(u, u))
    ok = sym <= 1e-10 and pos >= 0
    record(12, "Stokes operator", ok, f"max relative asymmetry {sym:.2e} (tol 1e-10); min <Au,u>/|u|^2 = {pos:.3e} (>= 0)")
