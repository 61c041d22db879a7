import warnings

import numpy as np
import pytest

from chst.fields import inner, norm_L2, zero_velocity
from chst.grid import Grid
from chst.initial import single_mode
from chst.linear import BlowUpError, simulate_w, step_w
from chst.noise import BoundaryNoiseModel, sample_increment
from chst.nonlinear import (
    CFLWarning,
    NonContractionError,
    continuous_dependence_probe,
    lebesgue_L4L4,
    march_u,
    march_v,
    perturbation_family,
    picard_adaptive,
    picard_solve,
    solve_split,
    step_u,
    step_v,
)

GRID = Grid(16, 16)


@pytest.fixture
def u0():
    return single_mode(GRID, 1, 0, 0.1)


@pytest.fixture
def model():
    return BoundaryNoiseModel(J=8, sigma0=0.05, beta=1.0, seed=4)


class TestSteps:
    def test_zero_data_stays_zero(self):
        z = zero_velocity(GRID)
        v = step_v(z, z, 0.01)
        assert norm_L2(v) == 0.0
        incr = sample_increment(BoundaryNoiseModel(J=4, sigma0=0.0), 0.01, 0, 0, GRID.n_x)
        assert norm_L2(step_u(z, 0.01, incr)) == 0.0

    def test_energy_decays_without_w(self, u0):
        z = zero_velocity(GRID)
        v = u0 * 5.0
        e = [inner(v, v)]
        for _ in range(20):
            v = step_v(v, z, 0.01)
            e.append(inner(v, v))
        assert np.all(np.diff(e) < 0)

    def test_linear_flag_matches_step_w_bitwise(self, model):
        incr = sample_increment(model, 0.01, 0, 3, GRID.n_x)
        w = zero_velocity(GRID)
        a = step_u(w, 0.01, incr, nonlinear=False)
        b = step_w(w, 0.01, incr)
        assert np.array_equal(a.u1, b.u1) and np.array_equal(a.u2, b.u2)

    def test_validation(self, u0):
        with pytest.raises(ValueError):
            step_v(u0, u0, 0.0)
        with pytest.raises(ValueError, match="dimension mismatch"):
            step_v(u0, zero_velocity(Grid(16, 8)), 0.01)

    def test_cfl_warning(self, u0):
        with pytest.warns(CFLWarning):
            step_v(u0 * 1e3, zero_velocity(GRID), 0.1)

    def test_nan_raises_blowup(self, u0):
        bad = u0.copy()
        bad.u1[1, 3] = np.nan
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(BlowUpError):
                step_v(bad, zero_velocity(GRID), 0.01)


class TestSplit:
    def test_zero_noise_gap(self, u0, model):
        _, _, gap = solve_split(u0, model.with_(sigma0=0.0), 0.05, 0.01)
        assert gap <= 1e-12

    def test_lagged_coupling_reproduces_direct(self, u0, model):
        _, _, gap = solve_split(u0, model, 0.05, 0.01, coupling="lagged")
        assert gap < 1e-13

    def test_updated_coupling_gap_is_small_but_nonzero(self, u0, model):
        _, _, gap = solve_split(u0, model, 0.05, 0.01)
        assert 0 < gap < 1e-3

    def test_deterministic(self, u0, model):
        a = solve_split(u0, model, 0.03, 0.01)
        b = solve_split(u0, model, 0.03, 0.01)
        assert np.array_equal(a[1].final.u1, b[1].final.u1)
        assert a[2] == b[2]

    def test_initial_datum_and_boundary_rows(self, u0, model):
        _, nl, _ = solve_split(u0, model, 0.03, 0.01)
        assert np.array_equal(nl.snapshots[0].u1, u0.u1)
        for v in nl.snapshots:
            assert np.all(v.u2[:, [0, -1]] == 0)

    def test_direct_march_matches_split(self, u0, model):
        _, nl, _ = solve_split(u0, model, 0.03, 0.01, coupling="lagged")
        d = march_u(u0, model, 0.03, 0.01)
        assert norm_L2(d.u_final - nl.u_final) < 1e-14

    def test_energy_ledger_without_forcing(self, u0):
        # the residual of the discrete energy identity is first order in dt
        model = BoundaryNoiseModel(J=2, sigma0=0.0)
        r = [abs(solve_split(u0, model, 0.1, dt, direct=False)[1].residual[-1]) for dt in (0.01, 0.005)]
        assert 1.6 < r[0] / r[1] < 2.4
        _, nl, _ = solve_split(u0, model, 0.05, 0.01, direct=False)
        assert np.max(np.abs(nl.ledger.cubic)) < 1e-14

    def test_march_v_matches_split(self, u0, model):
        lin, nl, _ = solve_split(u0, model, 0.03, 0.01, direct=False)
        lin2 = simulate_w(model, GRID, 0.03, 0.01)
        mv = march_v(u0, lin2.snapshots, 0.01)
        assert norm_L2(mv.final - nl.final) < 1e-15
        assert mv.residual[-1] == pytest.approx(nl.residual[-1], rel=1e-12)

    def test_bad_coupling(self, u0, model):
        with pytest.raises(ValueError):
            solve_split(u0, model, 0.03, 0.01, coupling="midpoint")


class TestPicard:
    def test_trivial_data_converges_immediately(self):
        zs = [zero_velocity(GRID) for _ in range(6)]
        res = picard_solve(zero_velocity(GRID), zs, 0.01, 0.05)
        assert res.iterations == 1 and res.converged
        assert norm_L2(res.path.final) == 0.0

    def test_fixed_point_is_the_march(self, u0, model):
        w = simulate_w(model, GRID, 0.05, 0.01).snapshots
        res = picard_solve(u0, w, 0.01, 0.05, tol=1e-12)
        mv = march_v(u0, w, 0.01, ledger=False)
        assert norm_L2(res.path.final - mv.final) < 5e-12

    def test_uniqueness_from_two_guesses(self, u0, model, rng):
        w = simulate_w(model, GRID, 0.05, 0.01).snapshots
        tol = 1e-11
        a = picard_solve(u0, w, 0.01, 0.05, tol=tol)
        guess = [u0 * float(rng.uniform(-3, 3)) for _ in w]
        b = picard_solve(u0, w, 0.01, 0.05, tol=tol, initial=guess)
        gap = max(norm_L2(x - y) for x, y in zip(a.path.snapshots, b.path.snapshots))
        assert gap <= 10 * tol

    def test_non_contraction_report(self, u0, model):
        w = simulate_w(model, GRID, 0.05, 0.01).snapshots
        with pytest.raises(NonContractionError) as info:
            picard_solve(u0, w, 0.01, 0.05, tol=1e-14, max_iter=2)
        assert len(info.value.differences) == 2
        assert len(info.value.ratios) == 1

    def test_horizon_beyond_path(self, u0):
        with pytest.raises(ValueError):
            picard_solve(u0, [zero_velocity(GRID)] * 3, 0.01, 0.05)

    def test_adaptive_halves_on_failure(self, u0, model):
        w = simulate_w(model, GRID, 0.08, 0.01).snapshots
        # large data: the full horizon needs more iterations than allowed
        res = picard_adaptive(u0 * 40.0, w, 0.01, 0.08, tol=1e-10, max_iter=4)
        assert res.halvings >= 1 and res.T_bar < 0.08


class TestContinuousDependence:
    def test_identical_inputs(self, u0, model):
        w = simulate_w(model, GRID, 0.03, 0.01).snapshots
        rep = continuous_dependence_probe(u0, u0, w, w, 0.01)
        assert rep["numerator"] == 0.0 and rep["ratio"] == 0.0

    def test_initial_perturbation_is_stable(self, u0, model):
        w = simulate_w(model, GRID, 0.05, 0.01).snapshots
        rep = perturbation_family(u0, w, 0.01, direction=single_mode(GRID, 2, 0, 1.0))
        assert rep["spread"] <= 4.0
        assert all(np.isfinite(rep["ratios"]))

    def test_noise_scaling_is_stable(self, u0, model):
        w = simulate_w(model, GRID, 0.05, 0.01).snapshots
        rep = perturbation_family(u0, w, 0.01, scale_w=True)
        assert rep["spread"] <= 4.0

    def test_L4L4_of_constant_path(self):
        u = single_mode(GRID, 0, 0, 1.0)
        from chst.fields import norm_L4

        val = lebesgue_L4L4([u] * 5, 0.1)
        assert val == pytest.approx((0.4 * norm_L4(u) ** 4) ** 0.25)

    def test_needs_direction(self, u0):
        with pytest.raises(ValueError):
            perturbation_family(u0, [zero_velocity(GRID)] * 3, 0.01)
