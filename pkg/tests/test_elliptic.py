import numpy as np
import pytest

from chst.elliptic import (
    helmholtz_project,
    laplacian,
    neumann_map,
    pressure_gradient,
    steady_stokes,
    stokes_eigenmodes,
    stokes_operator,
    stokes_residual,
    stokes_resolvent,
    stokes_solve,
)
from chst.fields import BoundaryField, divergence, inner, norm_L2, random_velocity
from chst.grid import Grid
from chst.initial import single_mode


def continuum_neumann_mode(k, a, g_hat):
    """Stream-function solution of the steady Stokes problem for shear g_hat e^{ikx}.

    psi = A cosh kz + B sinh kz + C z cosh kz + D z sinh kz with
    psi(0) = psi'(0) = psi(a) = 0 and psi''(a) = g_hat; u1 = psi', u2 = -ik psi.
    """
    def rows(z):
        ch, sh = np.cosh(k * z), np.sinh(k * z)
        p = [ch, sh, z * ch, z * sh]
        dp = [k * sh, k * ch, ch + k * z * sh, sh + k * z * ch]
        ddp = [k * k * ch, k * k * sh, 2 * k * sh + k * k * z * ch, 2 * k * ch + k * k * z * sh]
        return np.array(p), np.array(dp), np.array(ddp)

    p0, dp0, _ = rows(0.0)
    pa, _, ddpa = rows(a)
    coef = np.linalg.solve(np.array([p0, dp0, pa, ddpa]), np.array([0, 0, 0, g_hat], complex))

    def u1(z):
        return rows(z)[1].T @ coef

    def u2(z):
        return -1j * k * (rows(z)[0].T @ coef)

    return u1, u2


class TestNeumannMap:
    @pytest.mark.parametrize("c", [1.0, -2.5, 0.3])
    def test_constant_shear_is_linear_profile(self, c):
        g = Grid(8, 10, 1.5)
        u, p = neumann_map(BoundaryField.constant(8, c), g)
        assert np.max(np.abs(u.u1[0] - c * g.z_centers)) < 1e-12
        assert np.max(np.abs(np.delete(u.u1, 0, axis=0))) < 1e-12
        assert np.max(np.abs(u.u2)) < 1e-12
        assert np.max(np.abs(p.values)) < 1e-12

    @pytest.mark.parametrize("k", [1, 3])
    def test_mode_converges_to_continuum(self, k):
        errs = []
        for n_z in (16, 32, 64):
            g = Grid(16, n_z)
            u, _ = neumann_map(BoundaryField.cosine(16, k), g)
            f1, f2 = continuum_neumann_mode(k, 1.0, 0.5)
            e1 = np.max(np.abs(u.u1[k] - f1(g.z_centers)))
            e2 = np.max(np.abs(u.u2[k] - f2(g.z_nodes)))
            errs.append(max(e1, e2))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(rates - 2.0) < 0.2)

    def test_residuals_vanish(self):
        g = Grid(16, 16)
        b = BoundaryField.cosine(16, 3) + BoundaryField.constant(16, 0.5)
        u, p = neumann_map(b, g)
        mom, div = stokes_residual(u, p, None, 0.0, b.values, 1.0)
        assert mom < 1e-10 and div < 1e-10


class TestStokesSolve:
    def test_resolvent_residual(self, rng):
        g = Grid(16, 12)
        f = random_velocity(g, rng)
        gc = BoundaryField.cosine(16, 2).values
        u, p = stokes_solve(f, 3.0, gc, nu=0.7)
        mom, div = stokes_residual(u, p, f, 3.0, gc, 0.7)
        assert mom < 1e-10 * max(1, np.max(np.abs(f.u1))) and div < 1e-11
        assert np.allclose(u.shear, gc)

    def test_steady_solution_satisfies_equation(self, rng):
        g = Grid(16, 12)
        f = random_velocity(g, rng)
        u, p = steady_stokes(f)
        mom, div = stokes_residual(u, p, f, 0.0, None, 1.0)
        assert mom < 1e-9 and div < 1e-11

    def test_resolvent_is_real(self, rng):
        g = Grid(16, 12)
        u = stokes_resolvent(random_velocity(g, rng), 10.0)
        p1, p2 = np.fft.ifft(u.u1, axis=0), np.fft.ifft(u.u2, axis=0)
        assert np.max(np.abs(p1.imag)) < 1e-14 and np.max(np.abs(p2.imag)) < 1e-14

    def test_invalid_parameters(self, rng):
        g = Grid(8, 8)
        with pytest.raises(ValueError):
            stokes_resolvent(random_velocity(g, rng), -1.0)
        with pytest.raises(ValueError):
            stokes_resolvent(random_velocity(g, rng), 1.0, nu=0.0)
        with pytest.raises(ValueError):
            stokes_solve(None, 1.0)


class TestProjection:
    def test_properties(self, rng):
        g = Grid(16, 12)
        f = random_velocity(g, rng)
        pf = helmholtz_project(f)
        assert norm_L2(helmholtz_project(pf) - pf) < 1e-12 * norm_L2(f)
        assert abs(inner(f - pf, pf)) < 1e-12 * inner(f, f)
        assert np.max(np.abs(divergence(pf).values)) < 1e-11 * norm_L2(f)
        assert pf.solenoidal

    def test_gradient_is_annihilated(self, rng):
        g = Grid(16, 12)
        from chst.fields import ScalarField

        phi = ScalarField(random_velocity(g, rng).u1, "center", g)
        assert norm_L2(helmholtz_project(pressure_gradient(phi))) < 1e-12 * norm_L2(pressure_gradient(phi))


class TestStokesOperator:
    def test_symmetric_positive(self, rng):
        g = Grid(16, 12)
        u = helmholtz_project(random_velocity(g, rng))
        v = helmholtz_project(random_velocity(g, rng))
        au, av = stokes_operator(u), stokes_operator(v)
        assert abs(inner(au, v) - inner(u, av)) < 1e-11 * norm_L2(au) * norm_L2(v)
        assert inner(au, u) > 0

    def test_mode0_eigenvalues(self):
        # continuum: ((m + 1/2) pi)^2 for no-slip below, free shear above
        lam, _, _ = stokes_eigenmodes(Grid(8, 64), 0)
        exact = ((np.arange(3) + 0.5) * np.pi) ** 2
        assert np.allclose(lam[:3], exact, rtol=2e-3)

    def test_single_mode_is_eigenvector(self):
        g = Grid(16, 16)
        lam, _, _ = stokes_eigenmodes(g, 2)
        u = single_mode(g, 2, 1, 0.3)
        assert norm_L2(u) == pytest.approx(0.3)
        au = stokes_operator(u)
        assert norm_L2(au - u * lam[1]) < 1e-9 * norm_L2(au)

    def test_laplacian_of_shear_profile(self):
        # u1 = z has d_zz u1 = 0 with d_z u1 = 1 on top
        g = Grid(8, 10)
        u, _ = neumann_map(BoundaryField.constant(8, 1.0), g)
        lap = laplacian(u, shear=u.shear)
        assert np.max(np.abs(lap.u1)) < 1e-10

    def test_eigenmode_bounds(self):
        with pytest.raises(ValueError):
            stokes_eigenmodes(Grid(8, 8), 4)
