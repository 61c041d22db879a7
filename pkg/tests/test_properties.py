import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from chst.config import RunConfig, parse_config
from chst.elliptic import helmholtz_project, neumann_map, stokes_operator
from chst.fields import BoundaryField, inner, norm_H1, norm_L2, random_velocity, trilinear_b
from chst.grid import Grid
from chst.snapshot import decode, encode

grids = st.builds(
    Grid,
    n_x=st.sampled_from([8, 12, 16]),
    n_z=st.integers(4, 12),
    a=st.floats(0.5, 2.0),
)
seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25, deadline=None)
@given(grids, seeds)
def test_oddity(grid, seed):
    rng = np.random.default_rng(seed)
    u, v, w = (helmholtz_project(random_velocity(grid, rng)) for _ in range(3))
    scale = norm_L2(u) * norm_H1(v) * norm_H1(w)
    assert abs(trilinear_b(u, v, w) + trilinear_b(u, w, v)) <= 1e-12 * scale


@settings(max_examples=25, deadline=None)
@given(grids, seeds)
def test_projection_idempotent(grid, seed):
    f = random_velocity(grid, np.random.default_rng(seed))
    pf = helmholtz_project(f)
    assert norm_L2(helmholtz_project(pf) - pf) <= 1e-10 * norm_L2(f)


@settings(max_examples=25, deadline=None)
@given(grids, seeds)
def test_stokes_operator_positive(grid, seed):
    u = helmholtz_project(random_velocity(grid, np.random.default_rng(seed)))
    assert inner(stokes_operator(u), u) >= 0


@settings(max_examples=25, deadline=None)
@given(grids, st.floats(-3, 3), st.floats(-3, 3), st.integers(1, 3))
def test_neumann_map_linear(grid, alpha, beta, k):
    g1 = BoundaryField.cosine(grid.n_x, k)
    g2 = BoundaryField.constant(grid.n_x, 1.0)
    lhs = neumann_map(g1 * alpha + g2 * beta, grid)[0]
    rhs = neumann_map(g1, grid)[0] * alpha + neumann_map(g2, grid)[0] * beta
    assert norm_L2(lhs - rhs) <= 1e-12 * (1 + norm_L2(lhs))


@settings(max_examples=25, deadline=None)
@given(grids, seeds, st.floats(0, 10, allow_nan=False))
def test_snapshot_roundtrip(grid, seed, t):
    u = random_velocity(grid, np.random.default_rng(seed), dealias=False)
    u.t = t
    back = decode(encode(u))
    assert back.u1.tobytes() == u.u1.tobytes() and back.u2.tobytes() == u.u2.tobytes()
    assert back.t == t and back.grid == u.grid


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from([8, 16, 32]),
    st.integers(4, 40),
    st.floats(1e-4, 1e-2),
    st.integers(0, 2 ** 31),
    st.lists(st.tuples(st.floats(0, 1), st.floats(0, 3)), max_size=3),
)
def test_config_text_roundtrip(n_x, n_z, dt, seed, schedule):
    cfg = RunConfig(n_x=n_x, n_z=n_z, dt=dt, seed=seed, J=n_x - 1, schedule=tuple(schedule))
    assert parse_config(cfg.to_text()) == cfg
