"""Auxiliary Navier-Stokes problem for v = u - w, the direct march for u, and
the Picard construction.

All marches are IMEX: implicit Stokes, explicit skew-symmetric advection.
Within a split step the linear part is advanced first, and the auxiliary
step evaluates its random coefficient at the new level:

    w_{n+1} = R(w_n / dt; g = impulse / dt)
    v_{n+1} = R(v_n / dt - B(v_n + w_{n+1}, v_n + w_{n+1}))
    u_{n+1} = R(u_n / dt - B(u_n, u_n); g = impulse / dt)

where R solves (1/dt - nu Lap_h) x + grad p = rhs.  With the coefficient
taken at the old level instead (``coupling="lagged"``) the split march is
algebraically identical to the direct one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .elliptic import stokes_resolvent
from .fields import (
    VelocityField,
    advection,
    grad_norm_sq,
    inner,
    norm_L2,
    norm_L4,
    trilinear_b,
    zero_velocity,
)
from .linear import BlowUpError, LinearPath, n_steps, step_w
from .noise import BoundaryNoiseModel, NoiseIncrement, sample_increment

__all__ = [
    "CFLWarning",
    "NonContractionError",
    "EnergyLedger",
    "NonlinearPath",
    "PicardResult",
    "step_v",
    "step_u",
    "march_v",
    "march_u",
    "solve_split",
    "picard_solve",
    "picard_adaptive",
    "continuous_dependence_probe",
    "perturbation_family",
    "lebesgue_L4L4",
]


class CFLWarning(RuntimeWarning):
    pass


class NonContractionError(RuntimeError):
    """Picard iteration did not reach tolerance; carries the ratio history."""

    def __init__(self, message: str, ratios: Sequence[float], differences: Sequence[float]):
        super().__init__(message)
        self.ratios = list(ratios)
        self.differences = list(differences)


def _check_cfl(u: VelocityField, dt: float) -> None:
    p1, p2 = u.physical()
    vmax = max(float(np.max(np.abs(p1), initial=0.0)), float(np.max(np.abs(p2), initial=0.0)))
    courant = dt * vmax / min(u.grid.dx, u.grid.dz)
    if courant > 1.0:
        warnings.warn(f"explicit advection may be unstable: Courant number {courant:.3g}", CFLWarning, stacklevel=3)


def _implicit(rhs: VelocityField, dt: float, nu: float, g=None, what: str = "field") -> VelocityField:
    if not rhs.is_finite():
        raise BlowUpError(int(round(rhs.t / dt)) + 1, what)
    return stokes_resolvent(rhs, 1.0 / dt, g, nu)


def step_v(v_n: VelocityField, w: VelocityField, dt: float, nu: float = 1.0) -> VelocityField:
    """One IMEX step of the auxiliary problem with coefficient field ``w``."""
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    if w.grid != v_n.grid:
        raise ValueError("dimension mismatch: v and w live on different grids")
    total = v_n + w
    _check_cfl(total, dt)
    rhs = v_n * (1.0 / dt) - advection(total, total)
    v = _implicit(rhs, dt, nu, what="auxiliary field")
    v.t = v_n.t + dt
    if not v.is_finite():
        raise BlowUpError(int(round(v.t / dt)), "auxiliary field")
    return v


def step_u(
    u_n: VelocityField, dt: float, incr: NoiseIncrement, nu: float = 1.0, nonlinear: bool = True
) -> VelocityField:
    """One IMEX step of the full problem with the noise impulse as shear datum."""
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not nonlinear:
        return step_w(u_n, dt, incr, nu)
    _check_cfl(u_n, dt)
    rhs = u_n * (1.0 / dt) - advection(u_n, u_n)
    u = _implicit(rhs, dt, nu, incr.impulse.values / dt, "velocity field")
    u.t = u_n.t + dt
    if not u.is_finite():
        raise BlowUpError(int(round(u.t / dt)), "velocity field")
    return u


class EnergyLedger:
    """Running terms of the energy identity for the auxiliary problem.

    Time integrals use the trapezoidal rule over the recorded levels.
    ``residual[n]`` is

        |v_n|^2 + 2 nu int |grad v|^2 - |u0|^2 - 2 int (b(v,v,w) + b(w,v,w)).
    """

    def __init__(self, nu: float, dt: float):
        self.nu = nu
        self.dt = dt
        self.energy: List[float] = []
        self.dissipation: List[float] = []
        self.coupling: List[float] = []
        self.cubic: List[float] = []
        self.int_dissipation: List[float] = []
        self.int_coupling: List[float] = []
        self.residual: List[float] = []

    def add(self, v: VelocityField, w: VelocityField) -> None:
        e = inner(v, v)
        d = grad_norm_sq(v)
        c = trilinear_b(v, v, w) + trilinear_b(w, v, w)
        self.cubic.append(trilinear_b(v, v, v))
        if self.energy:
            h = 0.5 * self.dt
            self.int_dissipation.append(self.int_dissipation[-1] + h * (self.dissipation[-1] + d))
            self.int_coupling.append(self.int_coupling[-1] + h * (self.coupling[-1] + c))
        else:
            self.int_dissipation.append(0.0)
            self.int_coupling.append(0.0)
        self.energy.append(e)
        self.dissipation.append(d)
        self.coupling.append(c)
        self.residual.append(
            e + 2 * self.nu * self.int_dissipation[-1] - self.energy[0] - 2 * self.int_coupling[-1]
        )


@dataclass
class NonlinearPath:
    """Trajectory of the auxiliary problem (and optionally of u itself)."""

    dt: float
    nu: float
    times: List[float] = field(default_factory=list)
    snapshots: List[VelocityField] = field(default_factory=list)
    u_snapshots: List[VelocityField] = field(default_factory=list)
    ledger: Optional[EnergyLedger] = None
    final: Optional[VelocityField] = None
    u_final: Optional[VelocityField] = None
    sup_L2: float = 0.0
    int_L4_u: float = 0.0

    @property
    def residual(self) -> np.ndarray:
        return np.asarray(self.ledger.residual) if self.ledger else np.zeros(0)


def march_v(
    u0: VelocityField,
    w_fields: Sequence[VelocityField],
    dt: float,
    nu: float = 1.0,
    coupling: str = "updated",
    stride: int = 1,
    ledger: bool = True,
) -> NonlinearPath:
    """March the auxiliary problem over the levels of ``w_fields`` (w_0..w_N)."""
    if coupling not in ("updated", "lagged"):
        raise ValueError(f"coupling must be 'updated' or 'lagged', got {coupling!r}")
    path = NonlinearPath(dt, nu, ledger=EnergyLedger(nu, dt) if ledger else None)
    v = u0.with_time(0.0)
    path.times.append(0.0)
    path.snapshots.append(v)
    if path.ledger:
        path.ledger.add(v, w_fields[0])
    path.sup_L2 = norm_L2(v)
    for n in range(len(w_fields) - 1):
        w_coef = w_fields[n + 1] if coupling == "updated" else w_fields[n]
        v = step_v(v, w_coef, dt, nu)
        v.t = (n + 1) * dt
        if path.ledger:
            path.ledger.add(v, w_fields[n + 1])
        path.sup_L2 = max(path.sup_L2, norm_L2(v))
        if (n + 1) % stride == 0:
            path.times.append(v.t)
            path.snapshots.append(v)
    path.final = v
    return path


def march_u(
    u0: VelocityField,
    model: BoundaryNoiseModel,
    T: float,
    dt: float,
    nu: float = 1.0,
    path_index: int = 0,
    substeps: int = 1,
    stride: int = 1,
) -> NonlinearPath:
    """Direct IMEX march of the full problem without splitting."""
    n = n_steps(T, dt)
    grid = u0.grid
    path = NonlinearPath(dt, nu)
    u = u0.with_time(0.0)
    path.u_snapshots.append(u)
    path.times.append(0.0)
    for i in range(n):
        path.int_L4_u += dt * norm_L4(u) ** 4
        incr = sample_increment(model, dt, path_index, i, grid.n_x, substeps)
        u = step_u(u, dt, incr, nu)
        u.t = (i + 1) * dt
        path.sup_L2 = max(path.sup_L2, norm_L2(u))
        if (i + 1) % stride == 0:
            path.times.append(u.t)
            path.u_snapshots.append(u)
    path.u_final = u
    return path


def solve_split(
    u0: VelocityField,
    model: BoundaryNoiseModel,
    T: float,
    dt: float,
    nu: float = 1.0,
    path_index: int = 0,
    substeps: int = 1,
    stride: int = 1,
    coupling: str = "updated",
    direct: bool = True,
) -> Tuple[LinearPath, NonlinearPath, float]:
    """Run w, v and (optionally) u on one noise record.

    Returns the linear path, the auxiliary path (with ``u_snapshots`` filled
    when ``direct``) and gap = max_n |u_n - (v_n + w_n)|_{L2}.
    """
    if coupling not in ("updated", "lagged"):
        raise ValueError(f"coupling must be 'updated' or 'lagged', got {coupling!r}")
    n = n_steps(T, dt)
    grid = u0.grid
    lin = LinearPath(grid, model, dt, path_index)
    nl = NonlinearPath(dt, nu, ledger=EnergyLedger(nu, dt))
    w = zero_velocity(grid)
    v = u0.with_time(0.0)
    u = u0.with_time(0.0)
    lin.times.append(0.0)
    lin.snapshots.append(w)
    nl.times.append(0.0)
    nl.snapshots.append(v)
    nl.ledger.add(v, w)
    nl.sup_L2 = norm_L2(v)
    if direct:
        nl.u_snapshots.append(u)
    gap = 0.0
    for i in range(n):
        lin.int_L4 += dt * norm_L4(w) ** 4
        if direct:
            nl.int_L4_u += dt * norm_L4(u) ** 4
        incr = sample_increment(model, dt, path_index, i, grid.n_x, substeps)
        lin.impulse_energy.append(2 * np.pi * float(np.sum(np.abs(incr.impulse.values) ** 2)))
        w_new = step_w(w, dt, incr, nu)
        v = step_v(v, w_new if coupling == "updated" else w, dt, nu)
        w = w_new
        t = (i + 1) * dt
        w.t = v.t = t
        if not w.is_finite():
            raise BlowUpError(i + 1, "linear field")
        lin.sup_L2 = max(lin.sup_L2, norm_L2(w))
        nl.sup_L2 = max(nl.sup_L2, norm_L2(v))
        nl.ledger.add(v, w)
        if direct:
            u = step_u(u, dt, incr, nu)
            u.t = t
            gap = max(gap, norm_L2(u - (v + w)))
        if (i + 1) % stride == 0:
            lin.times.append(t)
            lin.snapshots.append(w)
            nl.times.append(t)
            nl.snapshots.append(v)
            if direct:
                nl.u_snapshots.append(u)
    lin.final = w
    nl.final = v
    nl.u_final = u if direct else None
    return lin, nl, gap


# --- Picard construction ----------------------------------------------------


@dataclass
class PicardResult:
    path: NonlinearPath
    differences: List[float]
    ratios: List[float]
    iterations: int
    T_bar: float
    converged: bool
    halvings: int = 0


def _picard_sweep(
    u0: VelocityField,
    w_fields: Sequence[VelocityField],
    previous: Sequence[VelocityField],
    dt: float,
    nu: float,
) -> List[VelocityField]:
    """One Picard iterate: NS march forced by -B(v^n, w) - B(w, v^n) - B(w, w)."""
    out = [u0.with_time(0.0)]
    v = out[0]
    for m in range(len(w_fields) - 1):
        w = w_fields[m + 1]
        vp = previous[m]
        forcing = advection(vp, w) + advection(w, vp) + advection(w, w)
        rhs = v * (1.0 / dt) - advection(v, v) - forcing
        v = _implicit(rhs, dt, nu, what="Picard iterate")
        v.t = (m + 1) * dt
        if not v.is_finite():
            raise BlowUpError(m + 1, "Picard iterate")
        out.append(v)
    return out


def picard_solve(
    u0: VelocityField,
    w_fields: Sequence[VelocityField],
    dt: float,
    T_bar: float,
    tol: float = 1e-10,
    max_iter: int = 30,
    nu: float = 1.0,
    initial: Optional[Sequence[VelocityField]] = None,
) -> PicardResult:
    """Picard iteration on [0, T_bar] starting from v^0 = 0 (or ``initial``).

    ``w_fields`` holds the linear part at levels 0, dt, 2 dt, ...; the
    coefficient pairing matches :func:`march_v` with updated coupling, so the
    fixed point is the IMEX march.  Differences are sup_t |v^{n+1} - v^n|_{L2}.
    """
    n = n_steps(T_bar, dt)
    if len(w_fields) < n + 1:
        raise ValueError("T_bar exceeds the horizon of the supplied w path")
    w_fields = list(w_fields[: n + 1])
    prev = list(initial) if initial is not None else [zero_velocity(u0.grid) for _ in range(n + 1)]
    differences: List[float] = []
    ratios: List[float] = []
    for it in range(1, max_iter + 1):
        cur = _picard_sweep(u0, w_fields, prev, dt, nu)
        d = max(norm_L2(a - b) for a, b in zip(cur, prev))
        if differences:
            ratios.append(d / differences[-1] if differences[-1] > 0 else 0.0)
        differences.append(d)
        prev = cur
        if d <= tol:
            path = NonlinearPath(dt, nu, times=[i * dt for i in range(n + 1)], snapshots=cur, final=cur[-1])
            path.sup_L2 = max(norm_L2(x) for x in cur)
            return PicardResult(path, differences, ratios, it, T_bar, True)
    raise NonContractionError(
        f"Picard iteration did not reach tol={tol} in {max_iter} iterations on T_bar={T_bar}",
        ratios,
        differences,
    )


def picard_adaptive(
    u0: VelocityField,
    w_fields: Sequence[VelocityField],
    dt: float,
    T_bar: float,
    tol: float = 1e-10,
    max_iter: int = 30,
    nu: float = 1.0,
    max_halvings: int = 8,
) -> PicardResult:
    """Picard iteration that halves T_bar until the iterates contract."""
    for h in range(max_halvings + 1):
        try:
            res = picard_solve(u0, w_fields, dt, T_bar, tol, max_iter, nu)
        except (NonContractionError, BlowUpError):
            res = None
        if res is not None and all(r < 1.0 for r in res.ratios):
            res.halvings = h
            return res
        T_bar = 0.5 * T_bar
        if T_bar < dt:
            break
    raise NonContractionError("no contracting horizon found", [], [])


# --- continuous dependence -------------------------------------------------


def lebesgue_L4L4(fields: Sequence[VelocityField], dt: float) -> float:
    """(sum_{n>=1} dt |f_n|_{L4}^4)^(1/4) over levels 1..N."""
    return float(sum(dt * norm_L4(f) ** 4 for f in fields[1:]) ** 0.25)


def continuous_dependence_probe(
    u0: VelocityField,
    u0_prime: VelocityField,
    w_fields: Sequence[VelocityField],
    w_fields_prime: Sequence[VelocityField],
    dt: float,
    nu: float = 1.0,
) -> dict:
    """Amplification sup_t |v - v'| / (|u0 - u0'| + |w - w'|_{L4 L4})."""
    if len(w_fields) != len(w_fields_prime):
        raise ValueError("w paths must share the time grid")
    a = march_v(u0, w_fields, dt, nu, ledger=False)
    b = march_v(u0_prime, w_fields_prime, dt, nu, ledger=False)
    num = max(norm_L2(x - y) for x, y in zip(a.snapshots, b.snapshots))
    d0 = norm_L2(u0 - u0_prime)
    dw = lebesgue_L4L4([x - y for x, y in zip(w_fields, w_fields_prime)], dt)
    den = d0 + dw
    return {
        "numerator": num,
        "initial_gap": d0,
        "w_gap": dw,
        "ratio": num / den if den > 0 else 0.0,
    }


def perturbation_family(
    u0: VelocityField,
    w_fields: Sequence[VelocityField],
    dt: float,
    deltas: Sequence[float] = (1e-2, 1e-3, 1e-4),
    direction: Optional[VelocityField] = None,
    scale_w: bool = False,
    nu: float = 1.0,
) -> dict:
    """Amplification ratios over a family of perturbation magnitudes.

    Perturbs u0 by delta * direction, or (``scale_w``) multiplies w by
    1 + delta.  ``spread`` is max/min of the ratios.
    """
    ratios = []
    for delta in deltas:
        if scale_w:
            rep = continuous_dependence_probe(u0, u0, w_fields, [w * (1 + delta) for w in w_fields], dt, nu)
        else:
            if direction is None:
                raise ValueError("a perturbation direction is required")
            rep = continuous_dependence_probe(u0, u0 + direction * delta, w_fields, w_fields, dt, nu)
        ratios.append(rep["ratio"])
    ratios = np.asarray(ratios)
    spread = float(ratios.max() / ratios.min()) if ratios.min() > 0 else float("inf")
    return {"deltas": list(deltas), "ratios": ratios.tolist(), "spread": spread}
