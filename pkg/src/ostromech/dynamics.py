"""Numerical integration and verification of trajectories.

Two integrators are provided behind one interface: the classic fixed-step
fourth-order Runge-Kutta scheme and an adaptive Runge-Kutta-Fehlberg 4(5)
pair with local extrapolation (the fifth-order solution is propagated, the
embedded fourth-order solution drives the step controller).  State vectors
are the dof-major flattened jets, with the momenta appended for unified
integration.

Verification differentiates the recorded time series with finite
differences built from Fornberg weights on sliding stencils, fourth-order
accurate at every grid point including the ends, and checks the recorded
states against the equations of motion, the momentum equations in
Hamiltonian form, energy conservation, and holonomy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex
from .errors import (
    ConvergenceError,
    DimensionError,
    OffConstraintError,
    SingularHessianError,
    TrajectoryFormatError,
    ValidationError,
)
from .legendre import DerivedSystem, legendre_map
from .systems import JetPoint, UnifiedPoint
from .unified import constraint_residuals, constraint_tolerance

__all__ = [
    "Trajectory", "integrate", "integrate_unified", "lagrangian_rhs",
    "ostrogradsky_energy", "energy_series", "verify_trajectory",
    "VerificationReport", "save_trajectory_csv", "load_trajectory_csv",
    "fd_derivative",
]

logger = logging.getLogger("ostromech.dynamics")

_DEFAULT_RTOL = 1e-9
_DEFAULT_ATOL = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """Sampled states on a strictly increasing time grid.

    ``layout`` is ``"jet"`` (states are flattened jets) or ``"unified"``
    (momenta appended).  ``meta`` records the integrator and its
    tolerances; ``meta["tolerance"]`` is the scalar used by downstream
    tolerance-relative checks (max of atol and rtol for the adaptive
    method, the fourth power of the step for fixed-step RK4).
    """

    grid: np.ndarray
    states: np.ndarray
    layout: str
    k: int
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if grid.ndim != 1 or states.ndim != 2 or states.shape[0] != grid.size:
            raise DimensionError("trajectory needs matching grid and state rows")
        if grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValidationError("trajectory grid must be strictly increasing")
        expected = {"jet": 2 * self.k * self.n,
                    "unified": 3 * self.k * self.n}.get(self.layout)
        if expected is None:
            raise ValidationError(f"unknown trajectory layout {self.layout!r}")
        if states.shape[1] != expected:
            raise DimensionError(
                f"{self.layout} states must have width {expected}, got "
                f"{states.shape[1]}")
        grid.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)

    def jet_point(self, row: int) -> JetPoint:
        jets = self.states[row, :2 * self.k * self.n]
        return JetPoint.from_state(self.grid[row], jets, self.k, self.n)

    def unified_point(self, row: int) -> UnifiedPoint:
        if self.layout != "unified":
            raise ValidationError("trajectory has no momenta")
        return UnifiedPoint.from_state(self.grid[row], self.states[row],
                                       self.k, self.n)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------


class _JetRHS:
    """Time derivative of the flattened jet state."""

    def __init__(self, ds: DerivedSystem):
        self.ds = ds
        k, n = ds.k, ds.n
        self.k, self.n = k, n
        self.tref = ex.time_var()
        self.jet_refs = [ex.jet(a + 1, i)
                         for a in range(n) for i in range(2 * k)]

    def env_of(self, t, y):
        env = {self.tref: t}
        for ref, value in zip(self.jet_refs, y):
            env[ref] = value
        return env

    def __call__(self, t, y):
        k, n = self.k, self.n
        env = self.env_of(t, y[:2 * k * n])
        try:
            accel = self.ds.acceleration(env)
        except SingularHessianError as err:
            err.state = np.array(y)
            raise
        ydot = np.empty(2 * k * n)
        for a in range(n):
            base = a * 2 * k
            ydot[base:base + 2 * k - 1] = y[base + 1:base + 2 * k]
            ydot[base + 2 * k - 1] = accel[a]
        return ydot


class _UnifiedRHS(_JetRHS):
    """Jet shift plus the momentum equations dp^0 = dL/dq_0 and
    dp^i = dL/dq_i - p^{i-1} (the sign convention dp = -dH/dq)."""

    def __call__(self, t, y):
        k, n = self.k, self.n
        jets = y[:2 * k * n]
        env = self.env_of(t, jets)
        try:
            accel = self.ds.acceleration(env)
        except SingularHessianError as err:
            err.state = np.array(y)
            raise
        ydot = np.empty(3 * k * n)
        for a in range(n):
            base = a * 2 * k
            ydot[base:base + 2 * k - 1] = jets[base + 1:base + 2 * k]
            ydot[base + 2 * k - 1] = accel[a]
        partials = self.ds.lagrangian_partials
        moff = 2 * k * n
        for a in range(n):
            base = moff + a * k
            ydot[base] = partials[a][0].evaluate(env)
            for i in range(1, k):
                ydot[base + i] = (partials[a][i].evaluate(env)
                                  - y[base + i - 1])
        return ydot


def lagrangian_rhs(ds: DerivedSystem, t: float, state) -> np.ndarray:
    """Time derivative of a flattened jet state.

    Each jet order advances to its successor; the top order comes from the
    Euler-Lagrange linear solve against the Hessian.  Raises
    :class:`SingularHessianError` at points where that solve is not
    possible.
    """
    y = np.asarray(state, dtype=float)
    if y.shape != (2 * ds.k * ds.n,):
        raise DimensionError(
            f"jet state must have length {2 * ds.k * ds.n}, got {y.shape}")
    return _JetRHS(ds)(float(t), y)


# ---------------------------------------------------------------------------
# integrators
# ---------------------------------------------------------------------------

# Runge-Kutta-Fehlberg 4(5) tableau
_RKF_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_RKF_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_RKF_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0,
           -9.0 / 50.0, 2.0 / 55.0)
_RKF_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0)


def _run_rk4(f, t0, y0, t_end, step, max_steps):
    span = t_end - t0
    nsteps = max(1, round(span / step))
    if nsteps > max_steps:
        raise ValidationError(
            f"fixed step {step} needs {nsteps} steps, above the limit "
            f"{max_steps}")
    h = span / nsteps
    grid = t0 + h * np.arange(nsteps + 1)
    grid[-1] = t_end
    states = np.empty((nsteps + 1, np.size(y0)))
    y = np.array(y0, dtype=float)
    states[0] = y
    for j in range(nsteps):
        t = grid[j]
        try:
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
        except SingularHessianError as err:
            err.last_good_time = t
            raise
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[j + 1] = y
    meta = {"method": "rk4", "step": h, "steps": nsteps, "rejected": 0,
            "tolerance": h ** 4}
    return grid, states, meta


def _run_rkf45(f, t0, y0, t_end, rtol, atol, max_step, first_step, max_steps):
    t = t0
    y = np.array(y0, dtype=float)
    grid = [t]
    states = [y.copy()]
    span = t_end - t0
    h = first_step if first_step else min(span / 100.0, max_step)
    accepted = rejected = 0
    stages = [None] * 6
    while t < t_end:
        h = min(h, max_step)
        # land exactly on t_end, stretching up to 30% so the final step
        # never degenerates into a sliver (sliver grids ruin the finite
        # differencing done by verification)
        last = t + 1.3 * h >= t_end
        if last:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            raise ConvergenceError(
                f"adaptive step size underflow at t={t!r}")
        try:
            stages[0] = f(t, y)
            for s in range(1, 6):
                ys = y + h * sum(c * stages[j]
                                 for j, c in enumerate(_RKF_A[s]))
                stages[s] = f(t + _RKF_C[s] * h, ys)
        except SingularHessianError as err:
            err.last_good_time = t
            raise
        y5 = y + h * sum(b * ks for b, ks in zip(_RKF_B5, stages) if b)
        y4 = y + h * sum(b * ks for b, ks in zip(_RKF_B4, stages) if b)
        err = np.abs(y5 - y4)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        ratio = float(np.max(err / scale))
        if ratio <= 1.0:
            t = t_end if last else t + h
            y = y5
            grid.append(t)
            states.append(y.copy())
            accepted += 1
        else:
            rejected += 1
        if accepted + rejected > max_steps:
            raise ConvergenceError(
                f"adaptive integrator exceeded {max_steps} steps")
        factor = 5.0 if ratio == 0.0 else 0.8 * ratio ** -0.2
        h *= min(5.0, max(0.2, factor))
    meta = {"method": "rk45", "rtol": rtol, "atol": atol,
            "steps": accepted, "rejected": rejected,
            "max_step": max_step, "tolerance": max(rtol, atol)}
    return np.array(grid), np.array(states), meta


def _integrate(f, width, t0, y0, t_end, method, step, rtol, atol, max_step,
               first_step, max_steps):
    if t_end <= t0:
        raise ValidationError("t_end must lie after the initial time")
    if method == "rk4":
        if step is None or step <= 0:
            raise ValidationError("rk4 integration needs a positive step")
        return _run_rk4(f, t0, y0, t_end, step, max_steps)
    if method == "rk45":
        return _run_rkf45(f, t0, y0, t_end, rtol, atol, max_step, first_step,
                          max_steps)
    raise ValidationError(f"unknown integration method {method!r}")


def integrate(ds: DerivedSystem, init: JetPoint, t_end: float,
              method: str = "rk45", step: float | None = None,
              rtol: float = _DEFAULT_RTOL, atol: float = _DEFAULT_ATOL,
              max_step: float = np.inf, first_step: float | None = None,
              max_steps: int = 1_000_000) -> Trajectory:
    """Integrate the Euler-Lagrange dynamics from a full jet point.

    The initial point must carry orders 0 .. 2k-1.  Regularity of the
    Hessian is enforced at every evaluation point; a singular Hessian
    aborts with the failing time and state attached to the error.
    """
    k, n = ds.k, ds.n
    if init.n != n or init.orders != 2 * k:
        raise DimensionError(
            f"initial jet point must have shape {(n, 2 * k)}, got "
            f"{init.q.shape}")
    f = _JetRHS(ds)
    grid, states, meta = _integrate(
        f, 2 * k * n, init.t, init.to_state(), t_end, method, step, rtol,
        atol, max_step, first_step, max_steps)
    return Trajectory(grid, states, "jet", k, n, meta)


def integrate_unified(ds: DerivedSystem, init: UnifiedPoint, t_end: float,
                      method: str = "rk45", step: float | None = None,
                      rtol: float = _DEFAULT_RTOL, atol: float = _DEFAULT_ATOL,
                      max_step: float = np.inf, first_step: float | None = None,
                      max_steps: int = 1_000_000) -> Trajectory:
    """Integrate the unified dynamics from an on-constraint point.

    The initial point must satisfy the momentum constraint chain within
    its scale-aware tolerance, otherwise :class:`OffConstraintError` is
    raised.  After integration the constraint residual along the whole
    trajectory is measured; drift beyond 10x the integrator tolerance is
    logged and flagged in ``meta["constraint_drift_warning"]``.
    """
    k, n = ds.k, ds.n
    residuals = constraint_residuals(ds, init)
    worst = max(float(np.max(np.abs(r))) for r in residuals)
    tol = constraint_tolerance(init)
    if worst > tol:
        raise OffConstraintError(
            f"initial point violates the momentum constraints (residual "
            f"{worst:.3e} > tolerance {tol:.3e})", residuals=residuals)
    f = _UnifiedRHS(ds)
    grid, states, meta = _integrate(
        f, 3 * k * n, init.t, init.to_state(), t_end, method, step, rtol,
        atol, max_step, first_step, max_steps)
    traj = Trajectory(grid, states, "unified", k, n, meta)

    drift = float(np.max(np.abs(_constraint_series(ds, traj))))
    meta["max_constraint_residual"] = drift
    threshold = 10.0 * meta["tolerance"]
    meta["constraint_drift_warning"] = drift > threshold
    if meta["constraint_drift_warning"]:
        logger.warning(
            "unified trajectory drifted off the constraints "
            "(residual %.3e > %.3e)", drift, threshold)
    return traj


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------


def ostrogradsky_energy(ds: DerivedSystem, jp: JetPoint) -> float:
    """E = sum p_A^i q_{i+1}^A - L with momenta from the Legendre map."""
    momenta = legendre_map(ds, jp)
    k, n = ds.k, ds.n
    total = 0.0
    for a in range(n):
        for i in range(k):
            total += momenta[a, i] * jp.q[a, i + 1]
    env = {ex.time_var(): jp.t}
    for a in range(n):
        for i in range(jp.orders):
            env[ex.jet(a + 1, i)] = jp.q[a, i]
    return float(total - ds.model.lagrangian.evaluate(env))


def _array_env(ds, traj):
    """Vectorized bindings over the whole grid."""
    k, n = ds.k, ds.n
    env = {ex.time_var(): traj.grid}
    for a in range(n):
        for i in range(2 * k):
            env[ex.jet(a + 1, i)] = traj.states[:, a * 2 * k + i]
    if traj.layout == "unified":
        moff = 2 * k * n
        for a in range(n):
            for i in range(k):
                env[ex.momentum(a + 1, i)] = traj.states[:, moff + a * k + i]
    return env


def energy_series(ds: DerivedSystem, traj: Trajectory) -> np.ndarray:
    """Ostrogradsky energy at every grid point (via the Legendre map)."""
    k, n = ds.k, ds.n
    env = _array_env(ds, traj)
    total = np.zeros(traj.grid.size)
    for a in range(n):
        for i in range(k):
            p = ds.momenta[a][i].evaluate(env)
            total = total + p * traj.states[:, a * 2 * k + i + 1]
    return total - ds.model.lagrangian.evaluate(env)


def _constraint_series(ds, traj):
    """Constraint residuals p - (closed-form momenta) along a trajectory."""
    k, n = ds.k, ds.n
    env = _array_env(ds, traj)
    moff = 2 * k * n
    rows = []
    for a in range(n):
        for i in range(k):
            rows.append(traj.states[:, moff + a * k + i]
                        - ds.momenta[a][i].evaluate(env))
    return np.array(rows)


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _fornberg_weights(z, x, m):
    """Finite-difference weights for derivatives 0..m at z on nodes x."""
    npts = len(x)
    c = np.zeros((npts, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for v in range(mn, 0, -1):
                    c[i, v] = c1 * (v * c[i - 1, v - 1] - c5 * c[i - 1, v]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for v in range(mn, 0, -1):
                c[j, v] = (c4 * c[j, v] - v * c[j, v - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def fd_derivative(grid, values, order: int = 1) -> np.ndarray:
    """Differentiate sampled values on an arbitrary strictly increasing grid.

    Uses sliding Fornberg stencils of order + 4 points, which gives
    fourth-order accuracy at interior and boundary points alike (the
    boundary stencils are one-sided but keep the same width).
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    npts = grid.size
    width = min(order + 4, npts)
    if width <= order:
        raise ValidationError(
            f"grid of {npts} points is too short for derivative order {order}")
    out = np.empty(npts)
    for i in range(npts):
        start = min(max(i - width // 2, 0), npts - width)
        w = _fornberg_weights(grid[i], grid[start:start + width], order)
        out[i] = w[:, order] @ values[start:start + width]
    return out


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    """Direct numerical checks of a recorded trajectory.

    All residuals are maxima over the grid.  ``el_residual`` measures the
    Euler-Lagrange defect, with the outer total derivatives realized as
    finite differences of the recorded partial-derivative series.
    ``hamilton_q_residual`` and ``hamilton_p_residual`` are the residuals
    of dq_i/dt = dH/dp^i and dp^i/dt = -dH/dq_i (unified trajectories
    only, None otherwise), ``momenta_residual`` the momentum equations in
    Lagrangian form.  ``energy_drift`` is None for non-autonomous systems.
    Holonomy passes when the differentiated q_i series match q_{i+1}
    within 10x the integrator tolerance plus the truncation floor of the
    differencing on the recorded grid.
    """

    el_residual: float
    holonomy_defect: float
    holonomy_tolerance: float | None
    holonomy_ok: bool | None
    energy_drift: float | None
    momenta_residual: float | None
    hamilton_q_residual: float | None
    hamilton_p_residual: float | None
    layout: str
    n_points: int

    def to_dict(self):
        return {
            "el_residual": self.el_residual,
            "holonomy_defect": self.holonomy_defect,
            "holonomy_tolerance": self.holonomy_tolerance,
            "holonomy_ok": self.holonomy_ok,
            "energy_drift": self.energy_drift,
            "momenta_residual": self.momenta_residual,
            "hamilton_q_residual": self.hamilton_q_residual,
            "hamilton_p_residual": self.hamilton_p_residual,
            "layout": self.layout,
            "n_points": self.n_points,
        }


def verify_trajectory(ds: DerivedSystem, traj: Trajectory,
                      tolerance: float | None = None) -> VerificationReport:
    """Check a trajectory directly against the equations it should satisfy.

    ``tolerance`` overrides the integrator tolerance recorded in the
    trajectory metadata for the holonomy verdict; when neither is
    available the holonomy defect is reported without a verdict.
    """
    k, n = ds.k, ds.n
    if traj.k != k or traj.n != n:
        raise DimensionError("trajectory dimensions do not match the system")
    grid = traj.grid
    env = _array_env(ds, traj)

    # Euler-Lagrange defect: alternating finite-difference derivatives of
    # the recorded dL/dq_i series
    el_max = 0.0
    for a in range(n):
        residual = np.zeros(grid.size)
        for i in range(k + 1):
            series = np.broadcast_to(
                ds.lagrangian_partials[a][i].evaluate(env), grid.shape).astype(float)
            term = series if i == 0 else fd_derivative(grid, series, order=i)
            residual = residual + (-1.0) ** i * term
        el_max = max(el_max, float(np.max(np.abs(residual))))

    # holonomy: differentiated q_i must reproduce q_{i+1}
    holo_max = 0.0
    for a in range(n):
        for i in range(2 * k - 1):
            d = fd_derivative(grid, traj.states[:, a * 2 * k + i])
            defect = d - traj.states[:, a * 2 * k + i + 1]
            holo_max = max(holo_max, float(np.max(np.abs(defect))))
    tol = tolerance if tolerance is not None else traj.meta.get("tolerance")
    if tol is None:
        holo_tol = None
    else:
        # the verdict cannot be sharper than the truncation floor of the
        # fourth-order differencing on this grid
        floor = float(np.max(np.diff(grid))) ** 4 * max(
            1.0, float(np.max(np.abs(traj.states[:, :2 * k * n]))))
        holo_tol = 10.0 * float(tol) + floor
    holo_ok = None if holo_tol is None else holo_max <= holo_tol

    energy_drift = None
    if ds.model.autonomous:
        energies = energy_series(ds, traj)
        energy_drift = float(np.max(np.abs(energies - energies[0])))

    momenta_residual = None
    hq_residual = None
    hp_residual = None
    if traj.layout == "unified":
        moff = 2 * k * n
        momenta_residual = 0.0
        hq_residual = 0.0
        hp_residual = 0.0
        for a in range(n):
            for i in range(k):
                pcol = traj.states[:, moff + a * k + i]
                pdot = fd_derivative(grid, pcol)
                rhs = ds.lagrangian_partials[a][i].evaluate(env)
                rhs = np.broadcast_to(rhs, grid.shape).astype(float)
                if i > 0:
                    rhs = rhs - traj.states[:, moff + a * k + i - 1]
                momenta_residual = max(momenta_residual,
                                       float(np.max(np.abs(pdot - rhs))))
                # Hamilton form: dp^i/dt + dH/dq_i = 0
                dh_dq = ds.hamiltonian_partials.get(ex.jet(a + 1, i))
                dh_dq = (np.zeros(grid.size) if dh_dq is None
                         else np.broadcast_to(dh_dq.evaluate(env),
                                              grid.shape).astype(float))
                hp_residual = max(hp_residual,
                                  float(np.max(np.abs(pdot + dh_dq))))
                # Hamilton form: dq_i/dt - dH/dp^i = 0
                qdot = fd_derivative(grid, traj.states[:, a * 2 * k + i])
                dh_dp = ds.hamiltonian_partials.get(ex.momentum(a + 1, i))
                dh_dp = (np.zeros(grid.size) if dh_dp is None
                         else np.broadcast_to(dh_dp.evaluate(env),
                                              grid.shape).astype(float))
                hq_residual = max(hq_residual,
                                  float(np.max(np.abs(qdot - dh_dp))))

    return VerificationReport(
        el_residual=el_max,
        holonomy_defect=holo_max,
        holonomy_tolerance=holo_tol,
        holonomy_ok=holo_ok,
        energy_drift=energy_drift,
        momenta_residual=momenta_residual,
        hamilton_q_residual=hq_residual,
        hamilton_p_residual=hp_residual,
        layout=traj.layout,
        n_points=int(grid.size),
    )


# ---------------------------------------------------------------------------
# trajectory files
# ---------------------------------------------------------------------------


def _column_names(k, n, layout):
    names = ["t"]
    for a in range(1, n + 1):
        names.extend(f"q_{i}_{a}" for i in range(2 * k))
    if layout == "unified":
        for a in range(1, n + 1):
            names.extend(f"p_{i}_{a}" for i in range(k))
    return names


def save_trajectory_csv(traj: Trajectory, path):
    """Write a trajectory as CSV with 17-significant-digit floats."""
    names = _column_names(traj.k, traj.n, traj.layout)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for t, row in zip(traj.grid, traj.states):
            cells = [f"{t:.17g}"] + [f"{v:.17g}" for v in row]
            fh.write(",".join(cells) + "\n")


def load_trajectory_csv(path, k: int | None = None,
                        n: int | None = None) -> Trajectory:
    """Read a trajectory CSV written by :func:`save_trajectory_csv`.

    The layout and dimensions are recovered from the header and, when
    ``k``/``n`` are given, validated against them.  Any malformed header,
    ragged row, or non-numeric cell raises
    :class:`TrajectoryFormatError`.
    """
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise TrajectoryFormatError(f"{path}: empty trajectory file")
    header = lines[0].split(",")
    jet_cols = [c for c in header if c.startswith("q_")]
    mom_cols = [c for c in header if c.startswith("p_")]
    layout = "unified" if mom_cols else "jet"
    try:
        orders = 1 + max(int(c.split("_")[1]) for c in jet_cols)
        dofs = max(int(c.split("_")[2]) for c in jet_cols)
    except (ValueError, IndexError):
        raise TrajectoryFormatError(f"{path}: malformed header {header!r}") from None
    if orders % 2:
        raise TrajectoryFormatError(
            f"{path}: jet columns cover {orders} orders, expected an even count")
    file_k, file_n = orders // 2, dofs
    if (k is not None and k != file_k) or (n is not None and n != file_n):
        raise TrajectoryFormatError(
            f"{path}: file is for k={file_k}, n={file_n} but the system has "
            f"k={k}, n={n}")
    if header != _column_names(file_k, file_n, layout):
        raise TrajectoryFormatError(
            f"{path}: header does not match the expected column layout")
    width = len(header)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise TrajectoryFormatError(
                f"{path}:{lineno}: expected {width} columns, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise TrajectoryFormatError(
                f"{path}:{lineno}: non-numeric cell") from None
    data = np.array(rows)
    if data.shape[0] < 2:
        raise TrajectoryFormatError(f"{path}: a trajectory needs at least two rows")
    return Trajectory(data[:, 0], data[:, 1:], layout, file_k, file_n,
                      meta={"source": str(path), "tolerance": None})
