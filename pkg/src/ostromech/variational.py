"""Direct numerical tests of the variational principle.

Paths are smooth curves t -> q(t) with analytic derivatives to any order,
either polynomial (monomial basis) or half-range trigonometric (fourier
basis, frequencies m*pi/(b-a)).  The action of a path is computed by
composite Simpson quadrature of the Lagrangian along the analytic jet
prolongation, or equivalently of the pulled-back unified one-form
(momenta from the Legendre map, extended momentum from the Hamiltonian
section); on holonomic prolongations both integrands agree pointwise up
to round-off, and the pair of routes is kept separate precisely so that
this agreement can be measured.

Compactly supported polynomial bumps provide admissible variations whose
derivatives vanish at the support ends to high order, so boundary terms
drop from the first variation and stationarity can be probed by finite
differences of the action alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import expressions as ex
from .errors import DimensionError, ValidationError
from .dynamics import Trajectory
from .legendre import DerivedSystem

__all__ = [
    "PathRepresentation", "Variation", "discrete_action",
    "action_derivative", "first_variation", "stationarity_check",
    "StationarityReport", "fit_path", "FitResult", "el_along_path",
]

logger = logging.getLogger("ostromech.variational")

_BASES = ("monomial", "fourier")
_DEFAULT_QUAD_POINTS = 512

# condition number of the normal equations above which fitting falls back
# to an orthogonal factorization
_FIT_CONDITION_LIMIT = 1e10


def _basis_matrix(basis, interval, n_coeffs, ts, order=0):
    """Columns are order-th derivatives of the basis functions at ts."""
    ts = np.asarray(ts, dtype=float)
    a, b = interval
    out = np.zeros((ts.size, n_coeffs))
    if basis == "monomial":
        for j in range(n_coeffs):
            if j < order:
                continue
            coeff = 1.0
            for i in range(order):
                coeff *= j - i
            out[:, j] = coeff * ts ** (j - order)
        return out
    # fourier: 1, cos(w1 tau), sin(w1 tau), cos(w2 tau), ... with
    # w_m = m*pi/(b-a) and tau = t - a
    tau = ts - a
    base = np.pi / (b - a)
    if order == 0:
        out[:, 0] = 1.0
    cos_cycle = (np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin)
    sin_cycle = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))
    for j in range(1, n_coeffs):
        m = (j + 1) // 2
        w = m * base
        phase = w * tau
        cycle = cos_cycle if j % 2 else sin_cycle
        out[:, j] = w ** order * cycle[order % 4](phase)
    return out


@dataclass(frozen=True)
class PathRepresentation:
    """A smooth curve per dof with exact derivatives of every order.

    ``coefficients`` has one row per dof.  In the monomial basis row
    entries are ascending polynomial coefficients; in the fourier basis
    they are (constant, cos_1, sin_1, cos_2, ...) for frequencies
    m*pi/(b-a) measured from the left end of the interval.
    """

    basis: str
    coefficients: np.ndarray
    interval: tuple

    def __post_init__(self):
        if self.basis not in _BASES:
            raise ValidationError(f"unknown path basis {self.basis!r}")
        coeffs = np.array(self.coefficients, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs[None, :]
        if coeffs.ndim != 2 or coeffs.shape[1] < 1:
            raise DimensionError("coefficients must be one row per dof")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        a, b = self.interval
        if not b > a:
            raise ValidationError("path interval must have positive length")
        object.__setattr__(self, "interval", (float(a), float(b)))

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def breakpoints(self) -> tuple:
        return ()

    def derivative_values(self, ts, order: int = 0) -> np.ndarray:
        """Order-th time derivative of every dof at the given times."""
        matrix = _basis_matrix(self.basis, self.interval,
                               self.coefficients.shape[1], ts, order)
        return self.coefficients @ matrix.T


@dataclass(frozen=True)
class Variation:
    """A compactly supported polynomial bump on one dof.

    On its support [center - half_width, center + half_width] the bump is
    amplitude * ((t - l)(r - t) / half_width^2)^exponent, normalized to
    peak amplitude at the center, and zero outside.  Derivatives up to
    exponent - 1 vanish at the support ends, so an exponent of k + 1
    makes the variation admissible for an order-k problem.
    """

    dof: int
    center: float
    half_width: float
    exponent: int
    amplitude: float = 1.0

    def __post_init__(self):
        if self.dof < 1:
            raise ValidationError("variation dof index is 1-based")
        if self.half_width <= 0:
            raise ValidationError("variation half_width must be positive")
        if self.exponent < 1:
            raise ValidationError("variation exponent must be at least 1")

    @property
    def support(self) -> tuple:
        return (self.center - self.half_width, self.center + self.half_width)

    def _poly(self):
        left, right = self.support
        rising = npoly.Polynomial([-left, 1.0])
        falling = npoly.Polynomial([right, -1.0])
        bump = (rising * falling) ** self.exponent
        return bump * (self.amplitude / self.half_width ** (2 * self.exponent))

    def derivative_values(self, ts, order: int = 0) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        left, right = self.support
        inside = (ts > left) & (ts < right)
        out = np.zeros(ts.size)
        if np.any(inside):
            poly = self._poly().deriv(order) if order else self._poly()
            out[inside] = poly(ts[inside])
        return out


class _PerturbedPath:
    """A path plus one scaled variation, sharing the path interface."""

    def __init__(self, path, variation, scale):
        self.path = path
        self.variation = variation
        self.scale = scale

    @property
    def n(self):
        return self.path.n

    @property
    def interval(self):
        return self.path.interval

    @property
    def breakpoints(self):
        return tuple(self.variation.support)

    def derivative_values(self, ts, order=0):
        values = self.path.derivative_values(ts, order)
        if self.scale:
            bump = self.variation.derivative_values(ts, order)
            values = values.copy()
            values[self.variation.dof - 1] += self.scale * bump
        return values


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def _segments(interval, breakpoints, panels):
    """Split the interval at interior breakpoints into smooth segments.

    Every segment receives the full panel count: variation bumps have
    derivatives growing like width^-6, so short support segments need
    the resolution far more than their share of the interval suggests.
    """
    a, b = interval
    cuts = sorted(p for p in breakpoints if a < p < b)
    edges = [a] + cuts + [b]
    return [(lo, hi, panels) for lo, hi in zip(edges[:-1], edges[1:])]


def _simpson(f, interval, breakpoints, panels):
    total = 0.0
    for lo, hi, share in _segments(interval, breakpoints, panels):
        ts = np.linspace(lo, hi, 2 * share + 1)
        values = f(ts)
        h = (hi - lo) / (2 * share)
        weights = np.ones(ts.size)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        total += (h / 3.0) * float(weights @ values)
    return total


def _path_env(ds, pathlike, ts, max_order):
    env = {ex.time_var(): np.asarray(ts, dtype=float)}
    derivs = [pathlike.derivative_values(ts, order)
              for order in range(max_order + 1)]
    for a in range(ds.n):
        for i in range(max_order + 1):
            env[ex.jet(a + 1, i)] = derivs[i][a]
    return env


def _lagrangian_integrand(ds, pathlike):
    def f(ts):
        env = _path_env(ds, pathlike, ts, ds.k)
        return np.broadcast_to(ds.model.lagrangian.evaluate(env),
                               np.shape(ts)).astype(float)
    return f


def _cartan_integrand(ds, pathlike):
    k, n = ds.k, ds.n

    def f(ts):
        env = _path_env(ds, pathlike, ts, 2 * k - 1)
        total = np.zeros(np.size(ts))
        for a in range(n):
            for i in range(k):
                p = np.broadcast_to(ds.momenta[a][i].evaluate(env),
                                    np.shape(ts)).astype(float)
                env[ex.momentum(a + 1, i)] = p
                total = total + p * env[ex.jet(a + 1, i + 1)]
        p_section = -ds.hamiltonian.evaluate(env)
        return total + np.broadcast_to(p_section, np.shape(ts))
    return f


def _check_path(ds, pathlike):
    if pathlike.n != ds.n:
        raise DimensionError(
            f"path has {pathlike.n} dofs but the system has {ds.n}")


def discrete_action(ds: DerivedSystem, path, integrand: str = "lagrangian",
                    quad_points: int = _DEFAULT_QUAD_POINTS) -> float:
    """Action of a path by composite Simpson quadrature.

    ``integrand`` selects the Lagrangian along the prolonged path or the
    pullback of the unified one-form (``"cartan"``), with momenta from the
    Legendre map and the extended momentum from the Hamiltonian section.
    ``quad_points`` is the panel count; doubling it reduces the
    quadrature error of smooth integrands by about 16x.
    """
    _check_path(ds, path)
    if quad_points < 2:
        raise ValidationError("quad_points must be at least 2")
    if integrand == "lagrangian":
        f = _lagrangian_integrand(ds, path)
    elif integrand == "cartan":
        f = _cartan_integrand(ds, path)
    else:
        raise ValidationError(f"unknown integrand {integrand!r}")
    return _simpson(f, path.interval, getattr(path, "breakpoints", ()),
                    quad_points)


def _variation_inside(path, variation):
    a, b = path.interval
    left, right = variation.support
    if not (a < left and right < b):
        raise ValidationError(
            f"variation support [{left}, {right}] must lie strictly inside "
            f"the path interval [{a}, {b}]")
    if not 1 <= variation.dof <= path.n:
        raise ValidationError(f"variation dof {variation.dof} out of range")


def action_derivative(ds: DerivedSystem, path, variation: Variation,
                      epsilon: float = 1e-5,
                      quad_points: int = _DEFAULT_QUAD_POINTS,
                      integrand: str = "lagrangian") -> float:
    """Directional derivative of the action along a variation.

    Central finite difference in the variation scale.  When the two
    one-sided differences disagree by more than 10 percent the result is
    Richardson-extrapolated from a second central difference at half the
    scale.  All action evaluations share one quadrature grid (split at
    the variation's support ends) so quadrature error cancels in the
    differences.
    """
    _check_path(ds, path)
    _variation_inside(path, variation)
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")

    def action(scale):
        return discrete_action(ds, _PerturbedPath(path, variation, scale),
                               integrand, quad_points)

    s_plus = action(epsilon)
    s_minus = action(-epsilon)
    s_zero = action(0.0)
    central = (s_plus - s_minus) / (2.0 * epsilon)
    d_plus = (s_plus - s_zero) / epsilon
    d_minus = (s_zero - s_minus) / epsilon
    disagreement = abs(d_plus - d_minus)
    if disagreement > 0.1 * max(abs(d_plus), abs(d_minus)):
        half = (action(0.5 * epsilon) - action(-0.5 * epsilon)) / epsilon
        return (4.0 * half - central) / 3.0
    return central


def first_variation(ds: DerivedSystem, path, variation: Variation,
                    quad_points: int = _DEFAULT_QUAD_POINTS) -> float:
    """The boundary-free first variation, integral of el * v.

    The variation's derivatives vanish to high order at its support ends,
    so integration by parts leaves only the Euler-Lagrange factor; this is
    the analytic value that :func:`action_derivative` approximates.
    """
    _check_path(ds, path)
    _variation_inside(path, variation)
    k = ds.k
    a_index = variation.dof - 1

    def f(ts):
        env = _path_env(ds, path, ts, 2 * k)
        el = np.broadcast_to(ds.el[a_index].evaluate(env),
                             np.shape(ts)).astype(float)
        return el * variation.derivative_values(ts)

    return _simpson(f, variation.support, (), quad_points)


@dataclass
class StationarityReport:
    """Result of probing a path with random admissible variations."""

    stationary: bool
    action: float
    max_abs_derivative: float
    tolerance: float
    derivatives: list = field(default_factory=list)
    variations: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self):
        return {
            "stationary": self.stationary,
            "action": self.action,
            "max_abs_derivative": self.max_abs_derivative,
            "tolerance": self.tolerance,
            "n_variations": len(self.derivatives),
            "derivatives": list(self.derivatives),
            "seed": self.seed,
        }


def stationarity_check(ds: DerivedSystem, path, n_variations: int = 20,
                       tol: float = 1e-6, seed: int = 0,
                       quad_points: int = _DEFAULT_QUAD_POINTS,
                       jobs: int = 1) -> StationarityReport:
    """Probe stationarity of the action with seeded random bump variations.

    The path passes when max |dS| <= tol * (1 + |S|) over all drawn
    variations.  Bump exponents are k + 1 so every variation is admissible
    for the order of the problem.  ``jobs`` evaluates the action
    derivatives in a thread pool; variations are always drawn up front
    from the seeded generator, so results do not depend on the pool size.
    """
    _check_path(ds, path)
    if n_variations < 1:
        raise ValidationError("at least one variation is required")
    rng = np.random.default_rng(seed)
    a, b = path.interval
    span = b - a
    margin = 1e-9 * span
    variations = []
    for _ in range(n_variations):
        dof = int(rng.integers(1, ds.n + 1))
        half_width = float(rng.uniform(0.05, 0.15)) * span
        center = float(rng.uniform(a + half_width + margin,
                                   b - half_width - margin))
        variations.append(Variation(dof=dof, center=center,
                                    half_width=half_width,
                                    exponent=ds.k + 1))

    def derivative_of(variation):
        return action_derivative(ds, path, variation,
                                 quad_points=quad_points)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            derivatives = list(pool.map(derivative_of, variations))
    else:
        derivatives = [derivative_of(v) for v in variations]
    action = discrete_action(ds, path, "lagrangian", quad_points)
    max_abs = max(abs(d) for d in derivatives)
    return StationarityReport(
        stationary=max_abs <= tol * (1.0 + abs(action)),
        action=action, max_abs_derivative=max_abs, tolerance=tol,
        derivatives=derivatives, variations=variations, seed=seed)


def el_along_path(ds: DerivedSystem, path, ts) -> np.ndarray:
    """Euler-Lagrange residuals of an analytic path, one row per dof."""
    _check_path(ds, path)
    env = _path_env(ds, path, ts, 2 * ds.k)
    return np.vstack([
        np.broadcast_to(e.evaluate(env), np.shape(ts)).astype(float)
        for e in ds.el])


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


@dataclass
class FitResult:
    """A fitted path plus residual diagnostics.

    ``max_residual`` covers the fitted positions; ``derivative_residuals``
    compares the analytic derivatives of the fit against the recorded
    higher jets, orders 1 .. 2k-1.  ``used_orthogonal`` reports the
    fallback from the normal equations to an orthogonal factorization.
    """

    path: PathRepresentation
    max_residual: float
    derivative_residuals: list
    condition: float
    used_orthogonal: bool

    def to_dict(self):
        return {
            "basis": self.path.basis,
            "n_coefficients": int(self.path.coefficients.shape[1]),
            "max_residual": self.max_residual,
            "derivative_residuals": list(self.derivative_residuals),
            "condition": self.condition,
            "used_orthogonal": self.used_orthogonal,
        }


def fit_path(traj: Trajectory, basis: str, n_coeffs: int) -> FitResult:
    """Least-squares fit of the position samples of a trajectory.

    Only the order-0 jets are fitted; the fit's analytic derivatives are
    then compared against the recorded higher jets and reported.  Normal
    equations are used while well conditioned; otherwise the solve falls
    back to an orthogonal factorization with a logged warning.
    """
    if basis not in _BASES:
        raise ValidationError(f"unknown path basis {basis!r}")
    npts = traj.grid.size
    if not 1 <= n_coeffs <= npts:
        raise ValidationError(
            f"n_coeffs must lie in 1..{npts} (grid points), got {n_coeffs}")
    interval = (float(traj.grid[0]), float(traj.grid[-1]))
    design = _basis_matrix(basis, interval, n_coeffs, traj.grid)
    targets = np.column_stack([
        traj.states[:, a * 2 * traj.k] for a in range(traj.n)])

    gram = design.T @ design
    condition = float(np.linalg.cond(gram))
    used_orthogonal = condition > _FIT_CONDITION_LIMIT
    if used_orthogonal:
        logger.warning(
            "normal equations are ill-conditioned (cond=%.3e); "
            "falling back to an orthogonal factorization", condition)
        coeffs, *_ = np.linalg.lstsq(design, targets, rcond=None)
    else:
        coeffs = np.linalg.solve(gram, design.T @ targets)
    path = PathRepresentation(basis, coeffs.T, interval)

    fitted = path.derivative_values(traj.grid)
    max_residual = 0.0
    for a in range(traj.n):
        defect = fitted[a] - traj.states[:, a * 2 * traj.k]
        max_residual = max(max_residual, float(np.max(np.abs(defect))))
    derivative_residuals = []
    for order in range(1, 2 * traj.k):
        values = path.derivative_values(traj.grid, order)
        worst = 0.0
        for a in range(traj.n):
            defect = values[a] - traj.states[:, a * 2 * traj.k + order]
            worst = max(worst, float(np.max(np.abs(defect))))
        derivative_residuals.append(worst)
    return FitResult(path=path, max_residual=max_residual,
                     derivative_residuals=derivative_residuals,
                     condition=condition, used_orthogonal=used_orthogonal)
