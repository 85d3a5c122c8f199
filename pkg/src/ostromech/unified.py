"""Premultisymplectic structure and dynamics on the unified space.

The unified space of a k-th order system with n dofs has dimension
3kn + 1 with coordinates ordered time-first, then jets dof-major
(q_0^1 .. q_{2k-1}^1, q_0^2, ...), then momenta dof-major
(p_1^0 .. p_1^{k-1}, p_2^0, ...).

With H = -L + sum p_A^i q_{i+1}^A the closed two-form is

    Omega = sum dq_i^A ^ dp_A^i + dH ^ dt,

whose matrix has the +1/-1 pairing blocks between q_i and p^i (levels
i < k) and carries the partial derivatives of H in the dt row and column.
A vector field X with dt-component 1 (the gauge used throughout) that is
a semispray and annihilates Omega on the momentum constraint has

    X = d/dt + q_{i+1}^A d/dq_i^A + F_{2k-1}^A d/dq_{2k-1}^A
        + G_A^i d/dp_A^i,
    G_A^0 = dL/dq_0^A,      G_A^i = dL/dq_i^A - p_A^{i-1},
    (-1)^k W_AB F_{2k-1}^B + (reduced Euler-Lagrange terms) = 0,

equivalently G_A^i = -dH/dq_i^A and q_{i+1}^A = dH/dp_A^i, the sign
convention this package uses for the momentum equations throughout.

Two independent routes to X are provided: :func:`solve_unified_vf`
assembles and solves the linear system built from the numeric two-form
matrix plus the tangency rows, while :func:`explicit_semispray` evaluates
the closed-form components.  They must agree at regular on-constraint
points; the solver route is the one that would reveal a sign or ordering
defect in the matrix assembly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import expressions as ex
from .errors import (
    OffConstraintError,
    SingularHessianError,
    ValidationError,
)
from .legendre import DerivedSystem, is_singular
from .systems import UnifiedPoint, unified_bindings

__all__ = [
    "unified_coordinates", "coordinate_index", "TwoFormMatrix",
    "SemisprayVector", "coupling", "hamiltonian_section_p",
    "omega_r_matrix", "constraint_residuals", "constraint_tolerance",
    "explicit_semispray", "solve_unified_vf", "kernel_check", "KernelReport",
]

logger = logging.getLogger("ostromech.unified")

# condition number above which the vector-field solve logs a warning
_CONDITION_WARN = 1e12


def unified_coordinates(k: int, n: int):
    """Coordinates of the unified space in canonical order."""
    coords = [ex.time_var()]
    for a in range(1, n + 1):
        coords.extend(ex.jet(a, i) for i in range(2 * k))
    for a in range(1, n + 1):
        coords.extend(ex.momentum(a, i) for i in range(k))
    return coords


def coordinate_index(k: int, n: int) -> dict:
    return {ref: i for i, ref in enumerate(unified_coordinates(k, n))}


def _check_point(ds: DerivedSystem, up: UnifiedPoint):
    k, n = ds.k, ds.n
    if up.jet.n != n or up.jet.orders != 2 * k or up.momenta.shape != (n, k):
        raise ValidationError(
            f"point does not match the system: expected jets {(n, 2 * k)} "
            f"and momenta {(n, k)}, got jets {up.jet.q.shape} and momenta "
            f"{up.momenta.shape}")


@dataclass(frozen=True)
class TwoFormMatrix:
    """Numeric matrix of the unified two-form at a point.

    ``entries[i, j]`` is Omega applied to the i-th and j-th coordinate
    directions; the matrix is exactly antisymmetric by construction.
    """

    entries: np.ndarray
    coords: tuple

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def entry(self, row: ex.VarRef, col: ex.VarRef) -> float:
        index = {ref: i for i, ref in enumerate(self.coords)}
        return float(self.entries[index[row], index[col]])


@dataclass(frozen=True)
class SemisprayVector:
    """A vector field value at a point of the unified space.

    Components follow the canonical coordinate ordering; the time
    component is the transversality gauge and equals 1 for every solved
    field.  ``condition`` reports the condition number of the linear
    system when the vector came from the solver route.
    """

    components: np.ndarray
    coords: tuple
    condition: float = 0.0

    def __post_init__(self):
        components = np.asarray(self.components, dtype=float)
        components.flags.writeable = False
        object.__setattr__(self, "components", components)

    @property
    def time_component(self) -> float:
        return float(self.components[0])

    def component(self, ref: ex.VarRef) -> float:
        index = {r: i for i, r in enumerate(self.coords)}
        return float(self.components[index[ref]])


def coupling(up: UnifiedPoint) -> float:
    """The pairing function p + sum p_A^i q_{i+1}^A at an extended point."""
    if up.p_ext is None:
        raise ValidationError("coupling needs the extended momentum coordinate")
    n, k = up.momenta.shape
    if up.jet.orders < k + 1:
        raise ValidationError("jet point must carry orders up to k")
    total = up.p_ext
    for a in range(n):
        for i in range(k):
            total += up.momenta[a, i] * up.jet.q[a, i + 1]
    return float(total)


def hamiltonian_section_p(ds: DerivedSystem, up: UnifiedPoint) -> float:
    """Extended momentum selected by the Hamiltonian section, p = -H.

    Substituting this value makes :func:`coupling` equal the Lagrangian at
    the point, which is the defining property of the section.
    """
    _check_point(ds, up)
    return -ds.hamiltonian.evaluate(unified_bindings(up))


def omega_r_matrix(ds: DerivedSystem, up: UnifiedPoint) -> TwoFormMatrix:
    """Numeric two-form matrix at a point."""
    _check_point(ds, up)
    k, n = ds.k, ds.n
    coords = unified_coordinates(k, n)
    index = {ref: i for i, ref in enumerate(coords)}
    env = unified_bindings(up)
    dim = 3 * k * n + 1
    m = np.zeros((dim, dim))
    for a in range(1, n + 1):
        for i in range(k):
            r, c = index[ex.jet(a, i)], index[ex.momentum(a, i)]
            m[r, c] += 1.0
            m[c, r] -= 1.0
    for ref, partial in ds.hamiltonian_partials.items():
        value = partial.evaluate(env)
        r = index[ref]
        m[r, 0] += value
        m[0, r] -= value
    return TwoFormMatrix(m, tuple(coords))


def constraint_tolerance(up: UnifiedPoint) -> float:
    """Scale-aware tolerance for membership in the constraint manifold."""
    scale = float(np.max(np.abs(up.momenta))) if up.momenta.size else 0.0
    return 1e-8 * (1.0 + scale)


def constraint_residuals(ds: DerivedSystem, up: UnifiedPoint):
    """Residuals of the k-level momentum constraint chain.

    Level 1 compares p^{k-1} with dL/dq_k; each deeper level compares the
    next lower momentum with its closed-form value on jets, down to level
    k which fixes p^0.  Returns a list of arrays, one per level, each of
    length n.
    """
    _check_point(ds, up)
    k, n = ds.k, ds.n
    env = unified_bindings(up)
    levels = []
    for level in range(1, k + 1):
        i = k - level
        res = np.array([up.momenta[a, i] - ds.momenta[a][i].evaluate(env)
                        for a in range(n)])
        levels.append(res)
    return levels


def explicit_semispray(ds: DerivedSystem, up: UnifiedPoint) -> SemisprayVector:
    """Closed-form components of the unified vector field at a point.

    Evaluates the coordinate formulas directly: the jet components shift
    orders upward, the top jet component solves the Euler-Lagrange linear
    system, and the momentum components are dL/dq_0 and
    dL/dq_i - p^{i-1}.  No constraint membership is checked here; off the
    constraint manifold the result is simply not a solution of the field
    equation.
    """
    _check_point(ds, up)
    k, n = ds.k, ds.n
    env = unified_bindings(up)
    accel = ds.acceleration(env)

    coords = unified_coordinates(k, n)
    x = np.empty(3 * k * n + 1)
    x[0] = 1.0
    pos = 1
    for a in range(n):
        for i in range(2 * k - 1):
            x[pos] = up.jet.q[a, i + 1]
            pos += 1
        x[pos] = accel[a]
        pos += 1
    for a in range(n):
        x[pos] = ds.lagrangian_partials[a][0].evaluate(env)
        pos += 1
        for i in range(1, k):
            x[pos] = (ds.lagrangian_partials[a][i].evaluate(env)
                      - up.momenta[a, i - 1])
            pos += 1
    return SemisprayVector(x, tuple(coords))


def solve_unified_vf(ds: DerivedSystem, up: UnifiedPoint) -> SemisprayVector:
    """Solve for the unified vector field at an on-constraint point.

    Assembles a square linear system in the 3kn unknown components (the
    time component is fixed to 1 by the gauge): the semispray conditions
    on the jet components below the top order, the tangency rows
    (-1)^k W F = -(reduced Euler-Lagrange), and the momentum rows of the
    numeric two-form matrix.  The system is solved by pivoted LU; a
    condition number above 1e12 logs a warning and is reported on the
    result.

    Raises :class:`OffConstraintError` when the point violates the
    constraint chain beyond the scale-aware tolerance and
    :class:`SingularHessianError` when the Hessian is singular at the
    point, in which case no numeric answer is produced.
    """
    _check_point(ds, up)
    k, n = ds.k, ds.n
    tol = constraint_tolerance(up)
    residuals = constraint_residuals(ds, up)
    worst = max(float(np.max(np.abs(r))) for r in residuals)
    if worst > tol:
        raise OffConstraintError(
            f"point violates the momentum constraints (residual {worst:.3e} "
            f"> tolerance {tol:.3e})", residuals=residuals)

    env = unified_bindings(up)
    w = ds.hessian_value(env)
    if is_singular(w):
        raise SingularHessianError(
            "Hessian is singular, the unified vector field is not "
            "determined", time=up.t)

    coords = unified_coordinates(k, n)
    index = {ref: i for i, ref in enumerate(coords)}
    omega = omega_r_matrix(ds, up).entries
    size = 3 * k * n
    a = np.zeros((size, size))
    b = np.zeros(size)
    row = 0
    # semispray rows: jet components below the top order shift upward
    for dof in range(1, n + 1):
        for i in range(2 * k - 1):
            a[row, index[ex.jet(dof, i)] - 1] = 1.0
            b[row] = up.jet.q[dof - 1, i + 1]
            row += 1
    # tangency rows determine the top jet components
    sign = -1.0 if k % 2 else 1.0
    for dof in range(n):
        for other in range(n):
            a[row, index[ex.jet(other + 1, 2 * k - 1)] - 1] = sign * w[dof, other]
        b[row] = -ds.el_reduced[dof].evaluate(env)
        row += 1
    # momentum rows of the two-form matrix (time column moves to the rhs)
    for dof in range(1, n + 1):
        for i in range(k):
            r = index[ex.jet(dof, i)]
            a[row, :] = omega[r, 1:]
            b[row] = -omega[r, 0]
            row += 1

    lu, piv = scipy.linalg.lu_factor(a)
    solution = scipy.linalg.lu_solve((lu, piv), b)
    condition = float(np.linalg.cond(a))
    if condition > _CONDITION_WARN:
        logger.warning(
            "unified vector-field system is ill-conditioned (cond=%.3e)",
            condition)
    x = np.concatenate([[1.0], solution])
    return SemisprayVector(x, tuple(coords), condition=condition)


@dataclass(frozen=True)
class KernelReport:
    """Contraction residual and transversality of a candidate field.

    ``residual`` is the max-norm of the two-form matrix applied to the
    vector; ``transversality`` is the dt-component.  Reported as numbers
    only, with no pass or fail verdict: directions inside the kernel give
    residual 0 with transversality 0, solutions give residual ~0 with
    transversality 1.
    """

    residual: float
    transversality: float
    contraction: np.ndarray


def kernel_check(ds: DerivedSystem, up: UnifiedPoint, field) -> KernelReport:
    """Contract the two-form with a vector and report the residual."""
    x = field.components if isinstance(field, SemisprayVector) else \
        np.asarray(field, dtype=float)
    omega = omega_r_matrix(ds, up).entries
    if x.shape != (omega.shape[0],):
        raise ValidationError(
            f"vector length {x.shape} does not match the unified dimension "
            f"{omega.shape[0]}")
    contraction = omega @ x
    return KernelReport(
        residual=float(np.max(np.abs(contraction))),
        transversality=float(x[0]),
        contraction=contraction)
