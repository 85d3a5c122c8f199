"""Mechanical derivation of momenta, equations of motion, and regularity.

Given a k-th order Lagrangian L the module produces:

* the Ostrogradsky momenta, level r-1 for r = 1 .. k:
      p^{r-1}_A = sum_{i=0}^{k-r} (-1)^i (d/dt)^i (dL/dq_{r+i}^A),
  which satisfy the backward recursion
      p^{k-1}_A = dL/dq_k^A,
      p^{i-1}_A = dL/dq_i^A - d/dt p^i_A;
* the Euler-Lagrange expressions
      el_A = sum_{i=0}^{k} (-1)^i (d/dt)^i (dL/dq_i^A),
  in which the highest jet q_{2k}^B enters linearly through the Hessian:
      el_A = (-1)^k W_AB q_{2k}^B + (terms of order <= 2k-1);
* the Hessian W_AB = d^2 L / dq_k^B dq_k^A and its regularity status;
* the Hamiltonian function on the unified space,
      H = -L + sum p_A^i q_{i+1}^A.

All total derivatives are taken along holonomic prolongations, so momenta
live on jets of order at most 2k-1 and el on jets of order at most 2k.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex
from .errors import (
    ConvergenceError,
    DimensionError,
    SingularHessianError,
    SingularJacobianError,
)
from .systems import JetPoint, SystemModel, jet_bindings

__all__ = [
    "DerivedSystem", "derive",
    "momentum_exprs", "momentum_exprs_recursive",
    "euler_lagrange_exprs", "hessian_exprs", "hessian_det_expr",
    "regularity_report", "RegularityReport",
    "legendre_map", "legendre_inverse",
    "hessian_at", "singular_threshold", "is_singular",
]

# scale-aware cutoff below which |det W| counts as singular
_SINGULAR_RTOL = 1e-9


def _dt(expr, max_order):
    return ex.simplify(ex.total_derivative(expr, max_order))


def momentum_exprs(sys: SystemModel):
    """Closed-form momenta as expressions on jets of order <= 2k-1.

    Returns nested lists indexed [dof][level]; the level r-1 momentum
    involves jets of order at most 2k-r.
    """
    k = sys.k
    out = []
    for a in range(1, sys.n + 1):
        per_dof = []
        for r in range(1, k + 1):
            terms = []
            for i in range(k - r + 1):
                term = ex.diff(sys.lagrangian, ex.jet(a, r + i))
                for _ in range(i):
                    term = _dt(term, 2 * k - 1)
                if i % 2:
                    term = ex.Neg(term)
                terms.append(term)
            # r runs 1..k, so per_dof is already indexed by level r-1
            per_dof.append(ex.simplify(ex._add(*terms)))
        out.append(per_dof)
    return out


def momentum_exprs_recursive(sys: SystemModel):
    """Momenta via the backward recursion, an independent route used to
    cross-check the closed form."""
    k = sys.k
    out = []
    for a in range(1, sys.n + 1):
        levels = [None] * k
        levels[k - 1] = ex.simplify(ex.diff(sys.lagrangian, ex.jet(a, k)))
        for i in range(k - 1, 0, -1):
            levels[i - 1] = ex.simplify(
                ex._add(ex.diff(sys.lagrangian, ex.jet(a, i)),
                        ex.Neg(_dt(levels[i], 2 * k - 1))))
        out.append(levels)
    return out


def euler_lagrange_exprs(sys: SystemModel):
    """Euler-Lagrange expressions, one per dof, on jets of order <= 2k."""
    k = sys.k
    out = []
    for a in range(1, sys.n + 1):
        terms = []
        for i in range(k + 1):
            term = ex.diff(sys.lagrangian, ex.jet(a, i))
            for _ in range(i):
                term = _dt(term, 2 * k)
            if i % 2:
                term = ex.Neg(term)
            terms.append(term)
        out.append(ex.simplify(ex._add(*terms)))
    return out


def hessian_exprs(sys: SystemModel):
    """Symmetric Hessian of L in the highest jet order, as expressions."""
    k, n = sys.k, sys.n
    rows = []
    for a in range(1, n + 1):
        row = []
        first = ex.diff(sys.lagrangian, ex.jet(a, k))
        for b in range(1, n + 1):
            row.append(ex.simplify(ex.diff(first, ex.jet(b, k))))
        rows.append(row)
    return rows


def hessian_det_expr(sys: SystemModel) -> ex.Expression:
    """Symbolic determinant of the Hessian (Leibniz expansion)."""
    w = hessian_exprs(sys)
    n = sys.n
    terms = []
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n)
                         if perm[i] > perm[j])
        sign = -1 if inversions % 2 else 1
        factors = [w[i][perm[i]] for i in range(n)]
        term = factors[0] if n == 1 else ex.Product(*factors)
        terms.append(ex.Neg(term) if sign < 0 else term)
    return ex.simplify(ex._add(*terms))


class DerivedSystem:
    """A system model together with everything derived from its Lagrangian.

    Exposes the momenta, Euler-Lagrange expressions, Hessian, the unified
    Hamiltonian ``hamiltonian`` with its partial derivatives, partials of L
    with respect to the low jet orders, and the reduced Euler-Lagrange
    expressions obtained by deleting the q_{2k} terms (the affine remainder
    used when solving for accelerations).
    """

    def __init__(self, model: SystemModel):
        self.model = model
        k, n = model.k, model.n
        self.momenta = momentum_exprs(model)
        self.el = euler_lagrange_exprs(model)
        self.hessian = hessian_exprs(model)

        # dL/dq_i for i = 0 .. k, per dof
        self.lagrangian_partials = [
            [ex.simplify(ex.diff(model.lagrangian, ex.jet(a, i)))
             for i in range(k + 1)]
            for a in range(1, n + 1)]

        # H = -L + sum_{a,i} p_a^i q_{i+1}^a on the unified space
        coupling_terms = [
            ex.Product(ex.Variable(ex.momentum(a, i)),
                       ex.Variable(ex.jet(a, i + 1)))
            for a in range(1, n + 1) for i in range(k)]
        self.hamiltonian = ex.simplify(
            ex._add(ex.Neg(model.lagrangian), *coupling_terms))
        self.hamiltonian_partials = {
            v: ex.simplify(ex.diff(self.hamiltonian, v))
            for v in sorted(self.hamiltonian.free_vars(), key=lambda r: r._key())}

        # el with the top jet removed: el_a = (-1)^k W_ab q_{2k}^b + reduced_a
        top = {ex.jet(b, 2 * k): 0.0 for b in range(1, n + 1)}
        self.el_reduced = [ex.simplify(ex.substitute(e, top)) for e in self.el]

    # -- numeric helpers ----------------------------------------------------

    @property
    def k(self):
        return self.model.k

    @property
    def n(self):
        return self.model.n

    def lagrangian_value(self, env) -> float:
        return self.model.lagrangian.evaluate(env)

    def hessian_value(self, env) -> np.ndarray:
        n = self.n
        w = np.empty((n, n))
        for a in range(n):
            for b in range(n):
                w[a, b] = self.hessian[a][b].evaluate(env)
        return w

    def acceleration(self, env) -> np.ndarray:
        """Solve the Euler-Lagrange system for the order-2k jets.

        Uses el_a = (-1)^k W_ab q_{2k}^b + reduced_a = 0, i.e. a linear
        solve against the Hessian at the bound point.  Raises
        :class:`SingularHessianError` when the Hessian fails the scale-aware
        regularity test.
        """
        w = self.hessian_value(env)
        if is_singular(w):
            raise SingularHessianError(
                "Hessian is singular, accelerations are not determined",
                time=env.get(ex.time_var()))
        rhs = np.array([-e.evaluate(env) for e in self.el_reduced])
        sign = -1.0 if self.k % 2 else 1.0
        return np.linalg.solve(sign * w, rhs)


def derive(sys: SystemModel) -> DerivedSystem:
    """Run the full mechanical derivation for a system model."""
    return DerivedSystem(sys)


def singular_threshold(w: np.ndarray) -> float:
    """|det W| at or below this value counts as singular (scale-aware)."""
    n = w.shape[0]
    scale = np.linalg.norm(w, np.inf) if w.size else 0.0
    return _SINGULAR_RTOL * (1.0 + scale ** n)


def is_singular(w: np.ndarray) -> bool:
    return abs(np.linalg.det(w)) <= singular_threshold(w)


def hessian_at(ds: DerivedSystem, jp: JetPoint) -> np.ndarray:
    return ds.hessian_value(jet_bindings(jp))


@dataclass
class RegularityReport:
    """Sampled regularity diagnosis of the Hessian."""

    regular: bool
    min_abs_det: float
    max_abs_det: float
    threshold: float
    worst_point: dict = field(default_factory=dict)
    rank_at_worst: int = 0
    samples: int = 0
    seed: int = 0

    def to_dict(self):
        worst = {ref.display(n_dofs=_worst_dofs(self.worst_point)): value
                 for ref, value in self.worst_point.items()}
        return {
            "regular": self.regular,
            "min_abs_det": self.min_abs_det,
            "max_abs_det": self.max_abs_det,
            "threshold": self.threshold,
            "rank_at_worst_point": self.rank_at_worst,
            "worst_point": worst,
            "samples": self.samples,
            "seed": self.seed,
        }


def _worst_dofs(point):
    dofs = [ref.dof for ref in point if ref.kind == "jet"]
    return max(dofs) if dofs else 1


def regularity_report(sys: SystemModel, domain=None, samples: int = 100,
                      seed: int = 0) -> RegularityReport:
    """Sample the Hessian determinant over a box and report regularity.

    The system is regular on the box when |det W| stays above the
    scale-aware threshold at every sampled point.  The rank at the worst
    point comes from a singular value decomposition with the same
    relative cutoff.
    """
    ds = sys if isinstance(sys, DerivedSystem) else DerivedSystem(sys)
    variables = set()
    for row in ds.hessian:
        for entry in row:
            variables |= entry.free_vars()
    rng = np.random.default_rng(seed)

    regular = True
    min_det, max_det = np.inf, 0.0
    worst_point, worst_w = {}, None
    threshold_at_worst = 0.0
    for _ in range(max(samples, 1)):
        point = ex.sample_point(variables, rng, domain)
        w = ds.hessian_value(point)
        detval = abs(np.linalg.det(w))
        if detval <= singular_threshold(w):
            regular = False
        if detval < min_det:
            min_det, worst_point, worst_w = detval, point, w
            threshold_at_worst = singular_threshold(w)
        max_det = max(max_det, detval)

    sv = np.linalg.svd(worst_w, compute_uv=False)
    cutoff = _SINGULAR_RTOL * (1.0 + (sv[0] if sv.size else 0.0))
    rank = int(np.sum(sv > cutoff))
    return RegularityReport(
        regular=regular, min_abs_det=float(min_det), max_abs_det=float(max_det),
        threshold=threshold_at_worst, worst_point=worst_point,
        rank_at_worst=rank, samples=samples, seed=seed)


def legendre_map(ds: DerivedSystem, jp: JetPoint) -> np.ndarray:
    """Momenta of a jet point under the Legendre-Ostrogradsky map.

    Returns an array of shape (n, k); the jet point must carry orders up
    to 2k-1.
    """
    k, n = ds.k, ds.n
    if jp.n != n or jp.orders < 2 * k:
        raise DimensionError(
            f"jet point must carry {n} dofs and orders up to {2 * k - 1}")
    env = jet_bindings(jp)
    p = np.empty((n, k))
    for a in range(n):
        for i in range(k):
            p[a, i] = ds.momenta[a][i].evaluate(env)
    return p


def _momentum_jacobian_exprs(ds: DerivedSystem):
    """d p^i_A / d q_j^B for the high jets j = k .. 2k-1 (cached)."""
    cached = getattr(ds, "_momentum_jacobian", None)
    if cached is not None:
        return cached
    k, n = ds.k, ds.n
    rows = []
    for a in range(n):
        for i in range(k):
            row = []
            for b in range(n):
                for j in range(k, 2 * k):
                    row.append(ex.simplify(
                        ex.diff(ds.momenta[a][i], ex.jet(b + 1, j))))
            rows.append(row)
    ds._momentum_jacobian = rows
    return rows


def legendre_inverse(ds: DerivedSystem, t: float, base_q, momenta,
                     guess=None, tol: float = 1e-10,
                     max_iterations: int = 50) -> np.ndarray:
    """Recover the high jets q_k .. q_{2k-1} from base jets and momenta.

    Damped Newton iteration with step halving on the residual
    ``legendre_map - momenta``; the Jacobian is evaluated from exact
    symbolic partials.  Raises :class:`SingularJacobianError` when the
    Jacobian cannot be inverted and :class:`ConvergenceError` when the
    residual fails to fall below ``tol`` within ``max_iterations``.
    Returns the high jets with shape (n, k).
    """
    k, n = ds.k, ds.n
    base_q = np.asarray(base_q, dtype=float)
    target = np.asarray(momenta, dtype=float)
    if base_q.shape != (n, k):
        raise DimensionError(f"base jets must have shape {(n, k)}")
    if target.shape != (n, k):
        raise DimensionError(f"momenta must have shape {(n, k)}")
    high = (np.zeros((n, k)) if guess is None
            else np.array(guess, dtype=float).reshape(n, k))

    jac_exprs = _momentum_jacobian_exprs(ds)
    m = n * k

    def residual_of(high_jets):
        jp = JetPoint(t, np.hstack([base_q, high_jets]))
        return (legendre_map(ds, jp) - target).reshape(-1), jp

    res, jp = residual_of(high)
    for _ in range(max_iterations):
        if np.max(np.abs(res)) <= tol:
            return high
        env = jet_bindings(jp)
        jac = np.empty((m, m))
        for r in range(m):
            for c in range(m):
                jac[r, c] = jac_exprs[r][c].evaluate(env)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            raise SingularJacobianError(
                "Jacobian of the momentum map is singular; the system is "
                "degenerate at this point") from None
        # damped update: halve the step until the residual improves
        scale = 1.0
        best = np.max(np.abs(res))
        for _ in range(30):
            trial = high + scale * step.reshape(n, k)
            trial_res, trial_jp = residual_of(trial)
            if np.max(np.abs(trial_res)) < best or scale < 1e-12:
                high, res, jp = trial, trial_res, trial_jp
                break
            scale *= 0.5
        else:
            raise ConvergenceError(
                "Newton step failed to reduce the momentum residual")
    if np.max(np.abs(res)) <= tol:
        return high
    raise ConvergenceError(
        f"momentum inversion did not reach residual {tol} in "
        f"{max_iterations} iterations (final residual "
        f"{np.max(np.abs(res)):.3e})")
