"""Top-level acceptance checks, one per shipped guarantee.

Each test prints a single "[criterion N] PASS/FAIL" line (visible under
pytest -s) and pins its tolerances in place.
"""

import json
import math
import pathlib

import numpy as np
import pytest

import ostromech as om

from conftest import REGULAR, cos_jet, derived, on_constraint_points

FIXTURE = pathlib.Path(__file__).parent / "fixtures" / "pais_uhlenbeck_derivation.json"


def _report(number, ok):
    print(f"[criterion {number}] {'PASS' if ok else 'FAIL'}")


def test_criterion_1_pais_uhlenbeck_derivation(pu):
    """Derived momenta, equation of motion and Hessian match the
    independently worked fixture at 100 seeded points."""
    ok = False
    try:
        doc = json.loads(FIXTURE.read_text())
        ctx = om.SystemContext.for_reports(2, 1)

        def same(expr, text):
            result = om.equivalent_numeric(expr, om.parse(text, ctx),
                                           samples=100, tol=1e-12)
            assert result.equivalent, (om.to_text(expr), text,
                                       result.max_deviation)

        same(pu.el[0], doc["euler_lagrange"])
        same(pu.el[0], "4*q0 + 5*q2 + q4")
        for level, text in enumerate(doc["momenta"]):
            same(pu.momenta[0][level], text)
        same(pu.momenta[0][0], "-5*q1 - q3")
        same(pu.momenta[0][1], "q2")
        same(pu.hessian[0][0], doc["hessian"][0][0])
        assert om.to_text(om.hessian_det_expr(pu.model)) == "1"
        assert doc["hessian_det"] == "1"

        probe = doc["cos_jet"]
        jp = om.JetPoint(probe["t"], np.array([probe["jets"]]))
        np.testing.assert_allclose(om.legendre_map(pu, jp),
                                   [probe["momenta"]], atol=1e-14)
        assert om.ostrogradsky_energy(pu, jp) == pytest.approx(
            probe["energy"], abs=1e-14)
        ok = True
    finally:
        _report(1, ok)


def test_criterion_2_momentum_routes_agree(all_systems):
    """Closed-form momenta equal the backward recursion on every example
    system, 100 seeded points each, tolerance 1e-10."""
    ok = False
    try:
        for name, ds in all_systems.items():
            closed = om.momentum_exprs(ds.model)
            recursive = om.momentum_exprs_recursive(ds.model)
            for a in range(ds.n):
                for i in range(ds.k):
                    result = om.equivalent_numeric(
                        closed[a][i], recursive[a][i], samples=100, tol=1e-10)
                    assert result.equivalent, (name, a, i,
                                               result.max_deviation)
        ok = True
    finally:
        _report(2, ok)


def test_criterion_3_unified_simulation_accuracy(pu):
    """The unified trajectory through the cosine jet tracks cos t to 1e-6
    over [0, 10], with energy drift and constraint residual below 1e-7."""
    ok = False
    try:
        jp = cos_jet()
        init = om.UnifiedPoint(jp, om.legendre_map(pu, jp))
        traj = om.integrate_unified(pu, init, 10.0, rtol=1e-9, atol=1e-9)
        position_error = np.max(np.abs(traj.states[:, 0] - np.cos(traj.grid)))
        assert position_error <= 1e-6
        energies = om.energy_series(pu, traj)
        assert np.max(np.abs(energies - energies[0])) <= 1e-7
        assert traj.meta["max_constraint_residual"] <= 1e-7
        ok = True
    finally:
        _report(3, ok)


def test_criterion_4_field_routes_agree(all_systems):
    """Solved and closed-form unified fields agree entrywise to 1e-10 at 50
    seeded constraint points per regular example, with kernel residual
    below 1e-10 and transversality exactly 1."""
    ok = False
    try:
        for name in REGULAR:
            ds = all_systems[name]
            for up in on_constraint_points(ds, 50, seed=42):
                solved = om.solve_unified_vf(ds, up)
                explicit = om.explicit_semispray(ds, up)
                gap = np.max(np.abs(solved.components - explicit.components))
                assert gap <= 1e-10, (name, up.t, gap)
                kernel = om.kernel_check(ds, up, solved)
                assert kernel.residual <= 1e-10, (name, kernel.residual)
                assert kernel.transversality == 1.0
        ok = True
    finally:
        _report(4, ok)


def test_criterion_5_stationarity_discriminates(pu):
    """20 random admissible variations accept the exact solution
    (tolerance 1e-6) and reject a 5 percent perturbation of it, with the
    finite-difference derivative matching the first-variation integral."""
    ok = False
    try:
        solution = om.PathRepresentation("fourier", [0.0, 1.0, 0.0],
                                         (0.0, float(np.pi)))
        passing = om.stationarity_check(pu, solution, n_variations=20,
                                        tol=1e-6, seed=42)
        assert passing.stationary, passing.max_abs_derivative

        taylor = np.zeros(22)
        for j in range(0, 22, 2):
            taylor[j] = (-1.0) ** (j // 2) / math.factorial(j)
        perturbed_coeffs = np.zeros(23)
        perturbed_coeffs[:22] += taylor
        perturbed_coeffs[1:] += 0.05 * taylor
        perturbed = om.PathRepresentation("monomial", perturbed_coeffs,
                                          (0.0, 1.0))
        failing = om.stationarity_check(pu, perturbed, n_variations=20,
                                        tol=1e-6, seed=42)
        assert not failing.stationary
        assert failing.max_abs_derivative > 1e-3

        for variation, fd in zip(failing.variations, failing.derivatives):
            analytic = om.first_variation(pu, perturbed, variation)
            assert abs(fd - analytic) <= 1e-6 * (1.0 + abs(fd))
        ok = True
    finally:
        _report(5, ok)


def test_criterion_6_cartan_action_agrees(all_systems):
    """Lagrangian and unified one-form actions agree to 1e-9 relative on a
    seeded random path for every example system."""
    ok = False
    try:
        rng = np.random.default_rng(42)
        for name, ds in all_systems.items():
            coeffs = rng.uniform(-1.0, 1.0, size=(ds.n, 6))
            path = om.PathRepresentation("monomial", coeffs, (0.0, 1.5))
            s_l = om.discrete_action(ds, path, "lagrangian")
            s_c = om.discrete_action(ds, path, "cartan")
            assert abs(s_l - s_c) <= 1e-9 * (1.0 + abs(s_l)), (name, s_l, s_c)
        ok = True
    finally:
        _report(6, ok)


def test_criterion_7_hamilton_equations_hold(pu, harmonic):
    """Both Hamilton-form residuals stay within 10x the integrator
    tolerance along unified trajectories of the fourth- and second-order
    oscillators."""
    ok = False
    try:
        for ds in (pu, harmonic):
            jp = cos_jet() if ds.k == 2 else om.JetPoint(
                0.0, np.array([[1.0, 0.0]]))
            init = om.UnifiedPoint(jp, om.legendre_map(ds, jp))
            traj = om.integrate_unified(ds, init, 10.0, rtol=1e-9, atol=1e-9,
                                        max_step=0.005)
            report = om.verify_trajectory(ds, traj)
            budget = 10.0 * traj.meta["tolerance"]
            assert report.hamilton_q_residual <= budget
            assert report.hamilton_p_residual <= budget
        ok = True
    finally:
        _report(7, ok)


def test_criterion_8_degeneracy_is_refused(degenerate):
    """The degenerate system is reported rank 0 with vanishing determinant,
    and both dynamics routes raise instead of returning numbers."""
    ok = False
    try:
        assert om.to_text(om.hessian_det_expr(degenerate.model)) == "0"
        report = om.regularity_report(degenerate, samples=100, seed=42)
        assert not report.regular
        assert report.to_dict()["rank_at_worst_point"] == 0

        state = np.array([0.4, 0.8, -0.3, 0.2])
        with pytest.raises(om.SingularHessianError):
            om.lagrangian_rhs(degenerate, 0.0, state)
        up = om.UnifiedPoint(om.JetPoint(0.0, state[None, :]),
                             np.array([[0.8, 0.0]]))
        with pytest.raises(om.SingularHessianError):
            om.solve_unified_vf(degenerate, up)
        ok = True
    finally:
        _report(8, ok)


def test_criterion_9_long_energy_conservation(harmonic):
    """A tight adaptive run of the harmonic oscillator keeps the energy
    drift below 1e-9 over [0, 20]."""
    ok = False
    try:
        init = om.JetPoint(0.0, np.array([[1.0, 0.0]]))
        traj = om.integrate(harmonic, init, 20.0, rtol=1e-10, atol=1e-10)
        energies = om.energy_series(harmonic, traj)
        assert np.max(np.abs(energies - energies[0])) <= 1e-9
        ok = True
    finally:
        _report(9, ok)


def test_criterion_10_convergence_orders():
    """Halving the RK4 step shrinks the energy drift by about 16x, and
    doubling the Simpson panel count shrinks the action error by about
    16x (both within a factor of 2)."""
    ok = False
    try:
        pendulum = om.derive(om.build_system({
            "name": "pendulum", "order": 1, "dofs": 1,
            "lagrangian": "1/2*q1^2 + cos(q0)"}))
        init = om.JetPoint(0.0, np.array([[2.5, 0.0]]))
        drifts = []
        for step in (0.05, 0.025, 0.0125, 0.00625):
            traj = om.integrate(pendulum, init, 20.0, method="rk4", step=step)
            energies = om.energy_series(pendulum, traj)
            drifts.append(np.max(np.abs(energies - energies[0])))
        for coarse, fine in zip(drifts, drifts[1:]):
            assert 8.0 <= coarse / fine <= 32.0, drifts

        oscillator = derived("harmonic")
        cubic = om.PathRepresentation("monomial", [0.0, 0.0, 0.0, 1.0],
                                      (0.0, 1.0))
        exact = 29.0 / 35.0
        errors = [abs(om.discrete_action(oscillator, cubic,
                                         quad_points=panels) - exact)
                  for panels in (2, 4, 8, 16)]
        for coarse, fine in zip(errors, errors[1:]):
            assert 8.0 <= coarse / fine <= 32.0, errors
        ok = True
    finally:
        _report(10, ok)
