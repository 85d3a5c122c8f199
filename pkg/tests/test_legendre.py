"""Mechanical derivation: momenta, Euler-Lagrange, Hessian, inverse map."""

import json
import pathlib

import numpy as np
import pytest

import ostromech as om
from ostromech import expressions as ex

from conftest import cos_jet, derived

FIXTURE = pathlib.Path(__file__).parent / "fixtures" / "pais_uhlenbeck_derivation.json"


def test_derivation_matches_hand_worked_fixture(pu):
    """Every derived expression agrees with the independently worked file."""
    doc = json.loads(FIXTURE.read_text())
    ctx = om.SystemContext.for_reports(2, 1)

    def same(derived_expr, text):
        r = om.equivalent_numeric(derived_expr, om.parse(text, ctx), tol=1e-12)
        assert r.equivalent, f"{om.to_text(derived_expr)} != {text}"

    same(pu.model.lagrangian, doc["lagrangian"])
    for level, text in enumerate(doc["momenta"]):
        same(pu.momenta[0][level], text)
    same(pu.el[0], doc["euler_lagrange"])
    same(pu.hessian[0][0], doc["hessian"][0][0])
    same(om.hessian_det_expr(pu.model), doc["hessian_det"])

    probe = doc["cos_jet"]
    jp = om.JetPoint(probe["t"], np.array([probe["jets"]]))
    np.testing.assert_allclose(om.legendre_map(pu, jp), [probe["momenta"]],
                               atol=1e-14)
    assert pu.lagrangian_value(om.jet_bindings(jp)) == pytest.approx(
        probe["lagrangian_value"], abs=1e-14)


def test_closed_form_momenta_match_recursion(all_systems):
    for ds in all_systems.values():
        closed = om.momentum_exprs(ds.model)
        rec = om.momentum_exprs_recursive(ds.model)
        for a in range(ds.n):
            for i in range(ds.k):
                r = om.equivalent_numeric(closed[a][i], rec[a][i], tol=1e-12)
                assert r.equivalent, (ds.model.name, a, i, r.max_deviation)


def test_harmonic_momentum_is_velocity(harmonic):
    ctx = om.SystemContext.for_reports(1, 1)
    assert om.equivalent_numeric(harmonic.momenta[0][0],
                                 om.parse("q1", ctx)).equivalent


def test_free_particle_euler_lagrange(free_particle):
    ctx = om.SystemContext.for_reports(1, 1)
    assert om.equivalent_numeric(free_particle.el[0],
                                 om.parse("-q2", ctx)).equivalent


def test_coupled_beam_derivation(coupled_beam):
    ctx = om.SystemContext.for_reports(2, 2)
    for a, dof in ((0, 1), (1, 2)):
        assert om.equivalent_numeric(
            coupled_beam.momenta[a][1], om.parse(f"q2_{dof}", ctx)).equivalent
        assert om.equivalent_numeric(
            coupled_beam.momenta[a][0], om.parse(f"-q3_{dof}", ctx)).equivalent
    assert om.equivalent_numeric(
        coupled_beam.el[0], om.parse("q4_1 - (q0_1 - q0_2)", ctx)).equivalent
    assert om.equivalent_numeric(
        coupled_beam.el[1], om.parse("q4_2 + (q0_1 - q0_2)", ctx)).equivalent


def test_driven_el_vanishes_on_exact_solution(driven):
    # q(t) = cos t + 2/3 sin t - 1/3 sin 2t solves q'' + q = sin 2t
    for t in np.linspace(0.0, 7.0, 29):
        q0 = np.cos(t) + 2 / 3 * np.sin(t) - 1 / 3 * np.sin(2 * t)
        q1 = -np.sin(t) + 2 / 3 * np.cos(t) - 2 / 3 * np.cos(2 * t)
        q2 = -np.cos(t) - 2 / 3 * np.sin(t) + 4 / 3 * np.sin(2 * t)
        env = om.jet_bindings(om.JetPoint(t, np.array([[q0, q1, q2]])))
        assert abs(driven.el[0].evaluate(env)) < 1e-12


def test_hessians(pu, coupled_beam, degenerate):
    assert om.to_text(om.hessian_det_expr(pu.model)) == "1"
    np.testing.assert_array_equal(coupled_beam.hessian_value({}), np.eye(2))
    assert degenerate.hessian_value({})[0][0] == 0.0

    cross = om.derive(om.build_system({
        "name": "cross", "order": 1, "dofs": 2,
        "lagrangian": "1/2*(q1_1^2 + q1_2^2) + 1/2*q1_1*q1_2"}))
    np.testing.assert_allclose(cross.hessian_value({}),
                               [[1.0, 0.5], [0.5, 1.0]])
    det = om.hessian_det_expr(cross.model)
    assert det.evaluate({}) == pytest.approx(0.75)


def test_acceleration_oracle(pu):
    # el = 4 q0 + 5 q2 + q4 = 0 gives q4 = -4 q0 - 5 q2; cos jet ->  1
    env = om.jet_bindings(cos_jet())
    np.testing.assert_allclose(pu.acceleration(env), [1.0], atol=1e-14)

    harmonic = derived("harmonic")
    env = om.jet_bindings(om.JetPoint(0.0, np.array([[0.3, 0.0]])))
    np.testing.assert_allclose(harmonic.acceleration(env), [-0.3], atol=1e-15)


def test_singular_acceleration_raises_with_time(degenerate):
    env = om.jet_bindings(om.JetPoint(0.75, np.array([[1.0, 2.0, 3.0, 4.0]])))
    with pytest.raises(om.SingularHessianError) as info:
        degenerate.acceleration(env)
    assert info.value.time == 0.75
    assert "t=0.75" in str(info.value)


def test_regularity_report_regular(pu):
    rep = om.regularity_report(pu, samples=100, seed=0)
    assert rep.regular
    assert rep.min_abs_det == 1.0 and rep.max_abs_det == 1.0
    assert rep.threshold == pytest.approx(2e-9)
    d = rep.to_dict()
    assert d["rank_at_worst_point"] == 1
    assert d["samples"] == 100 and d["seed"] == 0


def test_regularity_report_degenerate(degenerate):
    rep = om.regularity_report(degenerate, samples=50, seed=3)
    assert not rep.regular
    assert rep.min_abs_det == 0.0 and rep.max_abs_det == 0.0
    assert rep.to_dict()["rank_at_worst_point"] == 0


def test_regularity_sign_crossing():
    # W = [[q0]] is singular wherever the sampled box pins q0 near zero
    model = om.build_system({"name": "crossing", "order": 1, "dofs": 1,
                             "lagrangian": "1/2*q0*q1^2"})
    wide = om.regularity_report(model, samples=100, seed=0)
    assert wide.min_abs_det < wide.max_abs_det  # det actually varies
    pinned = om.regularity_report(
        model, domain={ex.jet(1, 0): (-1e-12, 1e-12)}, samples=20, seed=0)
    assert not pinned.regular
    assert pinned.to_dict()["rank_at_worst_point"] == 0


def test_singular_threshold_scale_aware():
    assert om.singular_threshold(np.array([[2.0]])) == pytest.approx(3e-9)
    big = np.diag([1e4, 1e4])
    assert om.singular_threshold(big) == pytest.approx(1e-9 * (1 + 1e8))
    assert not om.is_singular(big)
    assert om.is_singular(np.zeros((2, 2)))


def test_legendre_map_cos_jet(pu):
    np.testing.assert_allclose(om.legendre_map(pu, cos_jet()), [[0.0, -1.0]],
                               atol=1e-14)
    with pytest.raises(om.DimensionError):
        om.legendre_map(pu, om.JetPoint(0.0, np.array([[1.0, 0.0]])))


def test_legendre_inverse_round_trip(pu, coupled_beam):
    rng = np.random.default_rng(11)
    for ds in (pu, coupled_beam):
        n, k = ds.n, ds.k
        for _ in range(5):
            base = rng.uniform(-1, 1, size=(n, k))
            high = rng.uniform(-1, 1, size=(n, k))
            jp = om.JetPoint(0.0, np.hstack([base, high]))
            p = om.legendre_map(ds, jp)
            got = om.legendre_inverse(ds, 0.0, base, p)
            assert isinstance(got, np.ndarray) and got.shape == (n, k)
            np.testing.assert_allclose(got, high, atol=1e-9)


def test_legendre_inverse_nonlinear():
    # p = q1 + q1^3/3 is monotone, so Newton must land on the unique root
    ds = om.derive(om.build_system({"name": "quartic", "order": 1, "dofs": 1,
                                    "lagrangian": "1/2*q1^2 + 1/12*q1^4"}))
    q1 = 0.8
    p = q1 + q1 ** 3 / 3
    got = om.legendre_inverse(ds, 0.0, [[0.2]], [[p]])
    np.testing.assert_allclose(got, [[q1]], atol=1e-10)


def test_legendre_inverse_errors(degenerate, pu):
    with pytest.raises(om.SingularJacobianError):
        om.legendre_inverse(degenerate, 0.0, [[1.0, 0.0]], [[5.0, 3.0]])
    with pytest.raises(om.ConvergenceError):
        om.legendre_inverse(pu, 0.0, [[0.0, 0.0]], [[1.0, 1.0]],
                            max_iterations=0)
    # an exact guess satisfies the residual test before any iteration
    got = om.legendre_inverse(pu, 0.0, [[0.0, 0.0]], [[0.0, 1.0]],
                              guess=[[1.0, 0.0]], max_iterations=0)
    np.testing.assert_allclose(got, [[1.0, 0.0]])
    with pytest.raises(om.DimensionError):
        om.legendre_inverse(pu, 0.0, [[0.0]], [[0.0, 1.0]])
