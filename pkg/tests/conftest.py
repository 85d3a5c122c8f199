"""Shared example systems and helpers for the test suite."""

import json

import numpy as np
import pytest

import ostromech as om

# the example corpus: small systems exercising every structural case
# (orders 1 and 2, one and two dofs, autonomy and driving, degeneracy)
SYSTEM_DOCS = {
    "pais_uhlenbeck": {
        "name": "pais-uhlenbeck",
        "order": 2,
        "dofs": 1,
        "lagrangian": "1/2*(q2^2 - (w1^2 + w2^2)*q1^2 + w1^2*w2^2*q0^2)",
        "parameters": {"w1": 1.0, "w2": 2.0},
        "autonomous": True,
    },
    "harmonic": {
        "name": "harmonic",
        "order": 1,
        "dofs": 1,
        "lagrangian": "1/2*(q1^2 - q0^2)",
        "autonomous": True,
    },
    "free_particle": {
        "name": "free-particle",
        "order": 1,
        "dofs": 1,
        "lagrangian": "1/2*q1^2",
        "autonomous": True,
    },
    "degenerate": {
        "name": "degenerate",
        "order": 2,
        "dofs": 1,
        "lagrangian": "1/2*q1^2",
        "autonomous": True,
    },
    "driven": {
        "name": "driven-oscillator",
        "order": 1,
        "dofs": 1,
        "lagrangian": "1/2*(q1^2 - q0^2) + q0*sin(2*t)",
        "autonomous": False,
    },
    "coupled_beam": {
        "name": "coupled-beam",
        "order": 2,
        "dofs": 2,
        "lagrangian": "1/2*(q2_1^2 + q2_2^2) - 1/2*(q0_1 - q0_2)^2",
        "autonomous": True,
    },
}

# systems with an everywhere-regular Hessian
REGULAR = ("pais_uhlenbeck", "harmonic", "free_particle", "driven",
           "coupled_beam")


def derived(key):
    return om.derive(om.build_system(SYSTEM_DOCS[key]))


@pytest.fixture(scope="session")
def pu():
    return derived("pais_uhlenbeck")


@pytest.fixture(scope="session")
def harmonic():
    return derived("harmonic")


@pytest.fixture(scope="session")
def free_particle():
    return derived("free_particle")


@pytest.fixture(scope="session")
def degenerate():
    return derived("degenerate")


@pytest.fixture(scope="session")
def driven():
    return derived("driven")


@pytest.fixture(scope="session")
def coupled_beam():
    return derived("coupled_beam")


@pytest.fixture(scope="session")
def all_systems():
    return {key: derived(key) for key in SYSTEM_DOCS}


def cos_jet(t=0.0):
    """The order-3 jet of cos at time t (the exact fourth-order solution)."""
    return om.JetPoint(t, np.array([[np.cos(t), -np.sin(t),
                                     -np.cos(t), np.sin(t)]]))


def on_constraint_points(ds, count, seed, box=(-2.0, 2.0)):
    """Seeded unified points placed exactly on the constraint manifold."""
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(count):
        t = float(rng.uniform(*box))
        jets = rng.uniform(box[0], box[1], size=(ds.n, 2 * ds.k))
        momenta = om.legendre_map(ds, om.JetPoint(t, jets))
        points.append(om.UnifiedPoint(om.JetPoint(t, jets), momenta))
    return points


def write_spec(tmp_path, key, **overrides):
    """Write one of the example system docs as a spec file."""
    doc = dict(SYSTEM_DOCS[key], **overrides)
    path = tmp_path / f"{key}.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)
