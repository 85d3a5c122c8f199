"""Poke the unified jet-momentum space at a single point.

Shows the coupling pairing, the Hamiltonian section, the two-form, and
the two independent routes to the vector field agreeing with each other.
"""

import json
import pathlib

import numpy as np

import ostromech as om

HERE = pathlib.Path(__file__).parent


def main():
    model = om.build_system(json.loads(
        (HERE / "systems" / "pais_uhlenbeck.json").read_text()))
    ds = om.derive(model)

    jet = om.JetPoint(0.0, np.array([[1.0, 0.0, -1.0, 0.0]]))
    momenta = om.legendre_map(ds, jet)
    up = om.UnifiedPoint(jet, momenta)
    print(f"jet of cos t: {jet.q[0]}")
    print(f"momenta from the Legendre map: {momenta[0]}")

    h = ds.hamiltonian.evaluate(om.unified_bindings(up))
    p = om.hamiltonian_section_p(ds, up)
    lifted = om.UnifiedPoint(jet, momenta, p_ext=p)
    lag = ds.lagrangian_value(om.jet_bindings(jet))
    print()
    print(f"H = {h:+.6f}, so the section sets p = {p:+.6f}")
    print(f"coupling on the section = {om.coupling(lifted):+.6f} "
          f"(the Lagrangian is {lag:+.6f})")

    omega = om.omega_r_matrix(ds, up)
    asym = np.max(np.abs(omega.entries + omega.entries.T))
    print()
    print(f"two-form is {omega.dim}x{omega.dim}, antisymmetry defect {asym:g}")

    solved = om.solve_unified_vf(ds, up)
    explicit = om.explicit_semispray(ds, up)
    print()
    print(f"solved field:   {solved.components}")
    print(f"explicit field: {explicit.components}")
    print(f"max difference {np.max(np.abs(solved.components - explicit.components)):.3e} "
          f"(condition {solved.condition:.2e})")

    kernel = om.kernel_check(ds, up, solved)
    print(f"contraction with the two-form: residual {kernel.residual:.3e}, "
          f"transversality {kernel.transversality}")

    # walk off the constraint manifold and the solver refuses
    off = om.UnifiedPoint(jet, momenta + np.array([[0.5, 0.0]]))
    try:
        om.solve_unified_vf(ds, off)
    except om.OffConstraintError as err:
        print()
        print(f"off-constraint point refused: {err}")


if __name__ == "__main__":
    main()
