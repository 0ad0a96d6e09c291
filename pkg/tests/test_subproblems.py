"""Single half-step solves of the three subproblems."""
import numpy as np
import pytest

from eulerfsi.b_solver import BSubproblemInput, StabilizationError, check_stabilization, min_eigenvalue, solve_b_halfstep
from eulerfsi.ch_solver import CHSubproblemInput, solve_ch_halfstep
from eulerfsi.fem import constant, integrate, interpolate
from eulerfsi.materials import MaterialParams
from eulerfsi.mesh import build_uniform
from eulerfsi.ns_solver import NSSubproblemInput, mean_value, solve_ns_halfstep
from eulerfsi.state import make_spaces

PRM = MaterialParams(rho_f=1.0, rho_s=3.0, mu_f=0.5, mu_s=2.0, g_f=0.2, g_s=4.0, alpha_f=1.5, gamma=1e-3,
                     epsilon=0.1, mobility=0.1, delta_stab=1e-3)


@pytest.fixture(scope="module")
def sp():
    return make_spaces(build_uniform(6, "union-jack"))


def zero_v(sp):
    return constant(sp.V, (0.0, 0.0))


# Cahn-Hilliard --------------------------------------------------------------

@pytest.mark.parametrize("value", [1.0, -1.0])
def test_wells_are_equilibria(sp, value):
    phi = constant(sp.S, value)
    new, m, rep = solve_ch_halfstep(CHSubproblemInput(phi, phi, zero_v(sp), 0.1, PRM))
    assert np.abs(new.coeffs - value).max() < 1e-12
    assert np.abs(m.coeffs).max() < 1e-12


def test_mass_conserved_for_any_velocity(sp):
    rng = np.random.default_rng(0)
    phi = interpolate(sp.S, lambda x, y: np.tanh((np.hypot(x - 0.4, y - 0.55) - 0.25) / 0.1))
    v = sp.V and constant(sp.V, (0.0, 0.0)).with_coeffs(rng.standard_normal(sp.V.dof_count))
    new, _, _ = solve_ch_halfstep(CHSubproblemInput(phi, phi, v, 0.05, PRM))
    before = integrate(sp.mesh, phi.at_quadrature(_q(sp)), 6)
    after = integrate(sp.mesh, new.at_quadrature(_q(sp)), 6)
    assert abs(after - before) <= 1e-10 * abs(before)


def _q(sp):
    from eulerfsi.fem import get_quadrature

    return get_quadrature(sp.mesh, 6)


def test_dirichlet_phase_value(sp):
    phi = interpolate(sp.S, lambda x, y: np.where(np.hypot(x - 0.5, y - 0.5) < 0.2, -1.0, 1.0))
    new, _, _ = solve_ch_halfstep(CHSubproblemInput(phi, phi, zero_v(sp), 0.05, PRM, phi_bc=1.0))
    assert np.all(new.coeffs[sp.S.boundary_scalar_dofs()] == 1.0)


def test_resolved_planar_interface_is_nearly_steady():
    sp2 = make_spaces(build_uniform(16, "union-jack"))
    eps = 0.1
    prm = PRM.replace(epsilon=eps)
    phi = interpolate(sp2.S, lambda x, y: np.tanh((x - 0.5) / (np.sqrt(2) * eps)))
    new, m, _ = solve_ch_halfstep(CHSubproblemInput(phi, phi, zero_v(sp2), 0.01, prm))
    assert np.abs(new.coeffs - phi.coeffs).max() < 1e-3
    assert np.abs(m.coeffs).max() < 0.05 * prm.gamma / eps


def test_ch_input_validation(sp):
    phi = constant(sp.S, 1.0)
    with pytest.raises(ValueError):
        CHSubproblemInput(phi, phi, zero_v(sp), 0.0, PRM)
    with pytest.raises(ValueError):
        CHSubproblemInput(phi, phi, zero_v(sp), 0.1, PRM, phi_bc="periodic")


# tensor transport -----------------------------------------------------------

def test_identity_is_preserved_at_rest(sp):
    phi = interpolate(sp.S, lambda x, y: np.sin(3 * x) * np.cos(2 * y))
    B = constant(sp.T, (1.0, 0.0, 1.0))
    new, _ = solve_b_halfstep(BSubproblemInput(B, zero_v(sp), phi, 0.1, PRM))
    assert np.abs(new.coeffs - B.coeffs).max() < 1e-12


def test_fluid_without_elasticity_relaxes_to_identity(sp):
    prm = PRM.replace(g_f=0.0)
    rng = np.random.default_rng(1)
    Bn = constant(sp.T, (1.0, 0.0, 1.0)).with_coeffs(rng.uniform(0.5, 2.0, sp.T.dof_count))
    new, _ = solve_b_halfstep(BSubproblemInput(Bn, zero_v(sp), constant(sp.S, 1.0), 0.1, prm))
    assert np.abs(new.coeffs - constant(sp.T, (1.0, 0.0, 1.0)).coeffs).max() < 1e-10


def test_pure_relaxation_matches_hand_value(sp):
    prm = PRM.replace(delta_stab=0.0)
    dt, G, a = 0.1, prm.g_f, prm.alpha_f
    Bn = constant(sp.T, (2.0, 0.5, 3.0))
    new, _ = solve_b_halfstep(BSubproblemInput(Bn, zero_v(sp), constant(sp.S, 1.0), dt, prm))
    c = 2 * G / dt
    expected = [(c * 2.0 + a) / (c + a), c * 0.5 / (c + a), (c * 3.0 + a) / (c + a)]
    assert np.allclose(new.coeffs, np.repeat(expected, sp.T.n_scalar), atol=1e-12)


def test_simple_shear_upper_convected_midpoint(sp):
    prm = PRM.replace(alpha_f=0.0, delta_stab=0.0)
    rate, dt = 0.8, 0.1
    v = interpolate(sp.V, lambda x, y: (rate * y, 0 * x))
    new, _ = solve_b_halfstep(BSubproblemInput(constant(sp.T, (1.0, 0.0, 1.0)), v, constant(sp.S, 0.3), dt, prm))
    b12 = rate * dt / 2
    expected = [1 + rate * b12 * dt, b12, 1.0]
    assert np.allclose(new.coeffs, np.repeat(expected, sp.T.n_scalar), atol=1e-12)


def test_stabilization_guard():
    prm = PRM.replace(mu_s=0.0, delta_stab=0.0)
    with pytest.raises(StabilizationError, match="delta_stab"):
        check_stabilization(prm)
    check_stabilization(prm.replace(delta_stab=1e-3))
    check_stabilization(PRM.replace(delta_stab=0.0))


def test_guard_in_solver_and_override(sp):
    prm = PRM.replace(mu_s=0.0, delta_stab=0.0)
    B = constant(sp.T, (1.0, 0.0, 1.0))
    with pytest.raises(StabilizationError):
        solve_b_halfstep(BSubproblemInput(B, zero_v(sp), constant(sp.S, 0.0), 0.1, prm))
    new, _ = solve_b_halfstep(BSubproblemInput(B, zero_v(sp), constant(sp.S, 0.0), 0.1, prm, allow_unstabilized=True))
    assert np.allclose(new.coeffs, B.coeffs)


def test_min_eigenvalue(sp):
    assert min_eigenvalue(constant(sp.T, (1.0, 0.0, 1.0))) == pytest.approx(1.0)
    assert min_eigenvalue(constant(sp.T, (2.0, 1.0, 2.0))) == pytest.approx(1.0)


# Navier-Stokes --------------------------------------------------------------

def ns_input(sp, prm, phi, B=None, m=None, v_n=None, **kw):
    v0 = zero_v(sp) if v_n is None else v_n
    B = constant(sp.T, (1.0, 0.0, 1.0)) if B is None else B
    m = constant(sp.S, 0.0) if m is None else m
    return NSSubproblemInput(v0, phi, phi, m, B, v0, sp.Q, 0.1, prm, **kw)


def test_rest_state(sp):
    v, p, _ = solve_ns_halfstep(ns_input(sp, PRM, constant(sp.S, 0.2)))
    assert np.abs(v.coeffs).max() < 1e-12 and np.abs(p.coeffs).max() < 1e-12


def test_hydrostatic_balance(sp):
    prm = PRM.replace(body_force=(0.0, -9.81))
    v, p, _ = solve_ns_halfstep(ns_input(sp, prm, constant(sp.S, 1.0)))
    assert np.abs(v.coeffs).max() < 1e-10
    y = sp.Q.dof_coords[:, 1]
    assert np.allclose(p.coeffs, -9.81 * (y - 0.5), atol=1e-10)
    assert abs(mean_value(p)) < 1e-12


def test_mobility_flux_vanishes_for_equal_densities(sp):
    prm = PRM.replace(rho_s=PRM.rho_f)
    phi = interpolate(sp.S, lambda x, y: np.tanh((x - 0.5) / 0.2))
    v_n = interpolate(sp.V, lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y), 0 * x))
    m1 = interpolate(sp.S, lambda x, y: x * y)
    a, _, _ = solve_ns_halfstep(ns_input(sp, prm, phi, v_n=v_n))
    b, _, _ = solve_ns_halfstep(ns_input(sp, prm, phi, v_n=v_n, m=m1))
    assert np.abs(a.coeffs - b.coeffs).max() < 1e-13


def test_boundary_velocity_is_imposed(sp):
    v, _, _ = solve_ns_halfstep(ns_input(sp, PRM, constant(sp.S, 0.0), boundary_velocity=lambda x, y: (1.0 + 0 * x, 0 * y)))
    bd = sp.V.boundary_scalar_dofs()
    assert np.allclose(v.coeffs[bd], 1.0) and np.allclose(v.coeffs[bd + sp.V.n_scalar], 0.0)
    assert np.allclose(v.coeffs[: sp.V.n_scalar], 1.0, atol=1e-10)
