"""Quadrature, spaces, assembly and boundary handling."""
import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from eulerfsi.fem import (
    FEFunction,
    apply_dirichlet,
    assemble_convection,
    assemble_divergence,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_vector_laplacian_and_symgrad,
    constant,
    integrate,
    interpolate,
    make_space,
    quadrature_rule,
)
from eulerfsi.mesh import Mesh, build_uniform


def single_triangle(scale=1.0):
    return Mesh(scale * np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), scale)


# quadrature --------------------------------------------------------------

@pytest.mark.parametrize("order", range(1, 7))
def test_rule_exact_up_to_order(order):
    bary, w = quadrature_rule(order)
    x, y = bary[:, 1], bary[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert abs(np.sum(w * x**a * y**b) - exact) < 1e-14


def test_centroid_rule():
    bary, w = quadrature_rule(1)
    assert np.allclose(bary, 1 / 3) and np.allclose(w, [0.5])


def test_x2y2_order4():
    bary, w = quadrature_rule(4)
    assert np.sum(w * bary[:, 1] ** 2 * bary[:, 2] ** 2) == pytest.approx(1 / 180, abs=1e-15)


def test_unsupported_order():
    with pytest.raises(ValueError):
        quadrature_rule(7)


def test_integrate():
    m = build_uniform(16, "right-diagonal")
    assert integrate(m, lambda x, y: 1.0 + 0 * x) == pytest.approx(1.0, abs=1e-13)
    val = integrate(m, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), order=4)
    assert abs(val - 4 / np.pi**2) < 1e-4


# spaces -------------------------------------------------------------------

def test_interpolation_reproduces_linears():
    m = build_uniform(3, "union-jack")
    f = interpolate(make_space(m, 1), lambda x, y: x + y)
    assert f.evaluate([0.25, 0.5]) == pytest.approx(0.75)


def test_p2_reproduces_quadratics():
    m = build_uniform(3, "union-jack")
    f = interpolate(make_space(m, 2), lambda x, y: x**2 - 3 * x * y + y)
    pts = np.array([[0.13, 0.71], [0.9, 0.05]])
    assert np.allclose(f.evaluate(pts), pts[:, 0] ** 2 - 3 * pts[:, 0] * pts[:, 1] + pts[:, 1])


def test_dof_counts():
    m = build_uniform(4, "right-diagonal")
    assert make_space(m, 1).dof_count == 25
    assert make_space(m, 2).n_scalar == 81
    assert make_space(m, 2, "vector2").dof_count == 162
    assert make_space(m, 1, "symtensor2").dof_count == 75


def test_constant_vector_layout():
    V = make_space(build_uniform(2), 2, "vector2")
    c = constant(V, (1.0, -2.0))
    assert np.all(c.component(0) == 1.0) and np.all(c.component(1) == -2.0)


# assembly -----------------------------------------------------------------

def test_p1_mass_single_triangle():
    M = assemble_mass(make_space(single_triangle(), 1)).toarray()
    assert np.allclose(M, (0.5 / 12) * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-15)


def test_mass_partition_of_unity_and_linearity():
    S = make_space(build_uniform(5, "union-jack"), 2)
    M1 = assemble_mass(S)
    assert M1.sum() == pytest.approx(1.0, abs=1e-13)
    assert abs(assemble_mass(S, 2.0) - 2.0 * M1).max() < 1e-15


def test_p1_stiffness_reference_triangle():
    K = assemble_stiffness(make_space(single_triangle(), 1)).toarray()
    assert np.allclose(K, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


def test_stiffness_kernel_and_scale_invariance():
    S = make_space(build_uniform(4, "union-jack"), 2)
    K = assemble_stiffness(S)
    assert np.abs(K @ np.ones(S.dof_count)).max() < 1e-12
    K1 = assemble_stiffness(make_space(single_triangle(), 2)).toarray()
    K3 = assemble_stiffness(make_space(single_triangle(3.0), 2)).toarray()
    assert np.allclose(K1, K3, atol=1e-13)


def test_convection_properties():
    S = make_space(build_uniform(4, "union-jack"), 1)
    C0 = assemble_convection(S, (0.0, 0.0))
    assert C0.count_nonzero() == 0 or abs(C0).max() == 0
    C = assemble_convection(S, (1.0, 0.0))
    assert np.abs(C @ np.ones(S.dof_count)).max() < 1e-12
    x = S.dof_coords[:, 0]
    assert np.allclose(C @ x, assemble_mass(S) @ np.ones(S.dof_count), atol=1e-14)


def test_symgrad_kernel_contains_rigid_motions():
    V = make_space(build_uniform(4, "union-jack"), 2, "vector2")
    A = assemble_vector_laplacian_and_symgrad(V, 1.0)
    rot = interpolate(V, lambda x, y: (-y, x)).coeffs
    trans = constant(V, (0.3, -0.7)).coeffs
    assert np.abs(A @ rot).max() < 1e-12
    assert np.abs(A @ trans).max() < 1e-12


def test_divergence_examples():
    m = build_uniform(8, "union-jack")
    V, Q = make_space(m, 2, "vector2"), make_space(m, 1)
    D = assemble_divergence(V, Q)
    rot = interpolate(V, lambda x, y: (-y, x)).coeffs
    assert np.abs(D @ rot).max() < 1e-12
    one = np.ones(Q.dof_count)
    assert one @ (D @ interpolate(V, lambda x, y: (x, 0 * y)).coeffs) == pytest.approx(1.0, abs=1e-13)
    vq = interpolate(V, lambda x, y: (x**2, 0 * y)).coeffs
    q = interpolate(Q, lambda x, y: 1 + x * y).coeffs
    exact = integrate(m, lambda x, y: 2 * x * (1 + x * y), order=6)
    assert q @ (D @ vq) == pytest.approx(exact, abs=1e-12)


def _poisson(n, f, g):
    S = make_space(build_uniform(n, "union-jack"), 1)
    K = assemble_stiffness(S)
    b = assemble_load(S, f)
    dofs = S.boundary_scalar_dofs()
    x, y = S.dof_coords[dofs, 0], S.dof_coords[dofs, 1]
    A, rhs = apply_dirichlet(K, b, dofs, g(x, y))
    return S, spla.spsolve(A.tocsc(), rhs)


def test_zero_dirichlet_everywhere():
    S = make_space(build_uniform(3), 1)
    A, rhs = apply_dirichlet(assemble_stiffness(S), np.ones(S.dof_count), np.arange(S.dof_count), np.zeros(S.dof_count))
    assert np.all(spla.spsolve(A.tocsc(), rhs) == 0.0)


def test_harmonic_linear_reproduced():
    S, u = _poisson(6, 0.0, lambda x, y: x)
    assert np.allclose(u, S.dof_coords[:, 0], atol=1e-12)


def test_poisson_center_value():
    S, u = _poisson(32, 1.0, lambda x, y: 0 * x)
    center = FEFunction(S, u).evaluate([0.5, 0.5])
    assert abs(center - 0.0737) < 2e-3


def test_apply_dirichlet_keeps_inputs_and_symmetry():
    S = make_space(build_uniform(3), 2)
    K = assemble_stiffness(S)
    before = K.copy()
    b = np.ones(S.dof_count)
    A, rhs = apply_dirichlet(K, b, [0, 5], [1.0, 2.0])
    assert abs(K - before).max() == 0 and np.all(b == 1.0)
    assert abs(A - A.T).max() < 1e-15
    assert rhs[0] == 1.0 and rhs[5] == 2.0
