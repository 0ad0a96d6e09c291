from .assembly import (
    apply_dirichlet,
    assemble_convection,
    assemble_divergence,
    assemble_gradient_load,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    assemble_vector_laplacian_and_symgrad,
    cached_form,
    coefficient,
    default_order,
    scatter_matrix,
    scatter_vector,
)
from .quadrature import quadrature_rule
from .space import (
    FEFunction,
    FESpace,
    Quadrature,
    constant,
    get_quadrature,
    integrate,
    interpolate,
    make_space,
    reference_basis,
    scalar_space,
)

__all__ = [
    "FEFunction",
    "FESpace",
    "Quadrature",
    "apply_dirichlet",
    "assemble_convection",
    "assemble_divergence",
    "assemble_gradient_load",
    "assemble_load",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_vector_laplacian_and_symgrad",
    "cached_form",
    "coefficient",
    "default_order",
    "constant",
    "get_quadrature",
    "integrate",
    "interpolate",
    "make_space",
    "quadrature_rule",
    "reference_basis",
    "scalar_space",
    "scatter_matrix",
    "scatter_vector",
]
