"""Tetrahedral P1 finite elements for the steady size-modified Poisson-Nernst-Planck equations.

The main entry points are :func:`smpnp.gummel.gummel_solve` for coupled
solves, :mod:`smpnp.mms` for the manufactured-solution study and
:mod:`smpnp.sphere` for the charged-sphere case.
"""
from .fem import assemble_load, assemble_weighted_laplacian, element_geometry, quadrature
from .gummel import GummelConfig, GummelError, GummelProblem, GummelResult, Model, gummel_solve
from .linalg import BreakdownError, ConvergenceError, LinearSystem, apply_dirichlet, solve_bicgstab, solve_cg
from .mesh import BoundaryTag, Mesh, RegionTag, generate_cube_mesh, parse_msh, tag_spherical_region, validate
from .nernst_planck import Discretization, assemble_np_iafem, assemble_np_standard
from .physics import PackingError, PhysicalConstants, Species, bernoulli, edge_coefficient, psi_field
from .poisson import FixedCharges, assemble_poisson, coulomb_potential, parse_pqr, solve_harmonic

__version__ = "0.1.0"

__all__ = [
    "assemble_load", "assemble_weighted_laplacian", "element_geometry", "quadrature",
    "GummelConfig", "GummelError", "GummelProblem", "GummelResult", "Model", "gummel_solve",
    "BreakdownError", "ConvergenceError", "LinearSystem", "apply_dirichlet", "solve_bicgstab", "solve_cg",
    "BoundaryTag", "Mesh", "RegionTag", "generate_cube_mesh", "parse_msh", "tag_spherical_region", "validate",
    "Discretization", "assemble_np_iafem", "assemble_np_standard",
    "PackingError", "PhysicalConstants", "Species", "bernoulli", "edge_coefficient", "psi_field",
    "FixedCharges", "assemble_poisson", "coulomb_potential", "parse_pqr", "solve_harmonic",
]
