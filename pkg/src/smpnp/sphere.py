"""Charged-sphere test case: a point charge at the centre of a voxelised sphere in a box of electrolyte."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .gummel import GummelProblem
from .mesh import Mesh, generate_cube_mesh, split_dirichlet_by_axis, tag_spherical_region
from .physics import PhysicalConstants, Species
from .poisson import FixedCharges, solve_harmonic

logger = logging.getLogger(__name__)

__all__ = ["SpherePreset", "build_sphere_mesh", "kcl", "mixed_nakcl", "sphere_problem"]

D_NA, D_K, D_CL = 0.133, 0.196, 0.203


@dataclass(frozen=True)
class SpherePreset:
    """Box ``[-half_width, half_width]^3`` around ``center`` with a molecule of ``radius``."""

    n: int = 24
    half_width: float = 80.0
    radius: float = 10.0
    center: tuple = (0.0, 0.0, 0.0)
    split_axis: int | None = None

    @property
    def bounds(self):
        c = np.asarray(self.center, dtype=float)
        return tuple(c - self.half_width), tuple(c + self.half_width)


def build_sphere_mesh(preset: SpherePreset = SpherePreset()) -> Mesh:
    """Cube mesh with a centroid-tagged molecule; optionally Neumann side faces."""
    mesh = generate_cube_mesh(preset.n, preset.bounds)
    mesh = tag_spherical_region(mesh, preset.center, preset.radius)
    if preset.split_axis is not None:
        mesh = split_dirichlet_by_axis(mesh, preset.split_axis)
    return mesh


def kcl(bulk: float = 0.1, a_k: float = 0.0, a_cl: float = 0.0):
    """1:1 KCl with optional ion sizes (A)."""
    return [Species("K", 1, D_K, a_k, bulk), Species("Cl", -1, D_CL, a_cl, bulk)]


def mixed_nakcl(a_na: float = 4.79, a_k: float = 5.51, a_cl: float = 6.37, c_na=0.1, c_k=0.1, c_cl=0.2):
    """1:1:2 Na/K/Cl mixture with hydrated sizes."""
    return [
        Species("Na", 1, D_NA, a_na, c_na),
        Species("K", 1, D_K, a_k, c_k),
        Species("Cl", -1, D_CL, a_cl, c_cl),
    ]


def sphere_problem(
    mesh: Mesh,
    species,
    charges: FixedCharges,
    constants: PhysicalConstants | None = None,
    u0: float = 0.0,
    harmonic_flux: str = "element",
    charge_mass: str = "lumped",
) -> GummelProblem:
    """Gummel problem with the singular/harmonic split precomputed.

    ``u0`` is the dimensionless Dirichlet potential on ``DIRICHLET`` faces;
    concentrations are held at their bulk values there. ``harmonic_flux``
    is passed to :func:`~smpnp.poisson.interface_jump_load` and
    ``charge_mass`` to :func:`~smpnp.poisson.assemble_poisson`.
    """
    constants = constants or PhysicalConstants()
    outside = charges.outside_molecule(mesh)
    if outside.size:
        warnings.warn(f"{outside.size} fixed charge(s) lie outside the molecule region", stacklevel=2)
    potential = solve_harmonic(mesh, charges, constants) if mesh.molecule_mask.any() else None
    return GummelProblem(
        mesh=mesh, species=species, constants=constants, potential_bc=u0,
        potential=potential, harmonic_flux=harmonic_flux, charge_mass=charge_mass,
    )
