"""Regularised Poisson equation with singular fixed charges.

The potential inside the molecule is split into an analytic Coulomb part
``u_s``, a harmonic correction ``u_h`` (Laplace problem in the molecule with
``u_h = -u_s`` on the interface) and the regular remainder ``u`` solved by
finite elements on the whole mesh. The jump of ``eps_m d(u_s + u_h)/dn``
across the interface enters the regular problem as a surface load.

All potentials are in units of ``k_B T / e_c``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .fem import assemble_mass, assemble_weighted_laplacian, mesh_geometry
from .linalg import LinearSystem, apply_dirichlet, solve_cg
from .mesh import BoundaryTag, Mesh, RegionTag
from .physics import PhysicalConstants

logger = logging.getLogger(__name__)

__all__ = [
    "FixedCharges",
    "PqrParseError",
    "SingularityError",
    "RegularizedPotential",
    "parse_pqr",
    "coulomb_potential",
    "solve_harmonic",
    "interface_jump_load",
    "permittivity",
    "assemble_poisson",
]


class PqrParseError(ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SingularityError(ValueError):
    pass


@dataclass(frozen=True)
class FixedCharges:
    """Point charges: ``positions`` (K, 3) in A, ``charges`` (K,) in units of e_c."""

    positions: np.ndarray
    charges: np.ndarray
    radii: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        q = np.asarray(self.charges, dtype=float).reshape(-1)
        if len(pos) != len(q):
            raise ValueError("one charge per position is required")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "charges", q)
        if self.radii is not None:
            object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float).reshape(-1))

    @classmethod
    def empty(cls) -> "FixedCharges":
        return cls(np.zeros((0, 3)), np.zeros(0))

    @classmethod
    def single(cls, position, charge) -> "FixedCharges":
        return cls(np.asarray(position, dtype=float).reshape(1, 3), [charge])

    def __len__(self):
        return len(self.charges)

    def outside_molecule(self, mesh: Mesh) -> np.ndarray:
        """Indices of charges not contained in any molecule tetrahedron."""
        tets = mesh.tets[mesh.molecule_mask]
        if len(self) == 0:
            return np.zeros(0, dtype=int)
        if len(tets) == 0:
            return np.arange(len(self))
        p = mesh.vertices[tets]
        d = np.transpose(p[:, 1:, :] - p[:, :1, :], (0, 2, 1))
        inv = np.linalg.inv(d)
        inside = np.zeros(len(self), dtype=bool)
        for k, x in enumerate(self.positions):
            lam = np.einsum("mij,mj->mi", inv, x - p[:, 0, :])
            inside[k] = np.any(np.all(lam >= -1e-12, axis=1) & (lam.sum(axis=1) <= 1 + 1e-12))
        return np.nonzero(~inside)[0]


def parse_pqr(text: str | TextIO) -> FixedCharges:
    """Read ATOM/HETATM records of a PQR file.

    The last five whitespace-separated fields of each record are taken as
    ``x y z charge radius``; other record types are ignored.
    """
    if not isinstance(text, str):
        text = text.read()
    pos, q, rad = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0] not in ("ATOM", "HETATM"):
            continue
        if len(fields) < 6:
            raise PqrParseError("too few fields in atom record", lineno)
        try:
            x, y, z, charge, radius = (float(f) for f in fields[-5:])
        except ValueError:
            raise PqrParseError(f"malformed numeric field in {' '.join(fields[-5:])!r}", lineno) from None
        pos.append((x, y, z))
        q.append(charge)
        rad.append(radius)
    return FixedCharges(np.array(pos).reshape(-1, 3), np.array(q), np.array(rad))


def coulomb_potential(charges: FixedCharges, x, eps_m: float, constants: PhysicalConstants):
    """Coulomb potential ``sum_j C q_j / (eps_m |x - x_j|)`` and its gradient.

    ``C`` is ``constants.coulomb_prefactor``. ``x`` is a point or an
    ``(K, 3)`` array of points.

    Returns
    -------
    value : float or (K,) array
    gradient : (3,) or (K, 3) array
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x.reshape(-1, 3)
    val = np.zeros(len(xs))
    grad = np.zeros((len(xs), 3))
    scale = constants.coulomb_prefactor / eps_m
    for xj, qj in zip(charges.positions, charges.charges):
        d = xs - xj
        r = np.linalg.norm(d, axis=1)
        if np.any(r == 0):
            raise SingularityError(f"Coulomb potential evaluated at the charge position {tuple(xj)}")
        val += scale * qj / r
        grad -= (scale * qj / r**3)[:, None] * d
    if single:
        return float(val[0]), grad[0]
    return val, grad


@dataclass(frozen=True)
class RegularizedPotential:
    """Singular and harmonic components of the molecular potential.

    ``harmonic`` holds nodal values of ``u_h`` (zero off the molecule);
    the regular component is produced by the Gummel solve.
    """

    charges: FixedCharges
    harmonic: np.ndarray
    eps_m: float
    constants: PhysicalConstants
    iterations: int = 0

    def singular(self, x):
        return coulomb_potential(self.charges, x, self.eps_m, self.constants)

    def total_molecular(self, mesh: Mesh, regular: np.ndarray) -> np.ndarray:
        """``u_s + u_h + u`` on molecule vertices (NaN elsewhere and at charge sites)."""
        out = np.full(mesh.n_vertices, np.nan)
        mol = mesh.region_vertices(RegionTag.MOLECULE)
        for i in np.nonzero(mol)[0]:
            try:
                us, _ = self.singular(mesh.vertices[i])
            except SingularityError:
                continue
            out[i] = us + self.harmonic[i] + regular[i]
        return out


def solve_harmonic(
    mesh: Mesh, charges: FixedCharges, constants: PhysicalConstants, tol: float = 1e-10
) -> RegularizedPotential:
    """P1 Laplace solve in the molecule with ``u_h = -u_s`` on the interface."""
    mol_tets = mesh.molecule_mask
    if not mol_tets.any():
        raise ValueError("mesh has no MOLECULE region")
    iface = mesh.tagged_vertices(BoundaryTag.INTERFACE)
    if not iface.any():
        raise ValueError("molecule region has no INTERFACE boundary")
    mol = mesh.region_vertices(RegionTag.MOLECULE)
    A = assemble_weighted_laplacian(mesh, 1.0, mol_tets)
    g = np.zeros(mesh.n_vertices)
    bidx = np.nonzero(iface)[0]
    if len(charges):
        us, _ = coulomb_potential(charges, mesh.vertices[bidx], constants.eps_m, constants)
        g[bidx] = -us
    fixed = np.concatenate([bidx, np.nonzero(~mol)[0]])
    system = apply_dirichlet(LinearSystem(A, np.zeros(mesh.n_vertices), fixed, g[fixed], symmetric=True))
    uh, its = solve_cg(system.matrix, system.rhs, tol=tol)
    return RegularizedPotential(charges, uh, constants.eps_m, constants, its)


_FACE_RULE = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


def interface_faces(mesh: Mesh):
    """Interface faces ordered with their molecule-side tetrahedron.

    Returns the face vertex triples, the molecule-side tetrahedron index and
    the unit normal pointing out of the molecule.
    """
    faces = mesh.faces[mesh.face_tags == BoundaryTag.INTERFACE]
    topo = mesh.face_topology
    pos = topo.lookup(faces)
    if np.any(pos < 0):
        raise ValueError("interface face is not a face of the mesh")
    owners = topo.owners[pos]
    reg = np.where(owners >= 0, mesh.tet_regions[np.maximum(owners, 0)], -1)
    side = np.where(reg[:, 0] == RegionTag.MOLECULE, 0, np.where(reg[:, 1] == RegionTag.MOLECULE, 1, -1))
    if np.any(side < 0):
        bad = int(np.nonzero(side < 0)[0][0])
        raise ValueError(f"interface face {tuple(faces[bad])} has no molecule-side tetrahedron")
    tet = owners[np.arange(len(faces)), side]
    p = mesh.vertices[faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]
    # orient away from the molecule tet's centroid
    flip = np.einsum("fd,fd->f", n, p[:, 0] - mesh.centroids[tet]) < 0
    n[flip] *= -1
    return faces, tet, n


def interface_jump_load(
    mesh: Mesh, potential: RegularizedPotential, constants: PhysicalConstants, harmonic_flux: str = "element"
) -> np.ndarray:
    """``g_i = int_Gm eps_m d(u_s + u_h)/dn phi_i`` with ``n`` leaving the molecule.

    The Coulomb part uses a three-point rule (interior points with
    barycentric weights 2/3, 1/6, 1/6) on each interface face.

    ``harmonic_flux`` selects the ``u_h`` part:

    ``"element"``
        constant P1 gradient of the molecule-side tetrahedron dotted with the
        face normal;
    ``"variational"``
        the discrete Green's formula ``int_Om grad u_h . grad phi_i``, whose
        entries sum to zero like the exact flux of a harmonic function.
        On staircase interfaces the element variant has an O(1) net flux
        (about 58% of the Coulomb flux on the voxel sphere, independent of h).
    """
    g = np.zeros(mesh.n_vertices)
    faces, tet, normal = interface_faces(mesh)
    if len(faces) == 0:
        return g
    p = mesh.vertices[faces]
    area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    xq = np.einsum("qk,fkd->fqd", _FACE_RULE, p)  # (F, 3, 3)
    if len(potential.charges):
        _, gs = coulomb_potential(potential.charges, xq.reshape(-1, 3), potential.eps_m, constants)
        flux = np.einsum("fqd,fd->fq", gs.reshape(len(faces), 3, 3), normal)
    else:
        flux = np.zeros((len(faces), 3))
    if harmonic_flux == "element":
        grads = mesh_geometry(mesh).grads[tet]
        guh = np.einsum("fk,fkd->fd", potential.harmonic[mesh.tets[tet]], grads)
        flux = flux + np.einsum("fd,fd->f", guh, normal)[:, None]
    elif harmonic_flux != "variational":
        raise ValueError(f"harmonic_flux must be 'element' or 'variational', got {harmonic_flux!r}")
    local = (constants.eps_m * flux @ _FACE_RULE) * (area / 3.0)[:, None]
    np.add.at(g, faces.ravel(), local.ravel())
    if harmonic_flux == "variational":
        on_face = np.zeros(mesh.n_vertices, dtype=bool)
        on_face[faces.ravel()] = True
        Km = assemble_weighted_laplacian(mesh, 1.0, mesh.molecule_mask)
        g[on_face] += constants.eps_m * (Km @ potential.harmonic)[on_face]
    return g


def permittivity(mesh: Mesh, constants: PhysicalConstants) -> np.ndarray:
    """Relative permittivity per tetrahedron: ``eps_m`` in the molecule, ``eps_s`` in solvent."""
    return np.where(mesh.molecule_mask, constants.eps_m, constants.eps_s)


def poisson_dirichlet(mesh: Mesh) -> np.ndarray:
    return np.nonzero(mesh.tagged_vertices(BoundaryTag.DIRICHLET))[0]


def assemble_poisson(
    mesh: Mesh,
    concentrations,
    species,
    constants: PhysicalConstants,
    potential: RegularizedPotential | None = None,
    boundary_values=0.0,
    extra_load: np.ndarray | None = None,
    interface_load: np.ndarray | None = None,
    charge_mass: str = "lumped",
) -> LinearSystem:
    """Regularised Poisson system for ``u`` with Dirichlet data ``u_0``.

    ``-div(eps grad u) = charge_prefactor * lambda * sum z_i c_i`` with the
    interface load subtracted on the right-hand side. ``interface_load`` may
    be passed precomputed (it does not change between Gummel sweeps).

    ``charge_mass`` selects how the nodal charge density is integrated:
    ``"lumped"`` (row-sum P1 mass, so each vertex carries only its own
    charge) or ``"consistent"``. The consistent mass couples neighbouring
    vertices with positive weights, which on coarse meshes next to a dense
    counter-ion layer produces a spurious depletion shell.
    """
    A = assemble_weighted_laplacian(mesh, permittivity(mesh, constants))
    c = np.asarray(concentrations, dtype=float).reshape(len(species), -1)
    charge = np.zeros(mesh.n_vertices)
    for s, ci in zip(species, c):
        charge += s.valence * ci
    b = constants.charge_prefactor * (_solvent_mass(mesh, charge_mass) @ charge)
    if interface_load is None and potential is not None:
        interface_load = interface_jump_load(mesh, potential, constants)
    if interface_load is not None:
        b = b - interface_load
    if extra_load is not None:
        b = b + extra_load
    idx = poisson_dirichlet(mesh)
    vals = np.broadcast_to(np.asarray(boundary_values, dtype=float), (mesh.n_vertices,))[idx]
    return apply_dirichlet(LinearSystem(A, b, idx, vals, symmetric=True))


def _solvent_mass(mesh: Mesh, kind: str = "lumped"):
    if kind not in ("lumped", "consistent"):
        raise ValueError(f"charge_mass must be 'lumped' or 'consistent', got {kind!r}")
    key = f"_solvent_mass_{kind}"
    M = mesh.__dict__.get(key)
    if M is None:
        M = assemble_mass(mesh, mesh.solvent_mask)
        if kind == "lumped":
            M = sp.diags(np.asarray(M.sum(axis=1)).ravel()).tocsr()
        mesh.__dict__[key] = M
    return M
