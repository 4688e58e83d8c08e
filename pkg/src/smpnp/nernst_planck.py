"""Size-modified Nernst-Planck systems for one species.

Two discretisations of ``-div(D (grad c + c grad Psi)) = f`` on the solvent
region:

* ``IAFEM``: inverse averaging of the exponential coefficient on each edge,
  giving element entries ``D B(Psi_i - Psi_j) e_ij`` (off-diagonal) and
  ``-sum_k D B(Psi_k - Psi_i) e_ik`` (diagonal);
* ``STANDARD``: Galerkin P1 with the drift and steric terms frozen at the
  previous iterate.

Zero normal flux on the molecular surface is natural; Dirichlet rows sit on
solvent vertices of ``DIRICHLET`` faces.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .fem import assembly_pattern, mesh_geometry, quadrature
from .linalg import LinearSystem, apply_dirichlet
from .mesh import BoundaryTag, Mesh, RegionTag
from .physics import PackingError, Species, bernoulli

__all__ = [
    "Discretization",
    "NpSystem",
    "np_dirichlet",
    "iafem_element_matrices",
    "assemble_np_iafem",
    "assemble_np_standard",
    "np_residual",
]


class Discretization(str, enum.Enum):
    IAFEM = "IAFEM"
    STANDARD = "STANDARD"


@dataclass(frozen=True)
class NpSystem:
    system: LinearSystem
    discretization: Discretization

    @property
    def matrix(self):
        return self.system.matrix

    @property
    def rhs(self):
        return self.system.rhs


def np_dirichlet(mesh: Mesh):
    """Constrained vertex indices for a concentration unknown.

    Returns the solvent vertices on ``DIRICHLET`` faces and, separately, the
    vertices outside the solvent region (held at zero).
    """
    solvent = mesh.region_vertices(RegionTag.SOLVENT)
    dirichlet = np.nonzero(mesh.tagged_vertices(BoundaryTag.DIRICHLET) & solvent)[0]
    outside = np.nonzero(~solvent)[0]
    return dirichlet, outside


def _constraints(mesh, boundary_values, constrain):
    if not constrain:
        return None, None
    dirichlet, outside = np_dirichlet(mesh)
    bv = np.broadcast_to(np.asarray(boundary_values, dtype=float), (mesh.n_vertices,))
    idx = np.concatenate([dirichlet, outside])
    vals = np.concatenate([bv[dirichlet], np.zeros(len(outside))])
    return idx, vals


def _finish(mesh, A, rhs, boundary_values, constrain, kind) -> NpSystem:
    if rhs is None:
        rhs = np.zeros(mesh.n_vertices)
    idx, vals = _constraints(mesh, boundary_values, constrain)
    system = LinearSystem(A, rhs, idx, vals, symmetric=False)
    if constrain:
        system = apply_dirichlet(system)
    return NpSystem(system, kind)


def iafem_element_matrices(stiffness: np.ndarray, psi_local: np.ndarray, diffusion: np.ndarray) -> np.ndarray:
    """IAFEM element matrices from ``(M, 4, 4)`` geometric stiffness and ``(M, 4)`` nodal Psi."""
    dpsi = psi_local[:, :, None] - psi_local[:, None, :]  # Psi_i - Psi_j
    De = diffusion[:, None, None] * stiffness
    off = De * bernoulli(dpsi)
    # diagonal: -sum_{k != i} D B(Psi_k - Psi_i) e_ik
    trans = De * bernoulli(-dpsi)
    idx = np.arange(4)
    trans[:, idx, idx] = 0.0
    off[:, idx, idx] = -trans.sum(axis=2)
    return off


def assemble_np_iafem(
    mesh: Mesh,
    species: Species,
    psi: np.ndarray,
    boundary_values=0.0,
    rhs: np.ndarray | None = None,
    constrain: bool = True,
) -> NpSystem:
    """Inverse-averaging system for one species given its nodal ``psi``.

    Parameters
    ----------
    boundary_values : float or (N,) array
        Dirichlet concentration (number density) on the outer boundary.
    rhs : (N,) array, optional
        Source load vector; zero by default.
    constrain : bool
        If False the raw operator is returned without Dirichlet rows.
    """
    psi = np.asarray(psi, dtype=float)
    solvent = mesh.solvent_mask
    if not np.all(np.isfinite(psi[mesh.tets[solvent]])):
        raise ValueError("Psi must be finite on solvent vertices")
    geo = mesh_geometry(mesh)
    D = species.element_diffusion(mesh.centroids[solvent])
    local = iafem_element_matrices(geo.stiffness[solvent], psi[mesh.tets[solvent]], D)
    A = assembly_pattern(mesh).assemble(_scatter(local, solvent))
    return _finish(mesh, A, rhs, boundary_values, constrain, Discretization.IAFEM)


def _scatter(local, mask):
    full = np.zeros((len(mask), 4, 4))
    full[mask] = local
    return full


def assemble_np_standard(
    mesh: Mesh,
    species: Species,
    u: np.ndarray,
    concentrations,
    all_species,
    a0: float,
    boundary_values=0.0,
    rhs: np.ndarray | None = None,
    constrain: bool = True,
    scale: float = 1.0,
    size_effects: bool = True,
    steric_scale: float = 1.0,
) -> NpSystem:
    """Galerkin system with drift and steric terms frozen at the previous iterate.

    Bilinear form, linear in the unknown ``c``::

        int_Os D (grad c + z c grad u + s k c S / (1 - scale P)) . grad v

    with ``S = sum_l a_l^3 grad c_l`` and ``P = sum_l a_l^3 c_l`` taken from
    ``concentrations`` and ``s = steric_scale``. ``grad u`` and ``S`` are constant per element; the
    factor ``c / (1 - scale P)`` is integrated with the degree-2 rule.
    """
    u = np.asarray(u, dtype=float)
    solvent = mesh.solvent_mask
    tets = mesh.tets[solvent]
    geo = mesh_geometry(mesh)
    grads = geo.grads[solvent]
    vol = geo.volume[solvent]
    D = species.element_diffusion(mesh.centroids[solvent])

    gu = np.einsum("mk,mkd->md", u[tets], grads)
    # drift: int D z c_j phi_j grad u . grad phi_i = D z |T|/4 (grad u . grad phi_i)
    drift_i = species.valence * np.einsum("md,mid->mi", gu, grads)
    local = geo.stiffness[solvent] + drift_i[:, :, None] * (vol / 4.0)[:, None, None]

    k = steric_scale * species.k(a0) if size_effects else 0.0
    if k != 0.0:
        c = np.asarray(concentrations, dtype=float).reshape(len(all_species), -1)
        a3 = np.array([s.size**3 for s in all_species])
        P = (a3[:, None] * c).sum(axis=0)
        S = np.einsum("mk,mkd->md", P[tets], grads)
        rule = quadrature(2)
        Pq = P[tets] @ rule.points.T  # (M, Q)
        denom = 1.0 - scale * Pq
        if np.any(denom <= 0):
            m, q = np.unravel_index(np.argmin(denom), denom.shape)
            raise PackingError(int(tets[m, np.argmax(rule.points[q])]), float(denom[m, q]))
        # w_j = int_T phi_j / (1 - scale P)
        w = ((rule.weights / denom) @ rule.points) * vol[:, None]
        steric_i = k * np.einsum("md,mid->mi", S, grads)
        local = local + steric_i[:, :, None] * w[:, None, :]

    local = local * D[:, None, None]
    A = assembly_pattern(mesh).assemble(_scatter(local, solvent))
    return _finish(mesh, A, rhs, boundary_values, constrain, Discretization.STANDARD)


def np_residual(system: NpSystem | LinearSystem, c: np.ndarray) -> np.ndarray:
    """``A c - b`` on the unconstrained rows."""
    s = system.system if isinstance(system, NpSystem) else system
    r = s.matrix @ np.asarray(c, dtype=float) - s.rhs
    return r[s.free]
