"""P1 finite elements on tetrahedra.

Basis gradients, geometric stiffness entries ``e_ij = int_T grad(phi_j).grad(phi_i)``,
quadrature rules on the reference tetrahedron, fast assembly onto a fixed
sparsity pattern, load vectors and error norms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .mesh import Mesh

__all__ = [
    "ElementGeometry",
    "QuadratureRule",
    "element_geometry",
    "mesh_geometry",
    "quadrature",
    "AssemblyPattern",
    "assembly_pattern",
    "assemble_weighted_laplacian",
    "assemble_mass",
    "assemble_load",
    "interpolate",
    "l2_error",
    "h1_seminorm_error",
]


@dataclass(frozen=True)
class ElementGeometry:
    """Volumes, barycentric gradients and geometric stiffness of tetrahedra.

    Arrays carry a leading element axis: ``volume`` is ``(M,)``, ``grads``
    is ``(M, 4, 3)`` and ``stiffness`` is ``(M, 4, 4)``.
    """

    volume: np.ndarray
    grads: np.ndarray
    stiffness: np.ndarray


def _geometry(points: np.ndarray) -> ElementGeometry:
    d = points[:, 1:, :] - points[:, :1, :]  # rows are edge vectors from vertex 0
    det = np.linalg.det(d)
    if np.any(det <= 0):
        bad = int(np.nonzero(det <= 0)[0][0])
        raise ValueError(f"tetrahedron {bad} is degenerate or inverted (6*volume = {det[bad]:.3e})")
    # grad(lambda_k), k=1..3, are the columns of inv(d)
    inv = np.linalg.inv(d)
    g = np.empty((len(points), 4, 3))
    g[:, 1:, :] = np.transpose(inv, (0, 2, 1))
    g[:, 0, :] = -g[:, 1:, :].sum(axis=1)
    vol = det / 6.0
    # products commute exactly, so stiffness[i, j] == stiffness[j, i] bitwise
    e = (g[:, :, None, :] * g[:, None, :, :]).sum(axis=-1) * vol[:, None, None]
    return ElementGeometry(vol, g, e)


def element_geometry(points) -> ElementGeometry:
    """Geometry of a single tetrahedron given its four vertices."""
    p = np.asarray(points, dtype=float).reshape(1, 4, 3)
    geo = _geometry(p)
    return ElementGeometry(float(geo.volume[0]), geo.grads[0], geo.stiffness[0])


def mesh_geometry(mesh: Mesh) -> ElementGeometry:
    """Geometry of every tetrahedron of ``mesh`` (cached on the mesh)."""
    geo = mesh.__dict__.get("_geometry")
    if geo is None:
        geo = _geometry(mesh.vertices[mesh.tets])
        for a in (geo.volume, geo.grads, geo.stiffness):
            a.setflags(write=False)
        mesh.__dict__["_geometry"] = geo
    return geo


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates; weights normalised to sum to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def physical_points(self, corners: np.ndarray) -> np.ndarray:
        """Map to physical points; ``corners`` is ``(M, 4, 3)``, result ``(M, Q, 3)``."""
        return np.einsum("qk,mkd->mqd", self.points, corners)


@lru_cache(maxsize=None)
def quadrature(degree: int) -> QuadratureRule:
    """Quadrature rule on the tetrahedron exact for polynomials of ``degree``.

    Degree 1 is the centroid rule, degree 2 the symmetric 4-point rule and
    degree 4 the 27-point collapsed Gauss-Jacobi product rule.
    """
    if degree == 1:
        pts = np.full((1, 4), 0.25)
        w = np.ones(1)
    elif degree == 2:
        a = (5.0 - np.sqrt(5.0)) / 20.0
        b = 1.0 - 3.0 * a
        pts = np.full((4, 4), a)
        np.fill_diagonal(pts, b)
        w = np.full(4, 0.25)
    elif degree == 4:
        pts, w = _conical_product(3)
    else:
        raise ValueError(f"unsupported quadrature degree {degree}; use 1, 2 or 4")
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


def _conical_product(n: int):
    # Duffy collapse of the unit cube onto the reference tetrahedron:
    #   x = u, y = (1-u) v, z = (1-u)(1-v) w,  Jacobian (1-u)^2 (1-v)
    # with Gauss-Jacobi weights absorbing the Jacobian; exact to degree 2n-1.
    ru, wu = roots_jacobi(n, 2.0, 0.0)
    rv, wv = roots_jacobi(n, 1.0, 0.0)
    rw, ww = np.polynomial.legendre.leggauss(n)
    u, v, w = (0.5 * (r + 1.0) for r in (ru, rv, rw))
    wu, wv, ww = wu / 8.0, wv / 4.0, ww / 2.0
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    WT = wu[:, None, None] * wv[None, :, None] * ww[None, None, :]
    x = U
    y = (1 - U) * V
    z = (1 - U) * (1 - V) * W
    pts = np.column_stack([1 - x.ravel() - y.ravel() - z.ravel(), x.ravel(), y.ravel(), z.ravel()])
    weights = WT.ravel()
    return pts, weights / weights.sum()


@dataclass(frozen=True)
class AssemblyPattern:
    """Fixed CSR sparsity pattern of the P1 space on a mesh.

    ``slot[m, i, j]`` is the position in ``indices``/data of entry
    ``(tets[m, i], tets[m, j])``. Assembly accumulates element matrices with
    :func:`numpy.bincount`, which sums in element order and is therefore
    deterministic.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    slot: np.ndarray

    def assemble(self, element_matrices: np.ndarray, mask: np.ndarray | None = None) -> sp.csr_matrix:
        """Sum ``(M, 4, 4)`` element matrices (optionally only where ``mask``) into CSR."""
        vals = np.asarray(element_matrices, dtype=float)
        slots = self.slot
        if mask is not None:
            vals = vals[mask]
            slots = slots[mask]
        data = np.bincount(slots.ravel(), weights=vals.ravel(), minlength=len(self.indices))
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))


def assembly_pattern(mesh: Mesh) -> AssemblyPattern:
    pat = mesh.__dict__.get("_pattern")
    if pat is not None:
        return pat
    n = mesh.n_vertices
    t = mesh.tets
    rows = np.repeat(t[:, :, None], 4, axis=2)
    cols = np.repeat(t[:, None, :], 4, axis=1)
    keys = rows.ravel() * n + cols.ravel()
    uniq, inverse = np.unique(keys, return_inverse=True)
    urows = uniq // n
    indices = (uniq % n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, urows + 1, 1)
    indptr = np.cumsum(indptr)
    pat = AssemblyPattern(n, indptr, indices, inverse.reshape(-1, 4, 4))
    mesh.__dict__["_pattern"] = pat
    return pat


def assemble_weighted_laplacian(mesh: Mesh, coefficient, mask=None) -> sp.csr_matrix:
    """``A[i, j] = sum_T coefficient(T) * e_ij^T``.

    ``coefficient`` is a scalar or one value per tetrahedron; ``mask`` limits
    the sum to a subset of tetrahedra.
    """
    geo = mesh_geometry(mesh)
    coef = np.broadcast_to(np.asarray(coefficient, dtype=float), (mesh.n_tets,))
    if not np.all(np.isfinite(coef)):
        raise ValueError("coefficient must be finite on every element")
    return assembly_pattern(mesh).assemble(geo.stiffness * coef[:, None, None], mask)


_P1_MASS = (np.ones((4, 4)) + np.eye(4)) / 20.0


def assemble_mass(mesh: Mesh, mask=None) -> sp.csr_matrix:
    """Consistent P1 mass matrix ``int phi_i phi_j`` (over ``mask`` tets)."""
    vol = mesh_geometry(mesh).volume
    return assembly_pattern(mesh).assemble(vol[:, None, None] * _P1_MASS, mask)


def assemble_load(mesh: Mesh, density, mask=None, degree: int = 2) -> np.ndarray:
    """Load vector ``b[i] = sum_T int_T density * phi_i`` by quadrature.

    ``density`` maps an ``(K, 3)`` array of points to ``(K,)`` values.
    """
    rule = quadrature(degree)
    tets = mesh.tets if mask is None else mesh.tets[mask]
    vol = mesh_geometry(mesh).volume
    vol = vol if mask is None else vol[mask]
    xq = rule.physical_points(mesh.vertices[tets])
    f = np.asarray(density(xq.reshape(-1, 3)), dtype=float).reshape(len(tets), -1)
    # (M, Q) * (Q, 4) -> (M, 4)
    local = (f * rule.weights) @ rule.points * vol[:, None]
    return np.bincount(tets.ravel(), weights=local.ravel(), minlength=mesh.n_vertices)


def interpolate(mesh: Mesh, fn) -> np.ndarray:
    """Nodal interpolant of ``fn`` (vectorised over ``(N, 3)`` points)."""
    return np.asarray(fn(mesh.vertices), dtype=float)


def l2_error(mesh: Mesh, field: np.ndarray, exact, mask=None, degree: int = 4) -> float:
    """``||u_h - u||_0`` with ``u_h`` the P1 function of nodal values ``field``."""
    rule = quadrature(degree)
    tets = mesh.tets if mask is None else mesh.tets[mask]
    vol = mesh_geometry(mesh).volume
    vol = vol if mask is None else vol[mask]
    uh = field[tets] @ rule.points.T  # (M, Q)
    xq = rule.physical_points(mesh.vertices[tets])
    u = np.asarray(exact(xq.reshape(-1, 3)), dtype=float).reshape(uh.shape)
    return float(np.sqrt(np.sum(((uh - u) ** 2 @ rule.weights) * vol)))


def h1_seminorm_error(mesh: Mesh, field: np.ndarray, exact_grad, mask=None, degree: int = 4) -> float:
    """``|u_h - u|_1``; ``exact_grad`` maps ``(K, 3)`` points to ``(K, 3)`` gradients."""
    rule = quadrature(degree)
    geo = mesh_geometry(mesh)
    tets, grads, vol = mesh.tets, geo.grads, geo.volume
    if mask is not None:
        tets, grads, vol = tets[mask], grads[mask], vol[mask]
    guh = np.einsum("mk,mkd->md", field[tets], grads)  # constant per element
    xq = rule.physical_points(mesh.vertices[tets])
    g = np.asarray(exact_grad(xq.reshape(-1, 3)), dtype=float).reshape(len(tets), -1, 3)
    diff = ((g - guh[:, None, :]) ** 2).sum(axis=-1)
    return float(np.sqrt(np.sum((diff @ rule.weights) * vol)))
