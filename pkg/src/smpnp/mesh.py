"""Tetrahedral meshes with region and boundary tags.

A :class:`Mesh` stores vertex coordinates (in Angstrom), tetrahedra with a
region tag each, and a list of tagged triangular faces. Faces tagged
``DIRICHLET`` or ``NEUMANN`` lie on the outer hull; ``INTERFACE`` faces are
interior faces separating a solvent tetrahedron from a molecule tetrahedron.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, TextIO

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "RegionTag",
    "BoundaryTag",
    "Mesh",
    "MeshParseError",
    "MeshValidationReport",
    "DEFAULT_MSH_TAGS",
    "generate_cube_mesh",
    "tag_spherical_region",
    "split_dirichlet_by_axis",
    "validate",
    "parse_msh",
    "write_msh",
    "dump_mesh",
    "load_mesh",
]


class RegionTag(enum.IntEnum):
    SOLVENT = 0
    MOLECULE = 1


class BoundaryTag(enum.IntEnum):
    DIRICHLET = 0
    NEUMANN = 1
    INTERFACE = 2


class MeshParseError(ValueError):
    """Raised for malformed mesh input; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# Local faces of a tetrahedron, each listed opposite to the vertex of the same index.
_LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


def _signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    d = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(d) / 6.0


class Mesh:
    """Immutable tetrahedral mesh.

    Parameters
    ----------
    vertices : (N, 3) array_like
        Vertex coordinates.
    tets : (M, 4) array_like of int
        Vertex indices of each tetrahedron.
    tet_regions : (M,) array_like of int
        :class:`RegionTag` value per tetrahedron.
    faces : (F, 3) array_like of int
        Vertex indices of tagged faces.
    face_tags : (F,) array_like of int
        :class:`BoundaryTag` value per face.
    """

    def __init__(self, vertices, tets, tet_regions, faces=None, face_tags=None):
        self.vertices = _frozen(np.asarray(vertices, dtype=float).reshape(-1, 3))
        self.tets = _frozen(np.asarray(tets, dtype=np.int64).reshape(-1, 4))
        self.tet_regions = _frozen(np.asarray(tet_regions, dtype=np.int8).reshape(-1))
        if faces is None:
            faces = np.zeros((0, 3), dtype=np.int64)
            face_tags = np.zeros(0, dtype=np.int8)
        self.faces = _frozen(np.asarray(faces, dtype=np.int64).reshape(-1, 3))
        self.face_tags = _frozen(np.asarray(face_tags, dtype=np.int8).reshape(-1))
        if len(self.tet_regions) != len(self.tets):
            raise ValueError("one region tag per tetrahedron is required")
        if len(self.face_tags) != len(self.faces):
            raise ValueError("one boundary tag per face is required")
        for name, idx in (("tetrahedron", self.tets), ("face", self.faces)):
            if idx.size and (idx.min() < 0 or idx.max() >= len(self.vertices)):
                raise ValueError(f"{name} vertex index out of range")

    def __repr__(self):
        return (
            f"Mesh(vertices={self.n_vertices}, tets={self.n_tets}, "
            f"faces={len(self.faces)}, molecule_tets={int(self.molecule_mask.sum())})"
        )

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return _frozen(_signed_volumes(self.vertices, self.tets))

    @cached_property
    def centroids(self) -> np.ndarray:
        return _frozen(self.vertices[self.tets].mean(axis=1))

    @property
    def solvent_mask(self) -> np.ndarray:
        return self.tet_regions == RegionTag.SOLVENT

    @property
    def molecule_mask(self) -> np.ndarray:
        return self.tet_regions == RegionTag.MOLECULE

    def region_vertices(self, region: RegionTag) -> np.ndarray:
        """Boolean mask of vertices touched by a tetrahedron of ``region``."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.tets[self.tet_regions == region].ravel()] = True
        return mask

    def tagged_vertices(self, tag: BoundaryTag) -> np.ndarray:
        """Boolean mask of vertices lying on a face tagged ``tag``."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.faces[self.face_tags == tag].ravel()] = True
        return mask

    @cached_property
    def face_topology(self) -> "FaceTopology":
        return FaceTopology.build(self.tets)


@dataclass(frozen=True)
class FaceTopology:
    """Unique faces of a tetrahedralisation and the tetrahedra adjacent to each.

    ``keys`` holds each face's sorted vertex triple; ``owners`` holds up to two
    adjacent tetrahedron indices (-1 if absent), ``local`` the local face
    index in the corresponding owner and ``counts`` the number of adjacent
    tetrahedra.
    """

    keys: np.ndarray
    owners: np.ndarray
    local: np.ndarray
    counts: np.ndarray

    @classmethod
    def build(cls, tets: np.ndarray) -> "FaceTopology":
        all_faces = np.sort(tets[:, _LOCAL_FACES].reshape(-1, 3), axis=1)
        keys, inverse, counts = np.unique(
            all_faces, axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.reshape(-1)
        owners = np.full((len(keys), 2), -1, dtype=np.int64)
        local = np.full((len(keys), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        first = np.ones(len(order), dtype=bool)
        sorted_inv = inverse[order]
        first[1:] = sorted_inv[1:] != sorted_inv[:-1]
        slot = np.where(first, 0, 1)
        tet_of = order // 4
        loc_of = order % 4
        owners[sorted_inv, slot] = tet_of
        local[sorted_inv, slot] = loc_of
        if np.any(counts > 2):
            logger.warning("%d faces shared by more than two tetrahedra", int((counts > 2).sum()))
        return cls(_frozen(keys), _frozen(owners), _frozen(local), _frozen(counts))

    def lookup(self, faces: np.ndarray) -> np.ndarray:
        """Index into ``keys`` for each face in ``faces`` (-1 if not a tet face)."""
        faces = np.sort(np.asarray(faces, dtype=np.int64).reshape(-1, 3), axis=1)
        if len(faces) == 0 or len(self.keys) == 0:
            return np.full(len(faces), -1, dtype=np.int64)
        n = max(int(self.keys.max()), int(faces.max())) + 1
        kc = (self.keys[:, 0] * n + self.keys[:, 1]) * n + self.keys[:, 2]
        fc = (faces[:, 0] * n + faces[:, 1]) * n + faces[:, 2]
        pos = np.minimum(np.searchsorted(kc, fc), len(kc) - 1)
        return np.where(kc[pos] == fc, pos, -1)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _oriented(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    tets = tets.copy()
    neg = _signed_volumes(vertices, tets) < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
    return tets


def generate_cube_mesh(n: int, bounds=((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))) -> Mesh:
    """Structured Freudenthal (Kuhn) mesh of an axis-aligned box.

    Each of the ``n**3`` cells is split into six tetrahedra sharing the cell's
    main diagonal. All tetrahedra are tagged ``SOLVENT`` and all hull faces
    ``DIRICHLET``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"subdivisions per axis must be >= 1, got {n}")
    n = int(n)
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != (3,) or hi.shape != (3,):
        raise ValueError("bounds must be two 3D points")
    if np.any(hi - lo <= 0):
        raise ValueError(f"degenerate bounds {lo} .. {hi}")

    axes = [np.linspace(lo[k], hi[k], n + 1) for k in range(3)]
    # Pin the upper edge exactly so the hull is the box.
    for k in range(3):
        axes[k][-1] = hi[k]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    ii, jj, kk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    tets = []
    for perm in itertools.permutations(range(3)):
        corner = np.zeros((3, len(ii)), dtype=np.int64)
        path = [vid(ii, jj, kk)]
        for axis in perm:
            corner[axis] += 1
            path.append(vid(ii + corner[0], jj + corner[1], kk + corner[2]))
        tets.append(np.column_stack(path))
    # cell-major ordering: the six tets of a cell are contiguous
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    tets = _oriented(vertices, tets)

    topo = FaceTopology.build(tets)
    hull = topo.keys[topo.counts == 1]
    mesh = Mesh(
        vertices,
        tets,
        np.full(len(tets), RegionTag.SOLVENT, dtype=np.int8),
        hull,
        np.full(len(hull), BoundaryTag.DIRICHLET, dtype=np.int8),
    )
    mesh.__dict__["face_topology"] = topo
    return mesh


def tag_spherical_region(mesh: Mesh, center, radius: float) -> Mesh:
    """Retag tetrahedra whose centroid lies within ``radius`` of ``center``.

    Retagged tetrahedra become ``MOLECULE``. Interface faces are recomputed:
    every interior face separating a molecule tetrahedron from a solvent
    tetrahedron is tagged ``INTERFACE``; hull faces keep their tags.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(mesh.centroids - center, axis=1)
    regions = mesh.tet_regions.copy()
    inside = dist <= radius
    regions[inside] = RegionTag.MOLECULE
    n_in = int(inside.sum())
    if n_in == 0:
        logger.warning("spherical region of radius %g at %s contains no tetrahedra", radius, center)
    else:
        logger.info("tagged %d of %d tetrahedra as MOLECULE", n_in, mesh.n_tets)
    return _with_interfaces(mesh, regions)


def _with_interfaces(mesh: Mesh, regions: np.ndarray) -> Mesh:
    topo = mesh.face_topology
    keep = mesh.face_tags != BoundaryTag.INTERFACE
    interior = topo.counts == 2
    r0 = regions[topo.owners[:, 0]]
    r1 = regions[np.where(topo.owners[:, 1] >= 0, topo.owners[:, 1], 0)]
    iface = interior & (r0 != r1)
    faces = np.concatenate([mesh.faces[keep], topo.keys[iface]])
    tags = np.concatenate(
        [mesh.face_tags[keep], np.full(int(iface.sum()), BoundaryTag.INTERFACE, dtype=np.int8)]
    )
    out = Mesh(mesh.vertices, mesh.tets, regions, faces, tags)
    out.__dict__["face_topology"] = topo
    return out


def split_dirichlet_by_axis(mesh: Mesh, axis: int = 2, atol: float = 1e-9) -> Mesh:
    """Keep ``DIRICHLET`` only on the two hull planes normal to ``axis``.

    The remaining hull faces become ``NEUMANN`` (channel-style boundaries).
    """
    coords = mesh.vertices[:, axis]
    lo, hi = coords.min(), coords.max()
    fc = coords[mesh.faces]
    on_cap = np.all(np.abs(fc - lo) <= atol, axis=1) | np.all(np.abs(fc - hi) <= atol, axis=1)
    tags = mesh.face_tags.copy()
    tags[(tags == BoundaryTag.DIRICHLET) & ~on_cap] = BoundaryTag.NEUMANN
    out = Mesh(mesh.vertices, mesh.tets, mesh.tet_regions, mesh.faces, tags)
    if "face_topology" in mesh.__dict__:
        out.__dict__["face_topology"] = mesh.face_topology
    return out


@dataclass
class MeshValidationReport:
    """Invariant violations found by :func:`validate`."""

    volume: list[str] = field(default_factory=list)
    incidence: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    indices: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return self.indices + self.volume + self.incidence + self.tags

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        lines = [f"{k}: {v}" for k, v in self.stats.items()]
        lines.append(f"violations: {len(self.violations)}")
        lines.extend(f"  {v}" for v in self.violations)
        return "\n".join(lines)


def validate(mesh: Mesh) -> MeshValidationReport:
    """Check every :class:`Mesh` invariant and list the violations."""
    report = MeshValidationReport()
    nv = mesh.n_vertices
    for name, idx in (("tetrahedron", mesh.tets), ("face", mesh.faces)):
        bad = np.nonzero(np.any((idx < 0) | (idx >= nv), axis=1))[0]
        report.indices.extend(f"{name} {i} has out-of-range vertex index" for i in bad)
    if report.indices:
        return report

    vols = mesh.signed_volumes
    report.volume.extend(
        f"tetrahedron {i} has non-positive volume {vols[i]:.6g}" for i in np.nonzero(vols <= 0)[0]
    )
    regions_ok = np.isin(mesh.tet_regions, [t.value for t in RegionTag])
    report.tags.extend(
        f"tetrahedron {i} has unknown region tag {mesh.tet_regions[i]}"
        for i in np.nonzero(~regions_ok)[0]
    )
    tags_ok = np.isin(mesh.face_tags, [t.value for t in BoundaryTag])
    report.tags.extend(
        f"face {i} has unknown boundary tag {mesh.face_tags[i]}" for i in np.nonzero(~tags_ok)[0]
    )

    topo = mesh.face_topology
    counts = topo.counts
    over = np.nonzero(counts > 2)[0]
    report.incidence.extend(f"face {tuple(topo.keys[i])} shared by more than two tetrahedra" for i in over)

    pos = topo.lookup(mesh.faces)
    tagged = np.zeros(len(topo.keys), dtype=bool)
    for i, (p, tag) in enumerate(zip(pos, mesh.face_tags)):
        if p < 0:
            report.incidence.append(f"face {i} {tuple(mesh.faces[i])} belongs to no tetrahedron")
            continue
        if tagged[p]:
            report.incidence.append(f"face {i} is listed more than once")
        tagged[p] = True
        if tag == BoundaryTag.INTERFACE:
            if counts[p] != 2:
                report.incidence.append(f"interface face {i} does not separate two tetrahedra")
            else:
                r = mesh.tet_regions[topo.owners[p]]
                if r[0] == r[1]:
                    report.tags.append(f"interface face {i} does not separate solvent and molecule")
        elif counts[p] != 1:
            report.incidence.append(f"boundary face {i} belongs to {counts[p]} tetrahedra")
    untagged_hull = np.nonzero((counts == 1) & ~tagged)[0]
    report.incidence.extend(f"hull face {tuple(topo.keys[i])} carries no boundary tag" for i in untagged_hull)

    interior = counts == 2
    o1 = np.where(topo.owners[:, 1] >= 0, topo.owners[:, 1], 0)
    mixed = interior & (mesh.tet_regions[topo.owners[:, 0]] != mesh.tet_regions[o1]) & ~tagged
    report.tags.extend(
        f"face {tuple(topo.keys[i])} separates solvent and molecule but is not INTERFACE"
        for i in np.nonzero(mixed)[0]
    )

    report.stats = {
        "vertices": nv,
        "tetrahedra": mesh.n_tets,
        "molecule_tetrahedra": int(mesh.molecule_mask.sum()),
        "volume": float(vols.sum()),
        **{f"faces_{t.name.lower()}": int((mesh.face_tags == t).sum()) for t in BoundaryTag},
    }
    return report


# --- Gmsh 2.2 ASCII ---------------------------------------------------------

DEFAULT_MSH_TAGS: dict[int, RegionTag | BoundaryTag] = {
    1: RegionTag.SOLVENT,
    2: RegionTag.MOLECULE,
    10: BoundaryTag.DIRICHLET,
    11: BoundaryTag.NEUMANN,
    12: BoundaryTag.INTERFACE,
}

_MSH_TET = 4
_MSH_TRI = 2


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, what: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise MeshParseError(f"unexpected end of input while reading {what}", self.pos)

    @property
    def lineno(self) -> int:
        return self.pos


def parse_msh(text: str | TextIO, tags: Mapping[int, RegionTag | BoundaryTag] | None = None):
    """Parse Gmsh MSH 2.2 ASCII text.

    Tetrahedra (type 4) and triangles (type 2) are kept; their first tag
    (the physical group) is mapped through ``tags``. Other element types are
    skipped.

    Returns
    -------
    mesh : Mesh
    skipped : int
        Number of elements skipped for unsupported type.
    """
    if not isinstance(text, str):
        text = text.read()
    tags = DEFAULT_MSH_TAGS if tags is None else tags
    src = _Lines(text)
    nodes: dict[int, int] = {}
    coords: list[list[float]] = []
    tets, tet_tags, tris, tri_tags = [], [], [], []
    skipped = 0
    seen_format = seen_nodes = seen_elements = False

    while src.pos < len(src.lines):
        try:
            line = src.next("section header")
        except MeshParseError:
            break
        if line == "$MeshFormat":
            fmt = src.next("$MeshFormat").split()
            if len(fmt) < 3 or not fmt[0].startswith("2"):
                raise MeshParseError(f"unsupported mesh format {' '.join(fmt)!r}", src.lineno)
            if fmt[1] != "0":
                raise MeshParseError("binary MSH files are not supported", src.lineno)
            _expect(src, "$EndMeshFormat")
            seen_format = True
        elif line == "$Nodes":
            count = _int(src.next("node count"), src.lineno)
            for _ in range(count):
                parts = src.next("node").split()
                ln = src.lineno
                if len(parts) < 4 or parts[0].startswith("$"):
                    raise MeshParseError("truncated $Nodes section", ln)
                nid = _int(parts[0], ln)
                nodes[nid] = len(coords)
                coords.append([_float(p, ln) for p in parts[1:4]])
            _expect(src, "$EndNodes")
            seen_nodes = True
        elif line == "$Elements":
            if not seen_nodes:
                raise MeshParseError("$Elements before $Nodes", src.lineno)
            count = _int(src.next("element count"), src.lineno)
            for _ in range(count):
                parts = src.next("element").split()
                ln = src.lineno
                if len(parts) < 3 or parts[0].startswith("$"):
                    raise MeshParseError("truncated $Elements section", ln)
                etype = _int(parts[1], ln)
                ntags = _int(parts[2], ln)
                body = parts[3 + ntags:]
                if etype not in (_MSH_TET, _MSH_TRI):
                    skipped += 1
                    continue
                if ntags < 1:
                    raise MeshParseError("element without a physical tag", ln)
                need = 4 if etype == _MSH_TET else 3
                if len(body) < need:
                    raise MeshParseError("element has too few node references", ln)
                try:
                    conn = [nodes[_int(b, ln)] for b in body[:need]]
                except KeyError as exc:
                    raise MeshParseError(
                        f"element references unknown node {exc.args[0]} ({len(nodes)} nodes defined)", ln
                    ) from None
                phys = _int(parts[3], ln)
                if phys not in tags:
                    raise MeshParseError(f"physical tag {phys} missing from the tag dictionary", ln)
                kind = tags[phys]
                if etype == _MSH_TET:
                    if not isinstance(kind, RegionTag):
                        raise MeshParseError(f"physical tag {phys} maps to {kind!r}, not a region", ln)
                    tets.append(conn)
                    tet_tags.append(int(kind))
                else:
                    if not isinstance(kind, BoundaryTag):
                        raise MeshParseError(f"physical tag {phys} maps to {kind!r}, not a boundary", ln)
                    tris.append(conn)
                    tri_tags.append(int(kind))
            _expect(src, "$EndElements")
            seen_elements = True
        elif line.startswith("$"):
            # unknown section: skip to its end marker
            end = "$End" + line[1:]
            while src.next(end) != end:
                pass
        else:
            raise MeshParseError(f"unexpected content {line[:40]!r}", src.lineno)

    if not seen_format:
        raise MeshParseError("missing $MeshFormat header", 1)
    if not (seen_nodes and seen_elements):
        raise MeshParseError("missing $Nodes or $Elements section", src.lineno)
    if skipped:
        logger.warning("skipped %d elements of unsupported type", skipped)
    mesh = Mesh(
        np.array(coords, dtype=float).reshape(-1, 3),
        np.array(tets, dtype=np.int64).reshape(-1, 4),
        np.array(tet_tags, dtype=np.int8),
        np.array(tris, dtype=np.int64).reshape(-1, 3),
        np.array(tri_tags, dtype=np.int8),
    )
    return mesh, skipped


def _expect(src: _Lines, marker: str):
    line = src.next(marker)
    if line != marker:
        raise MeshParseError(f"expected {marker}, found {line[:40]!r}", src.lineno)


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise MeshParseError(f"invalid integer {token!r}", line) from None


def _float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise MeshParseError(f"invalid number {token!r}", line) from None


def write_msh(mesh: Mesh, tags: Mapping[int, RegionTag | BoundaryTag] | None = None) -> str:
    """Serialize to Gmsh MSH 2.2 ASCII; the inverse of :func:`parse_msh`."""
    tags = DEFAULT_MSH_TAGS if tags is None else tags
    phys = {}
    for pid, kind in tags.items():
        phys.setdefault((type(kind), int(kind)), pid)
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(mesh.n_vertices)]
    out.extend(f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.vertices.tolist()))
    out.append("$EndNodes")
    out.append("$Elements")
    out.append(str(len(mesh.faces) + mesh.n_tets))
    eid = 1
    for f, t in zip(mesh.faces.tolist(), mesh.face_tags.tolist()):
        pid = phys[(BoundaryTag, t)]
        out.append(f"{eid} 2 2 {pid} {pid} {f[0] + 1} {f[1] + 1} {f[2] + 1}")
        eid += 1
    for c, r in zip(mesh.tets.tolist(), mesh.tet_regions.tolist()):
        pid = phys[(RegionTag, r)]
        out.append(f"{eid} 4 2 {pid} {pid} {c[0] + 1} {c[1] + 1} {c[2] + 1} {c[3] + 1}")
        eid += 1
    out.append("$EndElements")
    return "\n".join(out) + "\n"


# --- internal plain-text dump ----------------------------------------------

_DUMP_HEADER = "smpnp-mesh 1"


def dump_mesh(mesh: Mesh) -> str:
    """Plain-text dump: header, counts, then one vertex/tet/face per line."""
    out = [_DUMP_HEADER, f"{mesh.n_vertices} {mesh.n_tets} {len(mesh.faces)}"]
    out.extend(f"{x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist())
    out.extend(
        f"{a} {b} {c} {d} {RegionTag(r).name}"
        for (a, b, c, d), r in zip(mesh.tets.tolist(), mesh.tet_regions.tolist())
    )
    out.extend(
        f"{a} {b} {c} {BoundaryTag(t).name}"
        for (a, b, c), t in zip(mesh.faces.tolist(), mesh.face_tags.tolist())
    )
    return "\n".join(out) + "\n"


def load_mesh(text: str | TextIO) -> Mesh:
    """Read the format written by :func:`dump_mesh`."""
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    if not lines or lines[0].strip() != _DUMP_HEADER:
        raise MeshParseError(f"expected header {_DUMP_HEADER!r}", 1)
    try:
        nv, nt, nf = (int(t) for t in lines[1].split())
    except (IndexError, ValueError):
        raise MeshParseError("invalid count line", 2) from None
    if len(lines) < 2 + nv + nt + nf:
        raise MeshParseError("truncated mesh dump", len(lines))
    body = lines[2:]
    try:
        verts = [[float(t) for t in body[i].split()] for i in range(nv)]
        tets = [body[nv + i].split() for i in range(nt)]
        faces = [body[nv + nt + i].split() for i in range(nf)]
        return Mesh(
            np.array(verts).reshape(-1, 3),
            np.array([[int(t) for t in row[:4]] for row in tets], dtype=np.int64).reshape(-1, 4),
            np.array([RegionTag[row[4]] for row in tets], dtype=np.int8),
            np.array([[int(t) for t in row[:3]] for row in faces], dtype=np.int64).reshape(-1, 3),
            np.array([BoundaryTag[row[3]] for row in faces], dtype=np.int8),
        )
    except (ValueError, KeyError, IndexError) as exc:
        raise MeshParseError(f"malformed mesh dump: {exc}") from None


def mesh_from_tets(vertices, tets, regions: Iterable[int] | None = None) -> Mesh:
    """Build a mesh from raw connectivity, tagging all hull faces ``DIRICHLET``."""
    tets = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
    if regions is None:
        regions = np.full(len(tets), RegionTag.SOLVENT, dtype=np.int8)
    regions = np.asarray(list(regions), dtype=np.int8)
    topo = FaceTopology.build(tets)
    hull = topo.keys[topo.counts == 1]
    base = Mesh(vertices, tets, regions, hull, np.full(len(hull), BoundaryTag.DIRICHLET, dtype=np.int8))
    base.__dict__["face_topology"] = topo
    return _with_interfaces(base, regions)
