"""Binned radial and axial profiles of nodal fields over solvent vertices."""
from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, RegionTag

logger = logging.getLogger(__name__)

__all__ = ["Profile", "radial_profile", "axial_profile", "EmptyProfileWarning"]


class EmptyProfileWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Profile:
    """Bin midpoints, per-bin means (``(K, bins)``) and vertex counts."""

    coordinate: str
    midpoints: np.ndarray
    means: np.ndarray
    counts: np.ndarray
    names: tuple

    def to_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("\t".join([self.coordinate, "count", *self.names]) + "\n")
        for b, mid in enumerate(self.midpoints):
            cells = [repr(float(mid)), str(int(self.counts[b]))]
            cells += [repr(float(v)) for v in self.means[:, b]]
            buf.write("\t".join(cells) + "\n")
        return buf.getvalue()

    def column(self, name_or_index) -> np.ndarray:
        i = self.names.index(name_or_index) if isinstance(name_or_index, str) else name_or_index
        return self.means[i]


def _as_fields(fields):
    f = np.asarray(fields, dtype=float)
    return f[None, :] if f.ndim == 1 else f


def _binned(values, coord, edges):
    nb = len(edges) - 1
    idx = np.searchsorted(edges, coord, side="right") - 1
    idx[coord == edges[-1]] = nb - 1
    keep = (idx >= 0) & (idx < nb)
    counts = np.bincount(idx[keep], minlength=nb)
    means = np.full((len(values), nb), np.nan)
    nz = counts > 0
    for k, v in enumerate(values):
        sums = np.bincount(idx[keep], weights=v[keep], minlength=nb)
        means[k, nz] = sums[nz] / counts[nz]
    return means, counts


def _names(names, k):
    return tuple(names) if names is not None else tuple(f"c_{i + 1}" for i in range(k))


def radial_profile(
    mesh: Mesh, fields, center, bins: int, r_min: float = 0.0, r_max: float | None = None, names=None
) -> Profile:
    """Arithmetic bin means of nodal values versus distance from ``center``.

    Only vertices of solvent tetrahedra are used. Empty bins hold NaN.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    f = _as_fields(fields)
    mask = mesh.region_vertices(RegionTag.SOLVENT)
    r = np.linalg.norm(mesh.vertices[mask] - np.asarray(center, dtype=float), axis=1)
    if r_max is None:
        r_max = float(r.max()) if r.size else 1.0
    edges = np.linspace(r_min, r_max, bins + 1)
    means, counts = _binned(f[:, mask], r, edges)
    return Profile("r", 0.5 * (edges[1:] + edges[:-1]), means, counts, _names(names, len(f)))


def axial_profile(
    mesh: Mesh, fields, axis: int, window: float, bins: int,
    center=(0.0, 0.0, 0.0), z_range=None, names=None,
) -> Profile:
    """Bin means along coordinate ``axis`` for solvent vertices within ``window`` of the axis line.

    The axis line passes through ``center``. An empty window yields an
    all-NaN profile and an :class:`EmptyProfileWarning`.
    """
    if bins < 1:
        raise ValueError("bins must be at least 1")
    if axis not in (0, 1, 2):
        raise ValueError("axis must be 0, 1 or 2")
    f = _as_fields(fields)
    solvent = mesh.region_vertices(RegionTag.SOLVENT)
    x = mesh.vertices - np.asarray(center, dtype=float)
    others = [d for d in range(3) if d != axis]
    rho = np.linalg.norm(x[:, others], axis=1)
    mask = solvent & (rho <= window)
    z = mesh.vertices[:, axis]
    lo, hi = z_range if z_range is not None else (z.min(), z.max())
    edges = np.linspace(lo, hi, bins + 1)
    if not mask.any():
        warnings.warn(f"no solvent vertex within {window} of the axis", EmptyProfileWarning, stacklevel=2)
    means, counts = _binned(f[:, mask], z[mask], edges)
    return Profile("xyz"[axis], 0.5 * (edges[1:] + edges[:-1]), means, counts, _names(names, len(f)))
