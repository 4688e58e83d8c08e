"""Manufactured-solution test on the unit cube.

Dimensionless system with exact fields

    u   = sin(pi x) sin(pi y) sin(pi z)
    c_p = sin(2 pi x) sin(2 pi y) sin(2 pi z)
    c_n = sin(3 pi x) sin(3 pi y) sin(3 pi z)

and fluxes ``J_i = D_i (grad c_i + z_i c_i grad u + s k_i c_i S / (1 - gamma P))``
with ``P = sum a_l^3 c_l`` and ``S = grad P``. The IAFEM path realises this
flux through ``Psi_i = z_i u - (s k_i / gamma) ln(1 - gamma P)``.

By default ``s = gamma``: concentrations are molar, ``gamma c`` is the number
density, and the steric term is the physical one. With
``gamma_in_gradient=False`` (``s = 1``) the factor appears in the
denominator only. That variant is anti-diffusive wherever
``1 + k_n a_n^3 c_n < 0`` (for example ``c_n = -1`` at the cube centre),
and the fixed-point iteration diverges on refined meshes.
"""
from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .fem import assemble_load, h1_seminorm_error, l2_error
from .gummel import GummelConfig, GummelProblem, GummelResult, gummel_solve
from .mesh import generate_cube_mesh
from .physics import MOLAR_TO_NUMBER_DENSITY, PhysicalConstants, Species

__all__ = [
    "SineField",
    "MmsProblem",
    "MmsResult",
    "mms_sources",
    "mms_flux",
    "solve_mms",
    "convergence_study",
    "ConvergenceTable",
    "observed_orders",
]


@dataclass(frozen=True)
class SineField:
    """``prod_d sin(m pi x_d)`` with its gradient and Laplacian."""

    m: int

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod(np.sin(self.m * np.pi * x), axis=-1)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        k = self.m * np.pi
        s = np.sin(k * x)
        c = np.cos(k * x)
        g = np.empty_like(x)
        g[..., 0] = k * c[..., 0] * s[..., 1] * s[..., 2]
        g[..., 1] = k * s[..., 0] * c[..., 1] * s[..., 2]
        g[..., 2] = k * s[..., 0] * s[..., 1] * c[..., 2]
        return g

    def laplacian(self, x):
        return -3.0 * (self.m * np.pi) ** 2 * self.value(x)


@dataclass(frozen=True)
class MmsProblem:
    """Parameters of the manufactured problem (sizes in A, ``D`` in A^2/ps)."""

    d_p: float = 0.196
    d_n: float = 0.203
    a_p: float = 1.51
    a_n: float = 2.37
    a0: float = 3.1
    gamma: float = MOLAR_TO_NUMBER_DENSITY
    gamma_in_gradient: bool = True
    u: SineField = field(default_factory=lambda: SineField(1))
    c_p: SineField = field(default_factory=lambda: SineField(2))
    c_n: SineField = field(default_factory=lambda: SineField(3))

    def without_sizes(self) -> "MmsProblem":
        return replace(self, a_p=0.0, a_n=0.0)

    @property
    def steric_scale(self) -> float:
        return self.gamma if self.gamma_in_gradient else 1.0

    @property
    def species(self):
        return [Species("p", 1, self.d_p, self.a_p), Species("n", -1, self.d_n, self.a_n)]

    @property
    def constants(self) -> PhysicalConstants:
        return PhysicalConstants.dimensionless(gamma=self.gamma, a0=self.a0)

    @property
    def k_p(self):
        """Size ratio of the cation times the steric scale."""
        return self.steric_scale * (self.a_p / self.a0) ** 3

    @property
    def k_n(self):
        return self.steric_scale * (self.a_n / self.a0) ** 3

    def exact(self, name):
        return {"u": self.u, "c_p": self.c_p, "c_n": self.c_n}[name]


def _packing(problem: MmsProblem, x):
    a3p, a3n = problem.a_p**3, problem.a_n**3
    P = a3p * problem.c_p.value(x) + a3n * problem.c_n.value(x)
    S = a3p * problem.c_p.gradient(x) + a3n * problem.c_n.gradient(x)
    lapP = a3p * problem.c_p.laplacian(x) + a3n * problem.c_n.laplacian(x)
    return P, S, lapP


def mms_flux(problem: MmsProblem, x):
    """Exact fluxes ``(J_p, J_n)`` at points ``x`` (each ``(..., 3)``)."""
    x = np.asarray(x, dtype=float)
    P, S, _ = _packing(problem, x)
    q = 1.0 - problem.gamma * P
    gu = problem.u.gradient(x)
    out = []
    for fld, z, k, D in ((problem.c_p, 1, problem.k_p, problem.d_p), (problem.c_n, -1, problem.k_n, problem.d_n)):
        c = fld.value(x)[..., None]
        out.append(D * (fld.gradient(x) + z * c * gu + k * c * S / q[..., None]))
    return tuple(out)


def mms_sources(problem: MmsProblem, x):
    """Closed-form sources ``(f_u, f_p, f_n)`` at points ``x``.

    ``f_u = -lap u - (c_p - c_n)`` and ``f_i = -div J_i`` where

    ``div J_i / D_i = lap c + z (grad c . grad u + c lap u)
    + s k [(grad c . S + c lap P) / Q + gamma c |S|^2 / Q^2]``

    with ``Q = 1 - gamma P``. ``k_p`` and ``k_n`` of ``problem`` already
    carry the factor ``s``.
    """
    x = np.asarray(x, dtype=float)
    P, S, lapP = _packing(problem, x)
    q = 1.0 - problem.gamma * P
    gu = problem.u.gradient(x)
    lapu = problem.u.laplacian(x)
    S2 = np.sum(S * S, axis=-1)
    f_u = -lapu - (problem.c_p.value(x) - problem.c_n.value(x))
    fs = []
    for fld, z, k, D in ((problem.c_p, 1, problem.k_p, problem.d_p), (problem.c_n, -1, problem.k_n, problem.d_n)):
        c = fld.value(x)
        gc = fld.gradient(x)
        div = fld.laplacian(x) + z * (np.sum(gc * gu, axis=-1) + c * lapu)
        div = div + k * ((np.sum(gc * S, axis=-1) + c * lapP) / q + problem.gamma * c * S2 / q**2)
        fs.append(-D * div)
    return f_u, fs[0], fs[1]


@dataclass
class MmsResult:
    n: int
    h: float
    u: np.ndarray
    c: np.ndarray
    l2: dict
    h1: dict
    gummel: GummelResult
    seconds: float


def build_gummel_problem(mesh, problem: MmsProblem) -> GummelProblem:
    species = problem.species
    loads = [assemble_load(mesh, lambda x, j=j: mms_sources(problem, x)[j]) for j in range(3)]
    return GummelProblem(
        mesh=mesh,
        species=species,
        constants=problem.constants,
        potential_bc=0.0,
        concentration_bc=[0.0, 0.0],
        poisson_load=loads[0],
        np_loads=[loads[1], loads[2]],
        packing_scale=problem.gamma,
        steric_scale=problem.steric_scale,
    )


def solve_mms(n: int, config: GummelConfig | None = None, problem: MmsProblem | None = None) -> MmsResult:
    """Gummel solve of the manufactured problem on the ``n``-cube mesh with error norms."""
    if n < 1:
        raise ValueError("n must be positive")
    problem = problem or MmsProblem()
    config = config or GummelConfig()
    t0 = time.perf_counter()
    mesh = generate_cube_mesh(n)
    gp = build_gummel_problem(mesh, problem)
    res = gummel_solve(gp, config)
    fields = {"u": res.u, "c_p": res.c[0], "c_n": res.c[1]}
    l2 = {k: l2_error(mesh, v, problem.exact(k).value) for k, v in fields.items()}
    h1 = {k: h1_seminorm_error(mesh, v, problem.exact(k).gradient) for k, v in fields.items()}
    return MmsResult(n, 1.0 / n, res.u, res.c, l2, h1, res, time.perf_counter() - t0)


def observed_orders(h: Sequence[float], errors: Sequence[float]) -> list:
    """``log(e_coarse / e_fine) / log(h_coarse / h_fine)`` between consecutive levels.

    The first entry is ``None`` (no coarser level).
    """
    out = [None]
    for k in range(1, len(errors)):
        out.append(math.log(errors[k - 1] / errors[k]) / math.log(h[k - 1] / h[k]))
    return out


_FIELDS = ("u", "c_p", "c_n")


@dataclass
class ConvergenceTable:
    h: list
    l2: dict
    h1: dict
    results: list

    def orders(self, norm: str, name: str) -> list:
        errs = (self.l2 if norm == "L2" else self.h1)[name]
        return observed_orders(self.h, errs)

    def to_tsv(self) -> str:
        """Header ``h L2_u ord L2_cp ord ... H1_cn ord`` then one row per level."""
        buf = io.StringIO()
        head = ["h"]
        for norm in ("L2", "H1"):
            for k in _FIELDS:
                head += [f"{norm}_{k.replace('_', '')}", "ord"]
        buf.write("\t".join(head) + "\n")
        for row in range(len(self.h)):
            cells = [f"1/{round(1 / self.h[row])}"]
            for norm in ("L2", "H1"):
                for k in _FIELDS:
                    errs = (self.l2 if norm == "L2" else self.h1)[k]
                    o = self.orders(norm, k)[row]
                    cells += [f"{errs[row]:.4e}", "" if o is None else f"{o:.2f}"]
            buf.write("\t".join(cells) + "\n")
        return buf.getvalue()


def convergence_study(
    levels: Sequence[int],
    config: GummelConfig | None = None,
    problem: MmsProblem | None = None,
    progress=None,
) -> ConvergenceTable:
    """Solve on every level and collect errors; orders via :meth:`ConvergenceTable.orders`."""
    levels = list(levels)
    if not levels:
        raise ValueError("at least one level is required")
    results = []
    for n in levels:
        r = solve_mms(n, config, problem)
        results.append(r)
        if progress is not None:
            progress(r)
    return ConvergenceTable(
        h=[r.h for r in results],
        l2={k: [r.l2[k] for r in results] for k in _FIELDS},
        h1={k: [r.h1[k] for r in results] for k in _FIELDS},
        results=results,
    )
