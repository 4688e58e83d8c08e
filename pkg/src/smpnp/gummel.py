"""Gummel fixed-point iteration for the coupled Poisson and size-modified NP system.

One sweep, starting from the relaxed iterate ``(u_old, c_old)``:

1. solve Poisson with ``c_old`` for ``u_new``;
2. form ``Psi_i`` from ``(u_old, c_old)``;
3. solve the NP system of every species for ``c_new`` (IAFEM or standard FEM);
4. stop if ``||u_new - u_old|| / ||u_new|| < tol``; otherwise under-relax
   ``x = alpha * x_old + (1 - alpha) * x_new`` for ``u`` and every ``c_i``.

If the relaxed concentrations violate the packing constraint on a solvent
vertex, the step is halved towards the old iterate until they do not.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .linalg import LinearSolverError, solve_bicgstab, solve_cg
from .mesh import Mesh, RegionTag
from .nernst_planck import Discretization, assemble_np_iafem, assemble_np_standard, np_dirichlet
from .physics import PackingError, PhysicalConstants, Species, packing_argument, psi_field
from .poisson import RegularizedPotential, assemble_poisson, interface_jump_load

logger = logging.getLogger(__name__)

__all__ = [
    "Model",
    "GummelConfig",
    "GummelProblem",
    "GummelState",
    "GummelResult",
    "GummelError",
    "convergence_metric",
    "relax",
    "gummel_solve",
]


class Model(str, enum.Enum):
    PNP = "PNP"
    SMPNP = "SMPNP"


class GummelError(RuntimeError):
    """Inner failure during a sweep; ``iteration`` is the sweep index (1-based)."""

    def __init__(self, message, iteration):
        super().__init__(f"Gummel iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class GummelConfig:
    discretization: Discretization = Discretization.IAFEM
    model: Model = Model.SMPNP
    tol: float = 1e-6
    max_iter: int = 500
    alpha: float = 0.1
    poisson_tol: float = 1e-10
    np_tol: float = 1e-10
    init: str = "bulk"
    max_backtracks: int = 40
    linear_max_iter: int = 5000

    def __post_init__(self):
        object.__setattr__(self, "discretization", Discretization(self.discretization))
        object.__setattr__(self, "model", Model(self.model))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"relaxation alpha must lie in (0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.init not in ("bulk", "zero"):
            raise ValueError(f"init must be 'bulk' or 'zero', got {self.init!r}")

    def with_overrides(self, **kw) -> "GummelConfig":
        return replace(self, **kw)


@dataclass
class GummelProblem:
    """Everything the iteration needs besides the numerical settings.

    Parameters
    ----------
    mesh, species, constants
        Geometry, mobile ions and unit system.
    potential_bc : float or (N,) array
        Dirichlet value of ``u`` on ``DIRICHLET`` faces.
    concentration_bc : sequence of float or (N,) array, optional
        Dirichlet concentration per species in internal units. Defaults to
        each species' bulk value converted to number density.
    potential : RegularizedPotential, optional
        Singular/harmonic components; supplies the interface load.
    poisson_load, np_loads : optional
        Extra load vectors (manufactured sources).
    packing_scale : float
        Multiplier of ``sum a^3 c`` inside the packing denominator (1 for
        number densities).
    steric_scale : float
        Multiplier of the steric flux numerator ``k_i c_i sum a^3 grad c``.
    harmonic_flux : str
        Interface treatment of the harmonic component, see
        :func:`~smpnp.poisson.interface_jump_load`.
    charge_mass : str
        ``"lumped"`` or ``"consistent"`` integration of the Poisson charge
        term, see :func:`~smpnp.poisson.assemble_poisson`.
    """

    mesh: Mesh
    species: Sequence[Species]
    constants: PhysicalConstants
    potential_bc: object = 0.0
    concentration_bc: Sequence | None = None
    potential: RegularizedPotential | None = None
    poisson_load: np.ndarray | None = None
    np_loads: Sequence[np.ndarray | None] | None = None
    packing_scale: float = 1.0
    steric_scale: float = 1.0
    harmonic_flux: str = "element"
    charge_mass: str = "lumped"

    def __post_init__(self):
        self.species = list(self.species)
        if not self.species:
            raise ValueError("at least one species is required")
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ValueError(f"species names must be unique: {names}")
        if self.concentration_bc is None:
            self.concentration_bc = [s.bulk * self.constants.gamma for s in self.species]
        if len(self.concentration_bc) != len(self.species):
            raise ValueError("one concentration boundary value per species is required")
        if self.np_loads is None:
            self.np_loads = [None] * len(self.species)
        n = self.mesh.n_vertices
        self._cbc = [np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in self.concentration_bc]
        self._ubc = np.broadcast_to(np.asarray(self.potential_bc, dtype=float), (n,))

    def nodal_concentration_bc(self, i: int) -> np.ndarray:
        return self._cbc[i]

    @property
    def nodal_potential_bc(self) -> np.ndarray:
        return self._ubc


@dataclass
class GummelState:
    iteration: int
    u: np.ndarray
    c: np.ndarray  # (K, N)
    u_prev: np.ndarray
    c_prev: np.ndarray
    alpha: float
    history: list = field(default_factory=list)


@dataclass
class GummelResult:
    u: np.ndarray
    c: np.ndarray
    converged: bool
    iterations: int
    history: list
    log: list
    poisson_iterations: list
    np_iterations: list
    potential: RegularizedPotential | None = None

    @property
    def final_metric(self) -> float:
        return self.history[-1] if self.history else float("nan")


def convergence_metric(u_new, u_old) -> float:
    """``||u_new - u_old||_2 / ||u_new||_2`` (0 if both vanish, inf if only ``u_new`` does)."""
    u_new = np.asarray(u_new, dtype=float)
    u_old = np.asarray(u_old, dtype=float)
    if u_new.shape != u_old.shape:
        raise ValueError(f"shape mismatch {u_new.shape} vs {u_old.shape}")
    diff = np.linalg.norm(u_new - u_old)
    norm = np.linalg.norm(u_new)
    if norm == 0:
        return 0.0 if diff == 0 else float("inf")
    return float(diff / norm)


def relax(old, new, alpha: float):
    """Convex combination ``alpha * old + (1 - alpha) * new``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"relaxation alpha must lie in (0, 1), got {alpha}")
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    return alpha * old + (1.0 - alpha) * new


def _effective_species(problem: GummelProblem, config: GummelConfig):
    if config.model is Model.PNP:
        return [replace(s, size=0.0) for s in problem.species]
    return list(problem.species)


def initial_state(problem: GummelProblem, config: GummelConfig) -> GummelState:
    mesh = problem.mesh
    n = mesh.n_vertices
    solvent = mesh.region_vertices(RegionTag.SOLVENT)
    dirichlet, _ = np_dirichlet(mesh)
    c = np.zeros((len(problem.species), n))
    for i in range(len(problem.species)):
        bc = problem.nodal_concentration_bc(i)
        if config.init == "bulk":
            c[i, solvent] = problem.species[i].bulk * problem.constants.gamma
        c[i, dirichlet] = bc[dirichlet]
    u = np.zeros(n)
    return GummelState(0, u, c, u.copy(), c.copy(), config.alpha)


_SCALE_CLIP = 300.0


def _solve_np(system, x0, config, psi=None):
    """BiCGStab on the NP system, symmetrically rescaled when ``psi`` is given.

    For IAFEM, ``diag(e^{Psi/2}) A diag(e^{-Psi/2})`` has the entries
    ``D e_ij (d/2) / sinh(d/2)``, ``d = Psi_i - Psi_j``, which stay bounded
    on steep potentials where the raw entries spread over many orders of
    magnitude. The scaled solve is followed by a check (and, if needed, a
    warm-started continuation) on the unscaled system, so the returned
    iterate always meets ``np_tol`` on ``A c = b``.
    """
    A, b = system.matrix, system.rhs
    kw = dict(tol=config.np_tol, max_iter=config.linear_max_iter)
    if psi is None:
        return solve_bicgstab(A, b, x0=x0, **kw)
    w = 0.5 * (psi - 0.5 * (psi.max() + psi.min()))
    d = np.exp(np.clip(w, -_SCALE_CLIP, _SCALE_CLIP))
    scaled = sp.diags(d) @ A @ sp.diags(1.0 / d)
    y, k = solve_bicgstab(scaled.tocsr(), d * b, x0=None if x0 is None else d * x0, **kw)
    c = y / d
    nb = np.linalg.norm(b)
    if nb == 0 or np.linalg.norm(b - A @ c) <= config.np_tol * nb:
        return c, k
    c, k2 = solve_bicgstab(A, b, x0=c, **kw)
    return c, k + k2


def gummel_solve(
    problem: GummelProblem,
    config: GummelConfig | None = None,
    callback: Callable[[GummelState], None] | None = None,
    log: Callable[[str], None] | None = None,
) -> GummelResult:
    """Run the Gummel iteration.

    Non-convergence after ``config.max_iter`` sweeps is reported through
    ``result.converged = False`` with the last iterate. Inner solver
    failures and unrecoverable packing violations raise :class:`GummelError`.

    ``callback`` receives the state after every sweep; ``log`` receives each
    iteration log line.
    """
    config = config or GummelConfig()
    mesh = problem.mesh
    consts = problem.constants
    species = _effective_species(problem, config)
    sizes = [s.size for s in species]
    sized = any(sizes)
    solvent_v = mesh.region_vertices(RegionTag.SOLVENT)

    iface = None
    if problem.potential is not None:
        iface = interface_jump_load(mesh, problem.potential, consts, problem.harmonic_flux)

    state = initial_state(problem, config)
    u_old, c_old = state.u, state.c
    lines, p_its, n_its = [], [], []
    converged = False
    u_new, c_new = u_old, c_old

    for it in range(1, config.max_iter + 1):
        try:
            psys = assemble_poisson(
                mesh, c_old, species, consts,
                boundary_values=problem.nodal_potential_bc,
                extra_load=problem.poisson_load,
                interface_load=iface,
                charge_mass=problem.charge_mass,
            )
            u_new, pk = solve_cg(
                psys.matrix, psys.rhs, tol=config.poisson_tol, x0=u_old, max_iter=config.linear_max_iter
            )

            if config.discretization is Discretization.IAFEM:
                psi = psi_field(
                    u_old, c_old, species, consts,
                    scale=problem.packing_scale, steric_scale=problem.steric_scale, where=solvent_v,
                )
            c_new = np.empty_like(c_old)
            ks = []
            for i, s in enumerate(species):
                bc = problem.nodal_concentration_bc(i)
                if config.discretization is Discretization.IAFEM:
                    sys_i = assemble_np_iafem(mesh, s, psi[i], boundary_values=bc, rhs=problem.np_loads[i])
                else:
                    sys_i = assemble_np_standard(
                        mesh, s, u_old, c_old, species, consts.a0,
                        boundary_values=bc, rhs=problem.np_loads[i],
                        scale=problem.packing_scale, size_effects=sized,
                        steric_scale=problem.steric_scale,
                    )
                c_new[i], k = _solve_np(
                    sys_i, c_old[i], config,
                    psi[i] if config.discretization is Discretization.IAFEM else None,
                )
                ks.append(k)
        except (LinearSolverError, PackingError) as exc:
            raise GummelError(str(exc), it) from exc

        metric = convergence_metric(u_new, u_old)
        state.history.append(metric)
        p_its.append(pk)
        n_its.append(ks)
        line = f"iter {it} metric {metric:.6e} poisson_iters {pk} np_iters {','.join(map(str, ks))}"
        lines.append(line)
        logger.debug(line)
        if log is not None:
            log(line)
        if not np.isfinite(metric) and np.linalg.norm(u_new) != 0:
            raise GummelError(f"non-finite convergence metric {metric}", it)

        if metric < config.tol:
            converged = True
            state.iteration = it
            state.u_prev, state.c_prev = u_old, c_old
            state.u, state.c = u_new, c_new
            if callback is not None:
                callback(state)
            break

        u_rel = relax(u_old, u_new, config.alpha)
        c_rel = relax(c_old, c_new, config.alpha)
        if sized:
            c_rel = _backtrack_packing(c_old, c_rel, sizes, problem.packing_scale, solvent_v, config, it)
        state.iteration = it
        state.u_prev, state.c_prev = u_old, c_old
        state.u, state.c = u_rel, c_rel
        if callback is not None:
            callback(state)
        u_old, c_old = u_rel, c_rel

    if not converged:
        u_new, c_new = u_old, c_old
        logger.warning("Gummel iteration did not converge in %d sweeps (metric %.3e)",
                       config.max_iter, state.history[-1])
    return GummelResult(
        u=u_new, c=c_new, converged=converged, iterations=state.iteration,
        history=state.history, log=lines, poisson_iterations=p_its, np_iterations=n_its,
        potential=problem.potential,
    )


def _backtrack_packing(c_old, c_rel, sizes, scale, where, config, it):
    arg = packing_argument(c_rel, sizes, scale)
    if np.all(arg[where] > 0):
        return c_rel
    step = c_rel - c_old
    t = 1.0
    for _ in range(config.max_backtracks):
        t *= 0.5
        trial = c_old + t * step
        arg = packing_argument(trial, sizes, scale)
        if np.all(arg[where] > 0):
            logger.info("iteration %d: packing violation, step shortened to %.3g", it, t)
            return trial
    bad = int(np.nonzero(where & (arg <= 0))[0][0])
    raise GummelError(str(PackingError(bad, float(arg[bad]))), it)
