"""Physical constants, ion species and the size-modified Slotboom potential.

Concentrations are number densities (1/A^3) everywhere inside the solver;
molar values appear only at input and output. Potentials are dimensionless,
``u = e_c * phi / (k_B T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.constants as sc

__all__ = [
    "MOLAR_TO_NUMBER_DENSITY",
    "PackingError",
    "PhysicalConstants",
    "Species",
    "bernoulli",
    "edge_coefficient",
    "psi_field",
    "packing_argument",
    "molar_to_number_density",
    "number_density_to_molar",
]

#: mol/L -> 1/A^3 (Avogadro's number times 1e-27)
MOLAR_TO_NUMBER_DENSITY = 6.022140857e-4

_TAYLOR_WINDOW = 1e-4
_LOG_GUARD = 500.0


class PackingError(ValueError):
    """The local packing fraction reached or exceeded one."""

    def __init__(self, vertex: int, value: float):
        super().__init__(f"packing argument 1 - sum(a^3 c) = {value:.6g} <= 0 at vertex {vertex}")
        self.vertex = vertex
        self.value = value


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants of the nondimensionalised Poisson equation.

    Dividing the Poisson equation by the vacuum permittivity leaves
    ``-div(eps_r grad u) = charge_prefactor * sum(z_i c_i)``, with
    ``charge_prefactor = e_c^2 / (eps_0 k_B T)`` (in A when ``c`` is in
    1/A^3). The Coulomb potential of a fixed charge ``q`` (units of ``e_c``)
    in this unit system is ``charge_prefactor * q / (4 pi eps_m r)``.

    ``dimensionless()`` sets every permittivity and prefactor to one.
    """

    temperature: float = 298.15
    eps_m: float = 2.0
    eps_s: float = 80.0
    gamma: float = MOLAR_TO_NUMBER_DENSITY
    a0: float = 3.1
    charge_prefactor: float | None = None
    thermal_voltage: float | None = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        kT = sc.k * self.temperature
        if self.charge_prefactor is None:
            object.__setattr__(self, "charge_prefactor", sc.e**2 / (sc.epsilon_0 * kT) * 1e10)
        if self.thermal_voltage is None:
            object.__setattr__(self, "thermal_voltage", kT / sc.e)
        for name in ("temperature", "eps_m", "eps_s", "gamma", "a0", "charge_prefactor", "thermal_voltage"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def dimensionless(cls, **overrides) -> "PhysicalConstants":
        values = dict(eps_m=1.0, eps_s=1.0, charge_prefactor=1.0, thermal_voltage=1.0)
        values.update(overrides)
        return cls(**values)

    def with_overrides(self, **kw) -> "PhysicalConstants":
        return replace(self, **kw)

    @property
    def beta(self) -> float:
        """1 / (k_B T) in 1/J."""
        return 1.0 / (sc.k * self.temperature)

    @property
    def e_c(self) -> float:
        return sc.e

    @property
    def coulomb_prefactor(self) -> float:
        return self.charge_prefactor / (4.0 * np.pi)

    @property
    def bjerrum_length_vacuum(self) -> float:
        return self.coulomb_prefactor

    def volts_to_u(self, phi):
        return np.asarray(phi, dtype=float) / self.thermal_voltage


@dataclass(frozen=True)
class Species:
    """Mobile ion species.

    Parameters
    ----------
    name : str
    valence : int
    diffusion : float
        Bulk diffusion coefficient (A^2/ps).
    size : float
        Effective ion size ``a_i`` (A); zero means a point ion.
    bulk : float
        Bulk concentration (mol/L).
    diffusion_profile : callable, optional
        Maps ``(M, 3)`` element centroids to per-element diffusion
        coefficients; overrides ``diffusion`` where given.
    """

    name: str
    valence: int
    diffusion: float
    size: float = 0.0
    bulk: float = 0.0
    diffusion_profile: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.diffusion > 0:
            raise ValueError(f"{self.name}: diffusion coefficient must be positive")
        if self.size < 0:
            raise ValueError(f"{self.name}: ion size must be non-negative")
        if self.bulk < 0:
            raise ValueError(f"{self.name}: bulk concentration must be non-negative")

    def k(self, a0: float) -> float:
        """Size ratio ``a_i^3 / a_0^3``."""
        return self.size**3 / a0**3

    def element_diffusion(self, centroids: np.ndarray) -> np.ndarray:
        if self.diffusion_profile is None:
            return np.full(len(centroids), float(self.diffusion))
        d = np.asarray(self.diffusion_profile(centroids), dtype=float)
        if np.any(d <= 0):
            raise ValueError(f"{self.name}: diffusion profile must be positive")
        return d


def molar_to_number_density(c):
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("concentration must be non-negative")
    return c * MOLAR_TO_NUMBER_DENSITY


def number_density_to_molar(n):
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise ValueError("concentration must be non-negative")
    return n / MOLAR_TO_NUMBER_DENSITY


def bernoulli(t):
    """Bernoulli function ``B(t) = t / (exp(t) - 1)``, ``B(0) = 1``.

    For ``|t| <= 1e-4`` the cubic Taylor polynomial
    ``((-t^2/720 + 1/12) t - 1/2) t + 1`` is used. Large positive arguments
    are evaluated as ``t e^-t / (1 - e^-t)`` so nothing overflows.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) <= _TAYLOR_WINDOW
    pos = (t > 0) & ~small
    neg = (t < 0) & ~small
    ts = t[small]
    out[small] = ((-ts * ts / 720.0 + 1.0 / 12.0) * ts - 0.5) * ts + 1.0
    tn = t[neg]
    out[neg] = tn / np.expm1(tn)
    tp = t[pos]
    out[pos] = -tp * np.exp(-tp) / np.expm1(-tp)
    return out if out.ndim else float(out)


def edge_coefficient(psi_i, psi_j):
    """Inverse (harmonic) edge average of ``exp(psi)`` for edge-linear psi.

    Equals ``exp(psi_i) * B(psi_i - psi_j)``, symmetric in its arguments.
    Computed in log space once ``psi_i`` exceeds 500.
    """
    psi_i = np.asarray(psi_i, dtype=float)
    psi_j = np.asarray(psi_j, dtype=float)
    b = bernoulli(psi_i - psi_j)
    with np.errstate(divide="ignore"):
        out = np.where(psi_i > _LOG_GUARD, np.exp(psi_i + np.log(b)), np.exp(np.minimum(psi_i, _LOG_GUARD)) * b)
    return out if out.ndim else float(out)


def packing_argument(concentrations, sizes, scale: float = 1.0) -> np.ndarray:
    """``1 - scale * sum_l a_l^3 c_l`` at every vertex."""
    c = np.atleast_2d(np.asarray(concentrations, dtype=float))
    a3 = np.asarray(sizes, dtype=float) ** 3
    return 1.0 - scale * (a3[:, None] * c).sum(axis=0)


def psi_field(
    u, concentrations, species, constants: PhysicalConstants, scale: float = 1.0, where=None,
    steric_scale: float = 1.0,
):
    """Size-modified Slotboom potentials, one array per species.

    ``Psi_i = z_i u - (s k_i / scale) ln(1 - scale * sum_l a_l^3 c_l)``
    with ``s = steric_scale``.

    Both scales are one for number densities. Other values keep the
    logarithm consistent with a flux whose steric term is
    ``s k_i c_i sum_l a_l^3 grad(c_l) / (1 - scale * sum_l a_l^3 c_l)``.
    ``where`` restricts the packing check to a vertex mask; elsewhere the
    logarithm is skipped.

    Raises
    ------
    PackingError
        If the packing argument is not positive at a checked vertex.
    """
    u = np.asarray(u, dtype=float)
    c = np.asarray(concentrations, dtype=float).reshape(len(species), -1)
    if not np.all(np.isfinite(u)) or not np.all(np.isfinite(c)):
        raise ValueError("non-finite potential or concentration")
    ks = [s.k(constants.a0) for s in species]
    if not any(ks):
        return [s.valence * u for s in species]
    arg = packing_argument(c, [s.size for s in species], scale)
    check = np.ones(len(u), dtype=bool) if where is None else np.asarray(where, dtype=bool)
    bad = np.nonzero(check & (arg <= 0))[0]
    if bad.size:
        raise PackingError(int(bad[0]), float(arg[bad[0]]))
    log_arg = np.zeros_like(arg)
    log_arg[check] = np.log(arg[check])
    return [s.valence * u - (steric_scale * k / scale) * log_arg for s, k in zip(species, ks)]
