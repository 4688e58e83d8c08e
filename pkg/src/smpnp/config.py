"""Plain-text run configuration.

One ``section.key = value`` assignment per line; ``#`` starts a comment.
Every ``species.name`` line opens a new species block, so the following
``species.*`` keys belong to that species. Recognised keys (defaults in
brackets):

run
    ``command``: ``converge`` | ``solve`` | ``mesh-info``
mesh
    ``source``: ``cube`` | ``msh`` | ``sphere`` [cube];
    ``n`` [8]; ``bounds``: ``x0 y0 z0 x1 y1 z1`` [unit cube];
    ``path`` (msh file); ``tag.<id>``: region or boundary name for a Gmsh
    physical id (``SOLVENT``, ``MOLECULE``, ``DIRICHLET``, ``NEUMANN``,
    ``INTERFACE``)
sphere
    ``center`` [0 0 0]; ``radius`` [10]; ``half_width`` [80];
    ``split_axis``: none | 0 | 1 | 2 [none]; Dirichlet caps normal to the
    axis, Neumann sides
model
    ``model``: ``PNP`` | ``SMPNP`` [SMPNP];
    ``discretization``: ``IAFEM`` | ``STANDARD`` [IAFEM]
constants
    ``mode``: ``physical`` | ``dimensionless`` [physical]; ``temperature``,
    ``eps_m``, ``eps_s``, ``a0``, ``gamma``, ``charge_prefactor``,
    ``thermal_voltage``
species (repeated)
    ``name``, ``valence``, ``diffusion`` (A^2/ps), ``size`` (A) [0],
    ``bulk`` (mol/L) [0]
charges
    ``inline``: ``x y z q; x y z q; ...``; ``pqr``: path
boundary
    ``phi0`` (V) or ``u0`` (dimensionless) [0]
poisson
    ``harmonic_flux``: ``element`` | ``variational`` [element];
    ``charge_mass``: ``lumped`` | ``consistent`` [lumped]
gummel
    ``tol`` [1e-6]; ``max_iter`` [500]; ``alpha`` [0.1]; ``poisson_tol``
    [1e-10]; ``np_tol`` [1e-10]; ``init``: ``bulk`` | ``zero`` [bulk]
converge
    ``levels`` [4 8 16 32]; ``sizes``: ``paper`` | ``none`` [paper];
    ``gamma_in_gradient``: true | false [true]
output
    ``dir`` [.]; ``radial_bins`` [0 = none]; ``radial_rmin``;
    ``radial_rmax``; ``axial_axis``; ``axial_window``; ``axial_bins``
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


_SIMPLE = {
    "run": {"command"},
    "mesh": {"source", "n", "bounds", "path"},
    "sphere": {"center", "radius", "half_width", "split_axis"},
    "model": {"model", "discretization"},
    "constants": {"mode", "temperature", "eps_m", "eps_s", "a0", "gamma", "charge_prefactor", "thermal_voltage"},
    "charges": {"inline", "pqr"},
    "boundary": {"phi0", "u0"},
    "poisson": {"harmonic_flux", "charge_mass"},
    "gummel": {"tol", "max_iter", "alpha", "poisson_tol", "np_tol", "init"},
    "converge": {"levels", "sizes", "gamma_in_gradient"},
    "output": {"dir", "radial_bins", "radial_rmin", "radial_rmax", "axial_axis", "axial_window", "axial_bins"},
}
_SPECIES_KEYS = {"name", "valence", "diffusion", "size", "bulk"}
_LINE = re.compile(r"^([A-Za-z_][\w-]*)\.([\w.\-]+)\s*=\s*(.*)$")


@dataclass
class RunConfig:
    """Parsed configuration: ``values[section][key]`` strings plus species blocks."""

    values: dict = field(default_factory=dict)
    species: list = field(default_factory=list)
    lines: dict = field(default_factory=dict)
    base_dir: str = "."

    def has(self, section, key) -> bool:
        return key in self.values.get(section, {})

    def raw(self, section, key, default=None):
        return self.values.get(section, {}).get(key, default)

    def get(self, section, key, default=None, kind=str):
        v = self.raw(section, key)
        if v is None:
            return default
        return _convert(v, kind, f"{section}.{key}", self.lines.get(f"{section}.{key}"))

    def floats(self, section, key, default=None, count=None):
        v = self.raw(section, key)
        if v is None:
            return default
        name = f"{section}.{key}"
        try:
            out = [float(t) for t in v.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"expected numbers, got {v!r}", name, self.lines.get(name)) from None
        if count is not None and len(out) != count:
            raise ConfigError(f"expected {count} numbers, got {len(out)}", name, self.lines.get(name))
        return out

    def require(self, section, key):
        if not self.has(section, key):
            raise ConfigError("required key missing", f"{section}.{key}")
        return self.raw(section, key)

    @property
    def command(self) -> str:
        return self.require("run", "command")

    def tag_map(self) -> dict:
        return {int(k.split(".", 1)[1]): v for k, v in self.values.get("mesh", {}).items() if k.startswith("tag.")}


def _convert(value, kind, key, line):
    if kind is str:
        return value
    if kind is bool:
        low = value.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}", key, line)
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {value!r}", key, line) from None


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    cfg = RunConfig(base_dir=base_dir)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ConfigError(f"expected 'section.key = value', got {raw.strip()!r}", line=lineno)
        section, key, value = m.group(1), m.group(2), m.group(3).strip()
        full = f"{section}.{key}"
        if section == "species":
            if key not in _SPECIES_KEYS:
                raise ConfigError("unknown species key", full, lineno)
            if key == "name":
                cfg.species.append({"name": value, "_line": lineno})
            elif not cfg.species:
                raise ConfigError("species block must start with species.name", full, lineno)
            else:
                if key in cfg.species[-1]:
                    raise ConfigError("duplicate key in species block", full, lineno)
                cfg.species[-1][key] = value
            continue
        allowed = _SIMPLE.get(section)
        if allowed is None:
            raise ConfigError("unknown section", full, lineno)
        if key not in allowed and not (section == "mesh" and key.startswith("tag.")):
            raise ConfigError("unknown key", full, lineno)
        if key in cfg.values.get(section, {}):
            raise ConfigError("duplicate key", full, lineno)
        cfg.values.setdefault(section, {})[key] = value
        cfg.lines[full] = lineno
    names = [s["name"] for s in cfg.species]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ConfigError(f"species names must be unique, repeated: {sorted(dup)}", "species.name")
    if cfg.has("run", "command") and cfg.command not in ("converge", "solve", "mesh-info"):
        raise ConfigError(f"unknown command {cfg.command!r}", "run.command", cfg.lines.get("run.command"))
    return cfg


def load_config(path: str) -> RunConfig:
    import os

    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
