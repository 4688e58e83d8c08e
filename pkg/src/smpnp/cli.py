"""Command-line entry point: ``smpnp CONFIG``.

Exit codes: 0 success, 1 configuration or input error, 2 solver failure or
non-convergence, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .gummel import GummelConfig, GummelError, gummel_solve
from .linalg import LinearSolverError
from .mesh import (
    BoundaryTag,
    Mesh,
    MeshParseError,
    RegionTag,
    generate_cube_mesh,
    parse_msh,
    split_dirichlet_by_axis,
    validate,
)
from .mms import MmsProblem, convergence_study
from .physics import PackingError, PhysicalConstants, Species, number_density_to_molar
from .poisson import FixedCharges, PqrParseError, parse_pqr
from .profiles import axial_profile, radial_profile
from .sphere import SpherePreset, build_sphere_mesh, sphere_problem

logger = logging.getLogger("smpnp")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

__all__ = ["main", "run", "write_fields_csv", "read_fields_csv"]


def _tag(name, key):
    name = name.strip().upper()
    if name in RegionTag.__members__:
        return RegionTag[name]
    if name in BoundaryTag.__members__:
        return BoundaryTag[name]
    raise ConfigError(f"unknown tag name {name!r}", key)


def build_mesh(cfg: RunConfig) -> Mesh:
    source = cfg.get("mesh", "source", "cube")
    if source == "cube":
        n = cfg.get("mesh", "n", 8, int)
        b = cfg.floats("mesh", "bounds", [0, 0, 0, 1, 1, 1], count=6)
        try:
            mesh = generate_cube_mesh(n, (b[:3], b[3:]))
        except ValueError as exc:
            raise ConfigError(str(exc), "mesh.n") from None
    elif source == "sphere":
        preset = SpherePreset(
            n=cfg.get("mesh", "n", 24, int),
            half_width=cfg.get("sphere", "half_width", 80.0, float),
            radius=cfg.get("sphere", "radius", 10.0, float),
            center=tuple(cfg.floats("sphere", "center", [0, 0, 0], count=3)),
        )
        if preset.radius <= 0:
            raise ConfigError("radius must be positive", "sphere.radius")
        mesh = build_sphere_mesh(preset)
    elif source == "msh":
        path = os.path.join(cfg.base_dir, cfg.require("mesh", "path"))
        tags = {k: _tag(v, f"mesh.tag.{k}") for k, v in cfg.tag_map().items()} or None
        with open(path, encoding="utf-8") as fh:
            mesh, skipped = parse_msh(fh, tags)
        if skipped:
            logger.warning("%d unsupported elements skipped in %s", skipped, path)
    else:
        raise ConfigError(f"unknown mesh source {source!r}", "mesh.source")
    axis = cfg.get("sphere", "split_axis", "none")
    if axis != "none":
        if axis not in ("0", "1", "2"):
            raise ConfigError("split_axis must be none, 0, 1 or 2", "sphere.split_axis")
        mesh = split_dirichlet_by_axis(mesh, int(axis))
    return mesh


def build_constants(cfg: RunConfig) -> PhysicalConstants:
    mode = cfg.get("constants", "mode", "physical")
    over = {}
    for key in ("temperature", "eps_m", "eps_s", "a0", "gamma", "charge_prefactor", "thermal_voltage"):
        if cfg.has("constants", key):
            over[key] = cfg.get("constants", key, kind=float)
    try:
        if mode == "dimensionless":
            return PhysicalConstants.dimensionless(**over)
        if mode == "physical":
            return PhysicalConstants(**over)
    except ValueError as exc:
        raise ConfigError(str(exc), "constants") from None
    raise ConfigError(f"unknown constants mode {mode!r}", "constants.mode")


def build_species(cfg: RunConfig) -> list:
    if not cfg.species:
        raise ConfigError("at least one species block is required", "species.name")
    out = []
    for block in cfg.species:
        name = block["name"]
        for key in ("valence", "diffusion"):
            if key not in block:
                raise ConfigError(f"species {name!r} lacks {key}", f"species.{key}", block["_line"])
        try:
            out.append(Species(
                name,
                int(block["valence"]),
                float(block["diffusion"]),
                float(block.get("size", 0.0)),
                float(block.get("bulk", 0.0)),
            ))
        except ValueError as exc:
            raise ConfigError(f"species {name!r}: {exc}", "species", block["_line"]) from None
    return out


def build_charges(cfg: RunConfig) -> FixedCharges:
    pos, q = [], []
    inline = cfg.get("charges", "inline")
    if inline:
        for chunk in inline.split(";"):
            if not chunk.strip():
                continue
            try:
                vals = [float(t) for t in chunk.split()]
            except ValueError:
                raise ConfigError(f"bad charge entry {chunk.strip()!r}", "charges.inline") from None
            if len(vals) != 4:
                raise ConfigError("each charge needs 'x y z q'", "charges.inline")
            pos.append(vals[:3])
            q.append(vals[3])
    charges = FixedCharges(np.array(pos).reshape(-1, 3), np.array(q))
    if cfg.has("charges", "pqr"):
        with open(os.path.join(cfg.base_dir, cfg.raw("charges", "pqr")), encoding="utf-8") as fh:
            extra = parse_pqr(fh)
        charges = FixedCharges(
            np.vstack([charges.positions, extra.positions]), np.concatenate([charges.charges, extra.charges])
        )
    return charges


def build_gummel_config(cfg: RunConfig) -> GummelConfig:
    kw = dict(
        discretization=cfg.get("model", "discretization", "IAFEM").upper(),
        model=cfg.get("model", "model", "SMPNP").upper(),
    )
    for key, kind in (("tol", float), ("max_iter", int), ("alpha", float),
                      ("poisson_tol", float), ("np_tol", float), ("init", str)):
        if cfg.has("gummel", key):
            kw[key] = cfg.get("gummel", key, kind=kind)
    try:
        return GummelConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc), "gummel/model") from None


def boundary_potential(cfg: RunConfig, constants: PhysicalConstants) -> float:
    if cfg.has("boundary", "phi0") and cfg.has("boundary", "u0"):
        raise ConfigError("give either phi0 or u0, not both", "boundary.phi0")
    if cfg.has("boundary", "phi0"):
        return float(constants.volts_to_u(cfg.get("boundary", "phi0", kind=float)))
    return cfg.get("boundary", "u0", 0.0, float)


def write_fields_csv(path, mesh: Mesh, u, c_molar, names=None):
    """``vertex_id,x,y,z,u,c_1,...,c_K`` with 17 significant digits; ``c`` in mol/L."""
    c = np.atleast_2d(np.asarray(c_molar, dtype=float))
    header = ["vertex_id", "x", "y", "z", "u"] + [f"c_{k + 1}" for k in range(len(c))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(mesh.n_vertices):
            row = [str(i)] + [f"{v:.17g}" for v in (*mesh.vertices[i], u[i], *c[:, i])]
            w.writerow(row)


def read_fields_csv(path):
    """Inverse of :func:`write_fields_csv`: ``(ids, xyz, u, c)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    return data[:, 0].astype(int), data[:, 1:4], data[:, 4], data[:, 5:].T


def _outdir(cfg: RunConfig) -> str:
    out = os.path.join(cfg.base_dir, cfg.get("output", "dir", "."))
    os.makedirs(out, exist_ok=True)
    return out


def cmd_mesh_info(cfg: RunConfig) -> int:
    mesh = build_mesh(cfg)
    report = validate(mesh)
    text = str(report)
    print(text)
    if cfg.has("output", "dir"):
        with open(os.path.join(_outdir(cfg), "mesh_info.txt"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK if report.ok else EXIT_SOLVER


def cmd_converge(cfg: RunConfig) -> int:
    levels = [int(v) for v in cfg.floats("converge", "levels", [4, 8, 16, 32])]
    if not levels:
        raise ConfigError("at least one level is required", "converge.levels")
    problem = MmsProblem(gamma_in_gradient=cfg.get("converge", "gamma_in_gradient", True, bool))
    sizes = cfg.get("converge", "sizes", "paper")
    if sizes == "none":
        problem = problem.without_sizes()
    elif sizes != "paper":
        raise ConfigError("sizes must be 'paper' or 'none'", "converge.sizes")
    gcfg = build_gummel_config(cfg)
    table = convergence_study(
        levels, gcfg, problem,
        progress=lambda r: logger.info("n=%d: %d sweeps, %.1f s", r.n, r.gummel.iterations, r.seconds),
    )
    tsv = table.to_tsv()
    with open(os.path.join(_outdir(cfg), "convergence.tsv"), "w", encoding="utf-8") as fh:
        fh.write(tsv)
    print(tsv, end="")
    return EXIT_OK if all(r.gummel.converged for r in table.results) else EXIT_SOLVER


def cmd_solve(cfg: RunConfig) -> int:
    mesh = build_mesh(cfg)
    constants = build_constants(cfg)
    species = build_species(cfg)
    charges = build_charges(cfg)
    gcfg = build_gummel_config(cfg)
    u0 = boundary_potential(cfg, constants)
    flux = cfg.get("poisson", "harmonic_flux", "element")
    if flux not in ("element", "variational"):
        raise ConfigError("harmonic_flux must be 'element' or 'variational'", "poisson.harmonic_flux")
    mass = cfg.get("poisson", "charge_mass", "lumped")
    if mass not in ("lumped", "consistent"):
        raise ConfigError("charge_mass must be 'lumped' or 'consistent'", "poisson.charge_mass")
    if len(charges) and not mesh.molecule_mask.any():
        raise ConfigError("fixed charges need a MOLECULE region", "charges")
    problem = sphere_problem(mesh, species, charges, constants, u0=u0, harmonic_flux=flux, charge_mass=mass)
    out = _outdir(cfg)
    log_path = os.path.join(out, "gummel.log")
    with open(log_path, "w", encoding="utf-8") as log:
        result = gummel_solve(problem, gcfg, log=lambda line: (log.write(line + "\n"), log.flush()))
        status = "converged" if result.converged else "not converged"
        log.write(f"# {status} after {result.iterations} iterations\n")
    c_molar = result.c / constants.gamma
    write_fields_csv(os.path.join(out, "fields.csv"), mesh, result.u, c_molar)

    bins = cfg.get("output", "radial_bins", 0, int)
    if bins > 0:
        center = cfg.floats("sphere", "center", [0, 0, 0], count=3)
        prof = radial_profile(
            mesh, c_molar, center, bins,
            r_min=cfg.get("output", "radial_rmin", 0.0, float),
            r_max=cfg.get("output", "radial_rmax", None, float),
            names=[s.name for s in species],
        )
        with open(os.path.join(out, "radial_profile.tsv"), "w", encoding="utf-8") as fh:
            fh.write(prof.to_tsv())
    abins = cfg.get("output", "axial_bins", 0, int)
    if abins > 0:
        prof = axial_profile(
            mesh, c_molar, cfg.get("output", "axial_axis", 2, int),
            cfg.get("output", "axial_window", 5.0, float), abins,
            center=cfg.floats("sphere", "center", [0, 0, 0], count=3),
            names=[s.name for s in species],
        )
        with open(os.path.join(out, "axial_profile.tsv"), "w", encoding="utf-8") as fh:
            fh.write(prof.to_tsv())
    print(f"{status}: {result.iterations} iterations, final metric {result.final_metric:.3e}")
    return EXIT_OK if result.converged else EXIT_SOLVER


_COMMANDS = {"mesh-info": cmd_mesh_info, "converge": cmd_converge, "solve": cmd_solve}


def run(path: str, command: str | None = None) -> int:
    """Execute the configuration at ``path``; returns the process exit code."""
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        cmd = command or cfg.command
        if cmd not in _COMMANDS:
            raise ConfigError(f"unknown command {cmd!r}", "run.command")
        return _COMMANDS[cmd](cfg)
    except (ConfigError, MeshParseError, PqrParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GummelError, LinearSolverError, PackingError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="smpnp", description="Steady SMPNP/PNP finite element solver")
    parser.add_argument("config", help="configuration file (section.key = value)")
    parser.add_argument("--command", choices=sorted(_COMMANDS), help="override run.command")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run(args.config, args.command)


if __name__ == "__main__":
    sys.exit(main())
