"""Counter-ion layer around a charged sphere, PNP against SMPNP.

    python demos/charged_sphere.py --charge -20 --n 24

Prints the binned radial K+ profile of both models. Each solve takes a
minute or two on one core.
"""
import argparse
import time

import numpy as np

from smpnp.gummel import GummelConfig, gummel_solve
from smpnp.physics import PhysicalConstants
from smpnp.poisson import FixedCharges
from smpnp.profiles import radial_profile
from smpnp.sphere import SpherePreset, build_sphere_mesh, kcl, sphere_problem


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--charge", type=float, default=-20.0)
    ap.add_argument("--n", type=int, default=24)
    ap.add_argument("--alpha", type=float, default=0.9)
    args = ap.parse_args()

    constants = PhysicalConstants()
    mesh = build_sphere_mesh(SpherePreset(n=args.n))
    charges = FixedCharges.single((0, 0, 0), args.charge)
    config = GummelConfig(alpha=args.alpha, max_iter=1000)
    runs = {
        "PNP": (kcl(), config.with_overrides(model="PNP")),
        "SMPNP": (kcl(a_k=2.51, a_cl=6.37), config),
    }
    profiles = {}
    for name, (species, cfg) in runs.items():
        t0 = time.perf_counter()
        res = gummel_solve(sphere_problem(mesh, species, charges, constants), cfg)
        print(f"{name}: converged={res.converged} after {res.iterations} sweeps ({time.perf_counter() - t0:.0f} s)")
        profiles[name] = radial_profile(mesh, res.c / constants.gamma, (0, 0, 0), 16, r_max=80.0)

    print("r_mid\tK_PNP\tK_SMPNP")
    for b, r in enumerate(profiles["PNP"].midpoints):
        k_pnp, k_sm = profiles["PNP"].means[0, b], profiles["SMPNP"].means[0, b]
        if np.isfinite(k_pnp):
            print(f"{r:.1f}\t{k_pnp:.4f}\t{k_sm:.4f}")


if __name__ == "__main__":
    main()
