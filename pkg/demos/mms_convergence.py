"""Observed convergence orders of the manufactured SMPNP problem.

Run from the repository root::

    python demos/mms_convergence.py 4 8 16

The verbatim gamma placement can be compared with ``--verbatim``; it is
expected to fail beyond the coarsest level (see the notes in the README).
"""
import argparse

from smpnp.gummel import GummelConfig, GummelError
from smpnp.mms import MmsProblem, convergence_study


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("levels", nargs="*", type=int, default=[4, 8, 16])
    ap.add_argument("--verbatim", action="store_true", help="gamma only in the packing denominator")
    ap.add_argument("--standard", action="store_true", help="standard Galerkin instead of IAFEM")
    args = ap.parse_args()

    problem = MmsProblem(gamma_in_gradient=not args.verbatim)
    config = GummelConfig(discretization="STANDARD" if args.standard else "IAFEM")
    try:
        table = convergence_study(
            args.levels, config, problem,
            progress=lambda r: print(f"n={r.n}: {r.gummel.iterations} sweeps, {r.seconds:.1f} s"),
        )
    except GummelError as exc:
        print(f"Gummel failure: {exc}")
        return
    print(table.to_tsv(), end="")


if __name__ == "__main__":
    main()
