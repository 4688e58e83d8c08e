"""Acceptance checks, one printed [PASS]/[FAIL] line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""
import functools
import time

import numpy as np
import pytest
from scipy.integrate import quad

from smpnp.fem import assemble_weighted_laplacian
from smpnp.gummel import GummelConfig, GummelError, gummel_solve
from smpnp.linalg import relative_residual, solve_cg
from smpnp.mesh import RegionTag, generate_cube_mesh, parse_msh, tag_spherical_region, write_msh
from smpnp.mms import MmsProblem, build_gummel_problem, convergence_study, mms_flux, mms_sources, solve_mms
from smpnp.nernst_planck import assemble_np_iafem
from smpnp.physics import PhysicalConstants, Species, bernoulli, edge_coefficient
from smpnp.poisson import FixedCharges, assemble_poisson
from smpnp.profiles import radial_profile
from smpnp.sphere import SpherePreset, build_sphere_mesh, kcl, mixed_nakcl, sphere_problem

pytestmark = pytest.mark.slow

# sphere runs: the criteria do not pin the relaxation, and alpha = 0.1 is
# unstable on this box (see test_c9); 0.95 converges for every charge
SPHERE_ALPHA = 0.95
SPHERE_MAX_ITER = 2000
SPHERE_RADIUS = 10.0
BIN_WIDTH = 5.0


def report(criterion, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    return ok


def info(criterion, detail):
    print(f"[INFO] criterion {criterion}: {detail}")


# 1 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def mms_table():
    t0 = time.perf_counter()
    table = convergence_study([4, 8, 16, 32], GummelConfig(discretization="IAFEM", model="SMPNP"))
    return table, time.perf_counter() - t0


def test_c1_mms_orders(mms_table):
    table, seconds = mms_table
    assert all(r.gummel.converged for r in table.results)
    orders = {}
    for norm, lo, hi in (("L2", 1.8, 2.2), ("H1", 0.9, 1.2)):
        for name in ("u", "c_p", "c_n"):
            orders[f"{norm}_{name}"] = (table.orders(norm, name)[-1], lo, hi)
    ok = all(lo <= o <= hi for o, lo, hi in orders.values())
    detail = ", ".join(f"{k}={o:.3f}" for k, (o, _, _) in orders.items())
    report(1, ok, f"orders 1/16->1/32 {detail}; L2 in [1.8,2.2], H1 in [0.9,1.2]; {seconds:.0f} s total")
    print(table.to_tsv(), end="")
    assert ok
    assert seconds <= 300


def test_c1_verbatim_gamma_placement_informational():
    # gamma only in the packing denominator: anti-diffusive anion operator, see README
    prob = MmsProblem(gamma_in_gradient=False)
    outcome = []
    for n in (4, 8):
        try:
            r = solve_mms(n, GummelConfig(max_iter=200), prob)
            outcome.append(f"n={n} converged={r.gummel.converged} sweeps={r.gummel.iterations}")
        except GummelError as exc:
            outcome.append(f"n={n} failed ({exc})")
    factor = 1 + prob.k_n * prob.a_n**3 * -1.0
    info(1, f"verbatim variant: anion factor at c_n=-1 is {factor:.3f}; " + "; ".join(outcome))
    assert factor < 0


# 2 -------------------------------------------------------------------------

@pytest.mark.parametrize("gamma_in_gradient", [True, False])
def test_c2_source_oracle(gamma_in_gradient):
    prob = MmsProblem(gamma_in_gradient=gamma_in_gradient)
    rng = np.random.default_rng(7)
    pts = rng.uniform(0.0, 1.0, (100, 3))
    h = 1e-5
    worst = 0.0
    for x in pts:
        _, fp, fn = mms_sources(prob, x)
        div = np.zeros(2)
        for d, e in enumerate(np.eye(3)):
            jp1, jn1 = mms_flux(prob, x + h * e)
            jp0, jn0 = mms_flux(prob, x - h * e)
            div += [(jp1[d] - jp0[d]) / (2 * h), (jn1[d] - jn0[d]) / (2 * h)]
        for f, dv in ((fp, div[0]), (fn, div[1])):
            worst = max(worst, abs(f + dv) / max(abs(f), 1e-3))
    variant = "consistent" if gamma_in_gradient else "verbatim"
    ok = report(2, worst < 1e-5, f"{variant} sources vs central-difference div J at 100 points, max rel err {worst:.2e} < 1e-5")
    assert ok


# 3 -------------------------------------------------------------------------

def test_c3_bernoulli():
    t = np.linspace(-50, 50, 20001)
    t = t[np.abs(t) > 1e-4]
    rel = np.abs(bernoulli(-t) - np.exp(t) * bernoulli(t)) / np.abs(bernoulli(-t))
    edge = 1e-4
    jumps = [abs(bernoulli(s * edge * (1 - 1e-13)) - bernoulli(s * edge * (1 + 1e-13))) for s in (1, -1)]
    b0 = bernoulli(0.0)
    ok = rel.max() <= 1e-12 and max(jumps) <= 1e-10 and b0 == 1.0
    report(3, ok, f"max rel |B(-t)-e^t B(t)| = {rel.max():.2e} <= 1e-12; switch jump {max(jumps):.2e} <= 1e-10; B(0) = {b0!r}")
    assert ok


# 4 -------------------------------------------------------------------------

def test_c4_inverse_average():
    rng = np.random.default_rng(11)
    pairs = rng.uniform(-20, 20, (1000, 2))
    worst = 0.0
    for a, b in pairs:
        # (int_0^1 exp(-psi(s)) ds)^-1 for psi linear from a to b, scaled by exp(-m) for range
        m = min(a, b)
        integral, _ = quad(lambda s: np.exp(-(a + (b - a) * s) + m), 0.0, 1.0, epsabs=0, epsrel=1e-13, limit=200)
        expected = np.exp(m) / integral
        worst = max(worst, abs(edge_coefficient(a, b) - expected) / expected)
    ok = report(4, worst <= 1e-10, f"edge_coefficient vs quadrature over 1000 pairs, max rel err {worst:.2e} <= 1e-10")
    assert ok


# 5 -------------------------------------------------------------------------

def test_c5_boltzmann_kernel():
    mesh = generate_cube_mesh(8)
    rng = np.random.default_rng(5)
    psi = rng.uniform(-5, 5, mesh.n_vertices)
    sys = assemble_np_iafem(mesh, Species("i", 1, 0.3), psi, constrain=False)
    c = np.exp(-psi)
    res = np.linalg.norm(sys.matrix @ c) / (abs(sys.matrix).max() * np.linalg.norm(c))
    ok = report(5, res < 1e-12, f"||A e^-Psi|| / (max|A| ||e^-Psi||) = {res:.2e} < 1e-12 (n=8, Psi ~ U[-5,5])")
    assert ok


# 6 -------------------------------------------------------------------------

def test_c6_pnp_reduction():
    prob = MmsProblem().without_sizes()
    mesh = generate_cube_mesh(8)
    gp = build_gummel_problem(mesh, prob)
    seqs = {}
    for model in ("SMPNP", "PNP"):
        seq = []
        gummel_solve(gp, GummelConfig(model=model), callback=lambda s: seq.append((s.u.copy(), s.c.copy())))
        seqs[model] = seq
    same = len(seqs["SMPNP"]) == len(seqs["PNP"]) and all(
        np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]) for a, b in zip(seqs["SMPNP"], seqs["PNP"])
    )
    gaps = []
    for n in (8, 16):
        gpn = build_gummel_problem(generate_cube_mesh(n), prob)
        ia = gummel_solve(gpn, GummelConfig(discretization="IAFEM"))
        st = gummel_solve(gpn, GummelConfig(discretization="STANDARD"))
        assert ia.converged and st.converged
        gaps.append(np.abs(ia.u - st.u).max())
    ok = same and gaps[1] < gaps[0]
    report(6, ok, f"a=0 SMPNP vs PNP iterates bitwise identical over {len(seqs['PNP'])} sweeps: {same}; "
                  f"Linf(u_IAFEM - u_STANDARD) n=8 {gaps[0]:.3e} > n=16 {gaps[1]:.3e}")
    assert ok


# 7 / 8 / 9 -----------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def sphere_mesh():
    return build_sphere_mesh(SpherePreset(n=24, half_width=80.0, radius=SPHERE_RADIUS))


@functools.lru_cache(maxsize=None)
def sphere_run(q, sizes, alpha=SPHERE_ALPHA, discretization="IAFEM", mixed=False, max_iter=SPHERE_MAX_ITER):
    mesh = sphere_mesh()
    consts = PhysicalConstants()
    species = mixed_nakcl() if mixed else (kcl(a_k=2.51, a_cl=6.37) if sizes else kcl())
    model = "SMPNP" if (sizes or mixed) else "PNP"
    cfg = GummelConfig(model=model, discretization=discretization, alpha=alpha, tol=1e-6, max_iter=max_iter)
    problem = sphere_problem(mesh, species, FixedCharges.single((0.0, 0.0, 0.0), q), consts)
    t0 = time.perf_counter()
    try:
        res = gummel_solve(problem, cfg)
    except GummelError as exc:
        return None, str(exc), time.perf_counter() - t0
    prof = radial_profile(mesh, res.c / consts.gamma, (0, 0, 0), 16, r_min=0.0, r_max=16 * BIN_WIDTH,
                          names=[s.name for s in species])
    return res, prof, time.perf_counter() - t0


def monotone_outside(profile, name):
    """Nonincreasing bin means from the second bin fully outside the interface on."""
    lower = profile.midpoints - 0.5 * BIN_WIDTH
    outside = np.nonzero(lower >= SPHERE_RADIUS)[0]
    col = profile.column(name)
    start = outside[0] + 1  # one-bin allowance for the staircase interface
    vals = col[start:]
    vals = vals[np.isfinite(vals)]
    rises = np.diff(vals)
    return bool(np.all(rises <= 0.0)), float(rises.max()) if rises.size else 0.0, col


@pytest.mark.parametrize("q", [-10, -20, -30, -45])
def test_c7_positivity_and_monotone_profile(q):
    res, prof, seconds = sphere_run(q, False)
    if res is None:
        report(7, False, f"q={q}: Gummel failed: {prof}")
        pytest.fail(prof)
    solvent = sphere_mesh().region_vertices(RegionTag.SOLVENT)
    cmin = float(res.c[0].min())
    smin = float(res.c[0, solvent].min())
    mono, rise, col = monotone_outside(prof, "K")
    ok = res.converged and cmin >= 0.0 and mono
    report(7, ok, f"q={q} PNP/IAFEM converged={res.converged} ({res.iterations} sweeps, {seconds:.0f} s), "
                  f"min K = {cmin:.3e} >= 0 (solvent vertices {smin:.3e} /A^3), radial K monotone outside r={SPHERE_RADIUS:g}: {mono} "
                  f"(largest rise {rise:.2e} M); bins {np.round(col[:8], 4).tolist()}")
    assert ok


def test_c8_size_effect_suppression():
    pnp, p_prof, _ = sphere_run(-20, False)
    smpnp, s_prof, seconds = sphere_run(-20, True)
    assert pnp is not None and smpnp is not None
    peak_p = np.nanmax(p_prof.column("K"))
    peak_s = np.nanmax(s_prof.column("K"))
    ok = pnp.converged and smpnp.converged and peak_s <= peak_p
    report(8, ok, f"q=-20 peak binned K: SMPNP {peak_s:.4f} M <= PNP {peak_p:.4f} M "
                  f"(SMPNP {smpnp.iterations} sweeps, {seconds:.0f} s)")
    assert ok


def test_c9_gummel_robustness():
    res, msg, seconds = sphere_run(-20, True, alpha=0.1, mixed=True, max_iter=500)
    ok = res is not None and res.converged
    detail = (f"converged in {res.iterations} sweeps" if ok else
              (f"not converged after {res.iterations} sweeps" if res is not None else f"failed: {msg}"))
    std, smsg, _ = sphere_run(-20, True, alpha=0.1, mixed=True, max_iter=500, discretization="STANDARD")
    std_detail = (f"converged={std.converged} after {std.iterations} sweeps" if std is not None else f"failed: {smsg}")
    report(9, ok, f"NaKCl q=-20 IAFEM alpha=0.1 tol=1e-6 max_iter=500: {detail} ({seconds:.0f} s)")
    info(9, f"standard FEM at the same settings: {std_detail}")
    hi, hmsg, hsec = sphere_run(-20, True, alpha=SPHERE_ALPHA, mixed=True)
    info(9, f"IAFEM at alpha={SPHERE_ALPHA}: " + (f"converged={hi.converged} after {hi.iterations} sweeps ({hsec:.0f} s), "
             f"min c = {hi.c.min():.3e}" if hi is not None else f"failed: {hmsg}"))
    assert ok


def test_c9_kcl_alpha_01():
    # the gummel-driver example: KCl 0.1 M, q = -20, alpha = 0.1 within max_N
    res, msg, seconds = sphere_run(-20, False, alpha=0.1, max_iter=500)
    ok = res is not None and res.converged
    detail = (f"converged in {res.iterations} sweeps" if ok else
              (f"not converged after {res.iterations} sweeps" if res is not None else f"failed: {msg}"))
    report(9, ok, f"KCl q=-20 PNP/IAFEM alpha=0.1 max_iter=500: {detail} ({seconds:.0f} s)")
    assert ok


# 10 ------------------------------------------------------------------------

def test_c10_infrastructure():
    checks = {}
    mesh = tag_spherical_region(generate_cube_mesh(12, ((-6, -6, -6), (6, 6, 6))), (0, 0, 0), 2.5)
    consts = PhysicalConstants()
    species = kcl()
    rng = np.random.default_rng(3)
    c = rng.uniform(0, 2e-4, (2, mesh.n_vertices))
    sys = assemble_poisson(mesh, c, species, consts, boundary_values=0.5)
    checks["poisson symmetric bitwise"] = (sys.matrix != sys.matrix.T).nnz == 0
    u, _ = solve_cg(sys.matrix, sys.rhs, tol=1e-10)
    res = relative_residual(sys.matrix, u, sys.rhs)
    checks[f"CG residual {res:.1e} <= 1e-10"] = res <= 1e-10
    # every accepted CG solve inside a Gummel run
    gp = build_gummel_problem(generate_cube_mesh(6), MmsProblem())
    worst = [0.0]
    import smpnp.gummel as g

    orig = g.solve_cg

    def checked(A, b, **kw):
        x, k = orig(A, b, **kw)
        worst[0] = max(worst[0], relative_residual(A, x, b))
        return x, k

    g.solve_cg = checked
    try:
        gummel_solve(gp, GummelConfig())
    finally:
        g.solve_cg = orig
    checks[f"Gummel CG residuals max {worst[0]:.1e} <= 1e-10"] = worst[0] <= 1e-10
    text = write_msh(mesh)
    again, _ = parse_msh(text)
    checks["MSH parse/dump/parse idempotent"] = write_msh(again) == text and write_msh(parse_msh(write_msh(again))[0]) == text
    vols = [abs(generate_cube_mesh(n).signed_volumes.sum() - 1.0) for n in (1, 2, 3, 5, 8, 13, 16)]
    checks[f"Freudenthal volume partition max err {max(vols):.1e} <= 1e-14"] = max(vols) <= 1e-14
    A = assemble_weighted_laplacian(mesh, 1.0)
    checks["stiffness bitwise symmetric"] = (A != A.T).nnz == 0
    ok = all(checks.values())
    report(10, ok, "; ".join(f"{k}: {v}" for k, v in checks.items()))
    assert ok
