import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smpnp.gummel import (
    GummelConfig,
    GummelError,
    GummelProblem,
    Model,
    convergence_metric,
    gummel_solve,
    initial_state,
    relax,
)
from smpnp.mesh import generate_cube_mesh
from smpnp.mms import MmsProblem, build_gummel_problem
from smpnp.nernst_planck import Discretization
from smpnp.physics import PhysicalConstants, Species

LOG_LINE = re.compile(r"^iter \d+ metric \S+ poisson_iters \d+ np_iters \d+(,\d+)*$")


@pytest.fixture(scope="module")
def mms4():
    return build_gummel_problem(generate_cube_mesh(4), MmsProblem())


def test_metric_definition():
    assert convergence_metric([3.0, 4.0], [3.0, 4.0]) == 0.0
    assert convergence_metric([3.0, 4.0], [0.0, 0.0]) == pytest.approx(1.0)
    assert convergence_metric([0.0], [0.0]) == 0.0
    assert convergence_metric([0.0], [1.0]) == float("inf")
    with pytest.raises(ValueError):
        convergence_metric([1.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8))
def test_relax_is_convex(alpha, xs):
    old = np.array(xs)
    new = old[::-1].copy()
    out = relax(old, new, alpha)
    lo, hi = np.minimum(old, new), np.maximum(old, new)
    assert np.all(out >= lo - 1e-9) and np.all(out <= hi + 1e-9)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
def test_relax_rejects_bad_alpha(alpha):
    with pytest.raises(ValueError):
        relax([0.0], [1.0], alpha)
    with pytest.raises(ValueError):
        GummelConfig(alpha=alpha)


def test_config_validation():
    with pytest.raises(ValueError):
        GummelConfig(init="random")
    with pytest.raises(ValueError):
        GummelConfig(tol=0)
    cfg = GummelConfig().with_overrides(discretization="STANDARD", model="PNP")
    assert cfg.discretization is Discretization.STANDARD and cfg.model is Model.PNP


def test_problem_validation(cube4):
    k = PhysicalConstants()
    with pytest.raises(ValueError):
        GummelProblem(cube4, [], k)
    with pytest.raises(ValueError):
        GummelProblem(cube4, [Species("a", 1, 1.0), Species("a", -1, 1.0)], k)
    p = GummelProblem(cube4, [Species("a", 1, 1.0, bulk=0.1)], k)
    assert p.nodal_concentration_bc(0)[0] == pytest.approx(0.1 * k.gamma)


def test_initial_state_bulk_and_zero(cube4):
    k = PhysicalConstants()
    p = GummelProblem(cube4, [Species("a", 1, 1.0, bulk=0.1)], k)
    s = initial_state(p, GummelConfig())
    assert np.allclose(s.c, 0.1 * k.gamma)
    z = initial_state(p, GummelConfig(init="zero"))
    interior = z.c[0] == 0
    assert interior.sum() == 27  # 3^3 interior vertices of the n=4 cube


def test_converges_and_logs(mms4):
    lines, states = [], []
    res = gummel_solve(mms4, GummelConfig(alpha=0.1), callback=states.append, log=lines.append)
    assert res.converged
    assert res.final_metric < 1e-6
    assert len(lines) == res.iterations == len(states) == len(res.history)
    assert all(LOG_LINE.match(line) for line in lines)
    assert lines == res.log
    assert all(len(k) == 2 for k in res.np_iterations)
    assert np.all(res.c[:, [0]] == 0)


def test_unrelaxed_fields_returned_on_convergence(mms4):
    states = []
    res = gummel_solve(mms4, GummelConfig(alpha=0.1), callback=states.append)
    assert res.u is states[-1].u


def test_nonconvergence_is_reported(mms4):
    res = gummel_solve(mms4, GummelConfig(max_iter=2))
    assert not res.converged
    assert res.iterations == 2
    assert res.final_metric >= 1e-6


def test_inner_failure_carries_iteration(mms4):
    with pytest.raises(GummelError) as err:
        gummel_solve(mms4, GummelConfig(linear_max_iter=1))
    assert err.value.iteration == 1


def test_pnp_equals_smpnp_with_zero_sizes():
    mesh = generate_cube_mesh(4)
    gp = build_gummel_problem(mesh, MmsProblem().without_sizes())
    a = gummel_solve(gp, GummelConfig(model="PNP"))
    b = gummel_solve(gp, GummelConfig(model="SMPNP"))
    assert a.iterations == b.iterations
    assert np.array_equal(a.u, b.u) and np.array_equal(a.c, b.c)


def test_standard_discretization_runs(mms4):
    res = gummel_solve(mms4, GummelConfig(discretization="STANDARD"))
    assert res.converged


def test_packing_backtracking():
    # large bulk values relaxed towards an over-packed state must be shortened, not rejected
    from smpnp.gummel import _backtrack_packing

    old = np.full((1, 3), 0.1)
    new = np.full((1, 3), 2.0)
    out = _backtrack_packing(old, new, [1.0], 1.0, np.ones(3, dtype=bool), GummelConfig(), 1)
    assert np.all(out < 1.0) and np.all(out > 0.1)
    with pytest.raises(GummelError):
        _backtrack_packing(np.full((1, 3), 1.5), new, [1.0], 1.0, np.ones(3, dtype=bool), GummelConfig(), 4)


def test_scaled_np_solve_meets_unscaled_tolerance():
    from smpnp.gummel import _solve_np
    from smpnp.nernst_planck import assemble_np_iafem

    mesh = generate_cube_mesh(6)
    psi = 40.0 * mesh.vertices[:, 0] ** 2  # steep potential, raw entries span ~e^10 per edge
    s = assemble_np_iafem(mesh, Species("k", 1, 1.0), psi, boundary_values=np.exp(-psi))
    cfg = GummelConfig()
    c, _ = _solve_np(s, None, cfg, psi)
    assert np.linalg.norm(s.matrix @ c - s.rhs) <= cfg.np_tol * np.linalg.norm(s.rhs)
    assert np.allclose(c, np.exp(-psi), rtol=1e-8, atol=1e-14)
