import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smpnp.gummel import GummelConfig
from smpnp.mms import (
    ConvergenceTable,
    MmsProblem,
    SineField,
    convergence_study,
    mms_flux,
    mms_sources,
    observed_orders,
    solve_mms,
)

points = st.tuples(*[st.floats(0.05, 0.95)] * 3).map(np.array)


@settings(max_examples=50, deadline=None)
@given(points, st.integers(1, 3))
def test_sine_field_derivatives(x, m):
    f = SineField(m)
    h = 1e-6
    fd = np.array([(f.value(x + h * e) - f.value(x - h * e)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(f.gradient(x), fd, atol=1e-6 * m * m)
    h = 1e-4
    lap = sum((f.value(x + h * e) - 2 * f.value(x) + f.value(x - h * e)) / h**2 for e in np.eye(3))
    assert f.laplacian(x) == pytest.approx(lap, abs=1e-4 * m**4)


def test_fields_vanish_on_boundary():
    b = np.array([[0.0, 0.3, 0.7], [1.0, 0.2, 0.5], [0.4, 1.0, 0.1]])
    for m in (1, 2, 3):
        assert np.abs(SineField(m).value(b)).max() < 1e-15


@pytest.mark.parametrize("gamma_in_gradient", [True, False])
def test_sources_match_flux_divergence(gamma_in_gradient):
    prob = MmsProblem(gamma_in_gradient=gamma_in_gradient)
    x = np.array([0.31, 0.62, 0.17])
    _, fp, fn = mms_sources(prob, x)
    h = 1e-6
    div = np.zeros(2)
    for d, e in enumerate(np.eye(3)):
        jp1, jn1 = mms_flux(prob, x + h * e)
        jp0, jn0 = mms_flux(prob, x - h * e)
        div += [(jp1[d] - jp0[d]) / (2 * h), (jn1[d] - jn0[d]) / (2 * h)]
    assert fp == pytest.approx(-div[0], rel=1e-6)
    assert fn == pytest.approx(-div[1], rel=1e-6)


def test_poisson_source():
    prob = MmsProblem()
    x = np.array([[0.2, 0.4, 0.9]])
    fu, _, _ = mms_sources(prob, x)
    expected = 3 * np.pi**2 * prob.u.value(x) - (prob.c_p.value(x) - prob.c_n.value(x))
    assert np.abs(fu - expected).max() <= 1e-12


def test_without_sizes_has_pure_pnp_flux():
    prob = MmsProblem().without_sizes()
    assert prob.k_p == prob.k_n == 0
    x = np.array([0.3, 0.3, 0.6])
    jp, _ = mms_flux(prob, x)
    expected = prob.d_p * (prob.c_p.gradient(x) + prob.c_p.value(x) * prob.u.gradient(x))
    assert np.allclose(jp, expected)


def test_steric_scale_placement():
    assert MmsProblem().steric_scale == MmsProblem().gamma
    assert MmsProblem(gamma_in_gradient=False).steric_scale == 1.0


def test_observed_orders():
    h = [1 / 4, 1 / 8, 1 / 16]
    o = observed_orders(h, [1.0, 0.25, 0.0625])
    assert o[0] is None and o[1] == pytest.approx(2.0) and o[2] == pytest.approx(2.0)


def test_table_tsv_layout():
    t = ConvergenceTable(
        [0.25, 0.125],
        {"u": [1.0, 0.25], "c_p": [1.0, 0.5], "c_n": [2.0, 1.0]},
        {"u": [1.0, 0.5], "c_p": [1.0, 0.5], "c_n": [1.0, 0.5]},
        [],
    )
    rows = t.to_tsv().splitlines()
    assert rows[0].split("\t") == ["h", "L2_u", "ord", "L2_cp", "ord", "L2_cn", "ord",
                                   "H1_u", "ord", "H1_cp", "ord", "H1_cn", "ord"]
    first = rows[1].split("\t")
    assert first[0] == "1/4" and first[2] == ""
    second = rows[2].split("\t")
    assert second[0] == "1/8" and second[2] == "2.00" and second[8] == "1.00"


def test_solve_mms_small():
    r = solve_mms(4, GummelConfig())
    assert r.gummel.converged
    assert r.h == 0.25
    assert set(r.l2) == {"u", "c_p", "c_n"}
    assert all(v > 0 for v in r.l2.values())


def test_convergence_study_two_levels():
    seen = []
    t = convergence_study([4, 8], GummelConfig(), progress=seen.append)
    assert t.h == [0.25, 0.125] and len(seen) == 2
    assert t.orders("L2", "u")[1] > 1.5


def test_rejects_bad_level():
    with pytest.raises(ValueError):
        solve_mms(0)
