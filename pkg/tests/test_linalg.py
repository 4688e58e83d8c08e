import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
import io
from hypothesis import given, settings, strategies as st

from smpnp.linalg import (
    BreakdownError,
    ConvergenceError,
    LinearSystem,
    apply_dirichlet,
    assemble_from_triplets,
    relative_residual,
    solve_bicgstab,
    solve_cg,
    spmv,
    to_matrix_market,
)


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def test_triplets_sum_duplicates():
    A = assemble_from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)])
    assert A[0, 0] == 3.0 and A[1, 0] == -1.0 and A.nnz == 2


def test_triplets_out_of_range():
    with pytest.raises(IndexError):
        assemble_from_triplets(2, [(2, 0, 1.0)])


def test_spmv_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        spmv(laplacian_1d(4), np.ones(3))


def test_cg_tridiagonal():
    A = laplacian_1d(50)
    b = np.ones(50)
    x, it = solve_cg(A, b, tol=1e-12)
    assert relative_residual(A, x, b) <= 1e-12
    assert 0 < it <= 60


def test_cg_zero_rhs_and_exact_guess():
    A = laplacian_1d(5)
    x, it = solve_cg(A, np.zeros(5))
    assert it == 0 and not x.any()
    xs = np.linalg.solve(A.toarray(), np.ones(5))
    _, it = solve_cg(A, A @ xs, x0=xs)
    assert it == 0


def test_cg_indefinite_breakdown():
    A = sp.diags([1.0, -1.0]).tocsr()
    with pytest.raises(BreakdownError):
        solve_cg(A, np.array([1.0, 1.0]), preconditioner=None)


def test_cg_iteration_limit():
    with pytest.raises(ConvergenceError) as err:
        solve_cg(laplacian_1d(200), np.ones(200), max_iter=3)
    assert err.value.iterations == 3


def test_jacobi_zero_diagonal():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
    with pytest.raises(BreakdownError, match="zero diagonal"):
        solve_bicgstab(A, np.ones(2))


def test_bicgstab_nonsymmetric(rng):
    n = 80
    A = laplacian_1d(n) + sp.diags([0.4 * np.ones(n - 1)], [1])
    b = rng.standard_normal(n)
    x, _ = solve_bicgstab(A.tocsr(), b, tol=1e-12)
    assert relative_residual(A, x, b) <= 1e-12


def test_dimension_checks():
    with pytest.raises(ValueError):
        solve_cg(laplacian_1d(3), np.ones(4))
    with pytest.raises(ValueError):
        solve_bicgstab(laplacian_1d(3), np.ones(3), tol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**31 - 1))
def test_cg_random_spd(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    A = sp.csr_matrix(M @ M.T + n * np.eye(n))
    b = r.standard_normal(n)
    x, _ = solve_cg(A, b, tol=1e-10)
    assert relative_residual(A, x, b) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**31 - 1))
def test_bicgstab_random_diagonally_dominant(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n))
    A = sp.csr_matrix(M + (np.abs(M).sum(axis=1) + 1) * np.eye(n))
    b = r.standard_normal(n)
    x, _ = solve_bicgstab(A, b, tol=1e-10)
    assert relative_residual(A, x, b) <= 1e-10


class TestDirichlet:
    def system(self, symmetric):
        A = laplacian_1d(6)
        return LinearSystem(A, np.ones(6), [0, 5], [1.0, 2.0], symmetric=symmetric)

    @pytest.mark.parametrize("symmetric", [True, False])
    def test_solution_honours_values(self, symmetric):
        s = apply_dirichlet(self.system(symmetric))
        x = np.linalg.solve(s.matrix.toarray(), s.rhs)
        assert x[0] == pytest.approx(1.0) and x[5] == pytest.approx(2.0)

    def test_symmetric_stays_symmetric(self):
        s = apply_dirichlet(self.system(True))
        assert (s.matrix - s.matrix.T).count_nonzero() == 0

    def test_nonsymmetric_keeps_columns(self):
        s = apply_dirichlet(self.system(False))
        assert s.matrix[1, 0] == -1.0
        assert s.matrix[0, 1] == 0.0

    @pytest.mark.parametrize("symmetric", [True, False])
    def test_idempotent(self, symmetric):
        once = apply_dirichlet(self.system(symmetric))
        twice = apply_dirichlet(once)
        assert (once.matrix != twice.matrix).nnz == 0
        assert np.array_equal(once.rhs, twice.rhs)

    def test_missing_diagonal_is_inserted(self):
        A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 2.0]]))
        A.eliminate_zeros()
        s = apply_dirichlet(LinearSystem(A, np.ones(2), [0], [3.0]))
        assert s.matrix[0, 0] == 1.0 and s.rhs[0] == 3.0

    def test_bad_index(self):
        with pytest.raises(IndexError):
            LinearSystem(laplacian_1d(3), np.ones(3), [3], [0.0])


def test_matrix_market_round_trip():
    A = laplacian_1d(7)
    text = to_matrix_market(A)
    assert "general" in text.splitlines()[0]
    back = scipy.io.mmread(io.StringIO(text))
    assert np.array_equal(sp.csr_matrix(back).toarray(), A.toarray())
