"""Sparse matrices, Dirichlet constraints and Krylov solvers.

Matrices are :class:`scipy.sparse.csr_matrix` instances with sorted, unique
column indices. The solvers are plain (Jacobi-preconditioned) CG and
BiCGStab that report iteration counts and fail loudly on breakdown.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = [
    "LinearSolverError",
    "BreakdownError",
    "ConvergenceError",
    "LinearSystem",
    "assemble_from_triplets",
    "spmv",
    "solve_cg",
    "solve_bicgstab",
    "apply_dirichlet",
    "relative_residual",
    "to_matrix_market",
]


class LinearSolverError(RuntimeError):
    """Base class for iterative solver failures."""

    def __init__(self, message, iterations=0, residual=np.nan):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BreakdownError(LinearSolverError):
    pass


class ConvergenceError(LinearSolverError):
    pass


def assemble_from_triplets(dim: int, triplets) -> sp.csr_matrix:
    """CSR matrix from ``(row, col, value)`` triplets; duplicates are summed."""
    t = list(triplets)
    if t:
        rows, cols, vals = (np.asarray(a) for a in zip(*t))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= dim or cols.max() >= dim):
        raise IndexError(f"triplet index out of range for dimension {dim}")
    A = sp.coo_matrix((vals.astype(float), (rows, cols)), shape=(dim, dim)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A @ x


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def _jacobi(A, preconditioner):
    if preconditioner in (None, "none"):
        return None
    if preconditioner != "jacobi":
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    d = A.diagonal()
    bad = np.nonzero(d == 0)[0]
    if bad.size:
        raise BreakdownError(f"zero diagonal entry in row {bad[0]}; Jacobi preconditioner undefined")
    return 1.0 / d


def solve_cg(A, b, tol=1e-10, max_iter=None, preconditioner="jacobi", x0=None):
    """Preconditioned conjugate gradients for symmetric positive-definite ``A``.

    Stops when ``||b - A x|| <= tol * ||b||`` on the true residual.

    Returns
    -------
    x : ndarray
    iterations : int
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros(n), 0
    minv = _jacobi(A, preconditioner)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    if np.linalg.norm(r) <= tol * nb:
        return x, 0
    z = r * minv if minv is not None else r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        q = A @ p
        curv = p @ q
        if not curv > 0:
            raise BreakdownError(f"non-positive curvature p.Ap = {curv:.3e}", it, np.linalg.norm(r) / nb)
        alpha = rz / curv
        x += alpha * p
        r -= alpha * q
        if np.linalg.norm(r) <= tol * nb:
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it
        z = r * minv if minv is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations", max_iter, np.linalg.norm(b - A @ x) / nb
    )


def solve_bicgstab(A, b, tol=1e-10, max_iter=None, preconditioner="jacobi", x0=None):
    """Right-preconditioned BiCGStab for general square ``A``.

    On breakdown (a vanishing inner product) the shadow residual is reset to
    the current residual and the iteration restarted. A second breakdown
    before any successful step raises :class:`BreakdownError`.

    Returns
    -------
    x : ndarray
    iterations : int
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = len(b)
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, rhs {b.shape}")
    max_iter = 10 * n + 10 if max_iter is None else max_iter
    nb = np.linalg.norm(b)
    if nb == 0:
        return np.zeros(n), 0
    minv = _jacobi(A, preconditioner)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    if np.linalg.norm(r) <= tol * nb:
        return x, 0
    eps = np.finfo(float).eps ** 2

    def vanishes(value, u, w):
        return not np.isfinite(value) or abs(value) <= eps * np.linalg.norm(u) * np.linalg.norm(w)

    rhat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    just_restarted = False
    for it in range(1, max_iter + 1):
        rho_new = rhat @ r
        breakdown = vanishes(rho_new, rhat, r) or omega == 0
        if not breakdown:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
            phat = p * minv if minv is not None else p
            v = A @ phat
            denom = rhat @ v
            breakdown = vanishes(denom, rhat, v)
        if breakdown:
            if just_restarted:
                raise BreakdownError("BiCGStab breakdown after restart", it, np.linalg.norm(r) / nb)
            just_restarted = True
            rhat = r.copy()
            rho = alpha = omega = 1.0
            v = np.zeros(n)
            p = np.zeros(n)
            continue
        alpha = rho_new / denom
        s = r - alpha * v
        x += alpha * phat
        if np.linalg.norm(s) <= tol * nb:
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it
            s = r
        shat = s * minv if minv is not None else s
        t = A @ shat
        tt = t @ t
        omega = (t @ s) / tt if tt > 0 else 0.0
        x += omega * shat
        r = s - omega * t
        rho = rho_new
        just_restarted = False
        if not np.all(np.isfinite(x)):
            raise BreakdownError("BiCGStab produced a non-finite iterate", it, np.nan)
        if np.linalg.norm(r) <= tol * nb:
            r = b - A @ x
            if np.linalg.norm(r) <= tol * nb:
                return x, it
    raise ConvergenceError(
        f"BiCGStab did not converge in {max_iter} iterations", max_iter, np.linalg.norm(b - A @ x) / nb
    )


@dataclass(frozen=True)
class LinearSystem:
    """Matrix, right-hand side and Dirichlet constraints ``x[index] = value``.

    ``symmetric`` selects symmetric elimination (rows and columns) in
    :func:`apply_dirichlet`; otherwise only the constrained rows are replaced.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray = None
    values: np.ndarray = None
    symmetric: bool = False

    def __post_init__(self):
        n = self.matrix.shape[0]
        idx = np.zeros(0, dtype=np.int64) if self.constrained is None else np.asarray(self.constrained, np.int64)
        vals = np.zeros(len(idx)) if self.values is None else np.broadcast_to(
            np.asarray(self.values, dtype=float), idx.shape
        )
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise IndexError("constraint index out of range")
        object.__setattr__(self, "constrained", idx)
        object.__setattr__(self, "values", np.array(vals, dtype=float))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.matrix.shape[0], dtype=bool)
        mask[self.constrained] = False
        return mask


def apply_dirichlet(system: LinearSystem) -> LinearSystem:
    """Replace constrained rows by identity rows carrying the prescribed value.

    For symmetric systems the constrained columns are eliminated as well and
    their contribution moved to the right-hand side, so symmetry survives.
    Applying the function twice gives the same system.
    """
    A = system.matrix.tocsr(copy=True)
    A.sort_indices()
    n = A.shape[0]
    idx = system.constrained
    g = np.zeros(n)
    g[idx] = system.values
    is_c = ~system.free
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    cols = A.indices
    b = system.rhs.copy()
    if system.symmetric:
        b = b - A @ g
        kill = is_c[rows] | is_c[cols]
    else:
        kill = is_c[rows]
    A.data[kill] = 0.0
    diag = kill & (rows == cols)
    A.data[diag] = 1.0
    missing = idx[~np.isin(idx, rows[diag])]
    if missing.size:
        A = (A + sp.csr_matrix((np.ones(len(missing)), (missing, missing)), shape=(n, n))).tocsr()
        A.sort_indices()
    b[idx] = system.values
    return replace(system, matrix=A, rhs=b)


def to_matrix_market(A) -> str:
    """MatrixMarket coordinate dump (always the ``general`` symmetry kind)."""
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, sp.coo_matrix(A), symmetry="general")
    return buf.getvalue().decode()
