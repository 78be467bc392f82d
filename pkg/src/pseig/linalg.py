"""Sparse symmetric storage, shift-and-invert solves, and a small dense
generalized eigensolver used for Rayleigh-Ritz steps and as a brute-force
oracle.

Two interchangeable shift-invert backends:

* "direct": sparse LU factorization of (A - sigma*B) with a fill-reducing
  column ordering; definiteness is probed with a short inverse iteration so
  an overshooting shift is reported instead of silently converging to the
  wrong end of the spectrum.
* "cg": Jacobi-preconditioned conjugate gradient; an indefiniteness
  certificate (p^T C p <= 0) raises the same shift-too-large error.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, DataError, ShiftTooLargeError, SolverNonConvergence


class SparseMatrix:
    """CSR symmetric sparse matrix (thin wrapper over scipy CSR)."""

    def __init__(self, mat):
        mat = sp.csr_matrix(mat)
        mat.sort_indices()
        if mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise ConfigurationError("SparseMatrix must be square, n >= 1")
        self.mat = mat

    @property
    def n(self):
        return self.mat.shape[0]

    @property
    def indptr(self):
        return self.mat.indptr

    @property
    def indices(self):
        return self.mat.indices

    @property
    def values(self):
        return self.mat.data

    @property
    def nnz(self):
        return self.mat.nnz

    def toarray(self):
        return self.mat.toarray()

    def __matmul__(self, x):
        return spmv(self, x)


def _as_sparse(M):
    return M.mat if isinstance(M, SparseMatrix) else sp.csr_matrix(M)


def spmv(M, x):
    """Sparse matrix-vector product with a dimension check."""
    m = _as_sparse(M)
    x = np.asarray(x)
    if x.shape[0] != m.shape[1]:
        raise ConfigurationError(
            f"spmv dimension mismatch: {m.shape[1]} vs {x.shape[0]}"
        )
    return m @ x


@dataclass
class SpdFactor:
    """Factorization of C = A - sigma*B for repeated solves."""

    sigma: float
    n: int
    _solve: object = field(repr=False)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ConfigurationError("factor solve dimension mismatch")
        return self._solve(rhs)


def _definiteness_probe(C, solve, iters=10, seed=7):
    """Short inverse iteration to estimate the eigenvalue of C nearest zero;
    a nonpositive Rayleigh quotient means C is not positive definite."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(C.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        v = solve(v)
        nrm = np.linalg.norm(v)
        if not np.isfinite(nrm) or nrm == 0:
            raise ShiftTooLargeError("factor solve produced a non-finite vector")
        v /= nrm
    return float(v @ (C @ v))


def shift_invert_factor(A, B=None, sigma=0.0, probe=True):
    """Build an SpdFactor of (A - sigma*B); B defaults to the identity."""
    Am = _as_sparse(A)
    C = Am if (sigma == 0.0 and B is None) else (
        Am - sigma * (_as_sparse(B) if B is not None else sp.identity(Am.shape[0]))
    )
    C = C.tocsc()
    try:
        lu = spla.splu(C)
    except RuntimeError as exc:
        raise ShiftTooLargeError(f"factorization breakdown: {exc}") from exc
    factor = SpdFactor(sigma=float(sigma), n=C.shape[0], _solve=lu.solve)
    if probe:
        mu = _definiteness_probe(C.tocsr(), factor.solve)
        if mu <= 0:
            raise ShiftTooLargeError(
                f"(A - sigma B) is indefinite (probe eigenvalue {mu:.3e}); "
                "the shift exceeds the smallest pencil eigenvalue"
            )
    return factor


def jacobi_cg(C, b, tol=1e-12, maxiter=None, precond=None):
    """Jacobi-preconditioned CG for SPD C; raises ShiftTooLargeError on an
    indefiniteness certificate and SolverNonConvergence on stagnation."""
    C = _as_sparse(C)
    n = C.shape[0]
    if maxiter is None:
        maxiter = 20 * n
    if precond is None:
        diag = C.diagonal().copy()
        bad = diag <= 0
        if bad.all():
            raise ShiftTooLargeError("matrix diagonal entirely nonpositive")
        diag[bad] = 1.0
        precond = lambda r: r / diag  # noqa: E731

    x = np.zeros(n)
    r = b - C @ x
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x
    for _ in range(maxiter):
        Cp = C @ p
        pCp = float(p @ Cp)
        if pCp <= 0:
            raise ShiftTooLargeError(
                "CG encountered a nonpositive curvature direction: "
                "(A - sigma B) is not positive definite"
            )
        alpha = rz / pCp
        x += alpha * p
        r -= alpha * Cp
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverNonConvergence(
        f"CG did not reach tol={tol} in {maxiter} iterations",
        details={"residual": float(np.linalg.norm(r) / bnorm)},
    )


def shift_invert_apply(A, B, sigma, rhs, method="direct", tol=1e-12):
    """One-shot (A - sigma*B)^{-1} rhs using the selected backend."""
    if method == "direct":
        return shift_invert_factor(A, B, sigma).solve(rhs)
    if method == "cg":
        Am, Bm = _as_sparse(A), _as_sparse(B) if B is not None else None
        C = Am if (sigma == 0.0 and Bm is None) else Am - sigma * (
            Bm if Bm is not None else sp.identity(Am.shape[0])
        )
        return jacobi_cg(C.tocsr(), rhs, tol=tol)
    raise ConfigurationError(f"unknown shift-invert backend {method!r}")


def dense_sym_eig(M, Bs=None):
    """All eigenpairs of the small dense symmetric pencil (M, Bs), ascending,
    with Bs-orthonormal eigenvectors.  Oracle-sized only (n <= 500)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n):
        raise DataError("matrix must be square")
    if n > 500:
        raise DataError("dense_sym_eig is restricted to n <= 500")
    scale = max(1.0, np.abs(M).max())
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise DataError("matrix is not symmetric")
    if Bs is not None:
        Bs = np.asarray(Bs, dtype=float)
        try:
            np.linalg.cholesky(Bs)
        except np.linalg.LinAlgError as exc:
            raise DataError("Bs is not positive definite") from exc
        w, V = scipy.linalg.eigh(M, Bs)
    else:
        w, V = scipy.linalg.eigh(M)
    return w, V


# ---------------------------------------------------------------------------
# Matrix Market interchange
# ---------------------------------------------------------------------------

def write_matrix_market(path, M):
    obj = _as_sparse(M) if not isinstance(M, np.ndarray) else M
    scipy.io.mmwrite(str(path), obj if not isinstance(obj, np.ndarray)
                     else np.atleast_2d(obj).T)


def read_matrix_market(path):
    obj = scipy.io.mmread(str(path))
    if sp.issparse(obj):
        return SparseMatrix(obj.tocsr())
    arr = np.asarray(obj)
    return arr.ravel() if 1 in arr.shape else arr
