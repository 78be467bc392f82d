"""Gap-dependent iterative eigensolvers for the symmetric pencil (A, B).

Both methods precondition with P = (A - sigma*B)^{-1}:

* shifted inverse power iteration: x_k ~ P B x_{k-1}, B-normalized, with
  the Rayleigh quotient as the eigenvalue estimate;
* LOPCG: Rayleigh-Ritz over span{x_{k-1}, w_k, x_{k-2}} with the
  preconditioned residual w_k = P (A x - R(x) B x).

Convergence is declared when the Euclidean residual ||A x - lambda B x||_2
drops below TOL.  Higher eigenpairs are obtained by rerunning LOPCG with
hard B-orthogonal deflation against the converged vectors.
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DataError
from .linalg import dense_sym_eig, jacobi_cg, shift_invert_factor, spmv


@dataclass
class SolverConfig:
    sigma: float = 0.0
    tol: float = 1e-10
    k_max: int = 100
    x0: np.ndarray = None
    x_prev: np.ndarray = None  # the x_{-1} start vector of LOPCG
    deflation: tuple = ()  # B-orthonormal converged vectors
    backend: str = "direct"  # shift-invert backend: "direct" | "cg"
    cg_tol: float = 1e-12

    def __post_init__(self):
        if self.tol <= 0 or self.k_max < 1:
            raise DataError("need tol > 0 and k_max >= 1")


@dataclass
class EigResult:
    value: float
    vector: np.ndarray = dc_field(repr=False)
    iterations: int
    residual_history: list
    rayleigh_history: list
    converged: bool
    wall_time: float = 0.0


def rayleigh_quotient(A, B, x):
    xBx = float(x @ spmv(B, x))
    if xBx <= 0:
        raise DataError("x^T B x <= 0 in Rayleigh quotient")
    return float(x @ spmv(A, x)) / xBx


def _b_inner(B, x, y):
    return float(x @ spmv(B, y))


def _deflate(B, x, deflation):
    for y in deflation:
        x = x - _b_inner(B, y, x) * y
    return x


def _b_normalize(B, x):
    nrm = _b_inner(B, x, x)
    if nrm <= 0:
        raise DataError("degenerate iterate: x^T B x <= 0")
    return x / np.sqrt(nrm)


def _fix_sign(x):
    """Deterministic sign: entry of largest magnitude made positive."""
    i = int(np.argmax(np.abs(x)))
    return -x if x[i] < 0 else x


def _make_preconditioner(A, B, cfg):
    backend = cfg.backend
    if backend == "auto":
        backend = "direct" if A.n <= 60_000 else "amg"
    if backend == "direct":
        factor = shift_invert_factor(A, B, cfg.sigma)
        return factor.solve
    C = (A.mat - cfg.sigma * B.mat).tocsr() if cfg.sigma != 0.0 else A.mat.tocsr()
    if backend == "amg":
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(
            C, B=np.ones((C.shape[0], 1)), max_coarse=500
        )
        M = ml.aspreconditioner()
        return lambda r: jacobi_cg(C, r, tol=cfg.cg_tol, precond=lambda v: M @ v)
    if backend == "cg":
        diag = C.diagonal().copy()
        diag[diag <= 0] = 1.0
        return lambda r: jacobi_cg(C, r, tol=cfg.cg_tol, precond=lambda v: v / diag)
    raise DataError(f"unknown preconditioner backend {cfg.backend!r}")


def _start_vector(n, cfg, B):
    x = np.ones(n) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float).copy()
    x = _deflate(B, x, cfg.deflation)
    if np.linalg.norm(x) == 0:
        raise DataError("start vector vanishes after deflation projection")
    return _b_normalize(B, x)


def inverse_power(A, B, cfg):
    """Shifted inverse power method (converges to the eigenvalue nearest
    sigma, which is the smallest whenever sigma is below it)."""
    t0 = time.perf_counter()
    P = _make_preconditioner(A, B, cfg)
    x = _start_vector(A.n, cfg, B)
    residuals, rayleighs = [], []
    converged = False
    k = 0
    for k in range(1, cfg.k_max + 1):
        x = P(spmv(B, x))
        x = _deflate(B, x, cfg.deflation)
        x = _b_normalize(B, x)
        lam = rayleigh_quotient(A, B, x)
        res = float(np.linalg.norm(spmv(A, x) - lam * spmv(B, x)))
        residuals.append(res)
        rayleighs.append(lam)
        if res < cfg.tol:
            converged = True
            break
    x = _fix_sign(x)
    return EigResult(
        value=rayleighs[-1],
        vector=x,
        iterations=k,
        residual_history=residuals,
        rayleigh_history=rayleighs,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )


def _mgs_b_orthonormalize(B, vectors, drop_tol=1e-12):
    """Modified Gram-Schmidt in the B-inner product; directions whose
    remaining B-norm falls below drop_tol times the leading one are
    dropped (rank-reduced Ritz step)."""
    basis = []
    lead = None
    for v in vectors:
        if v is None:
            continue
        v = np.array(v, dtype=float)
        for b in basis:
            v -= _b_inner(B, b, v) * b
        nrm2 = _b_inner(B, v, v)
        nrm = np.sqrt(max(nrm2, 0.0))
        if lead is None:
            lead = nrm if nrm > 0 else 1.0
        if nrm <= drop_tol * lead:
            continue
        basis.append(v / nrm)
    return basis


def lopcg(A, B, cfg):
    """Locally optimal preconditioned conjugate gradient iteration."""
    t0 = time.perf_counter()
    P = _make_preconditioner(A, B, cfg)
    n = A.n
    x = _start_vector(n, cfg, B)
    x_prev = np.zeros(n)
    x_prev[0] = 1.0
    if cfg.x_prev is not None:
        x_prev = np.asarray(cfg.x_prev, dtype=float).copy()
    x_prev = _deflate(B, x_prev, cfg.deflation)

    residuals, rayleighs = [], []
    converged = False
    k = 0
    for k in range(1, cfg.k_max + 1):
        lam = rayleigh_quotient(A, B, x)
        w = P(spmv(A, x) - lam * spmv(B, x))
        w = _deflate(B, w, cfg.deflation)

        basis = _mgs_b_orthonormalize(B, [x, w, x_prev])
        V = np.column_stack(basis)
        AV = np.column_stack([spmv(A, b) for b in basis])
        Am = V.T @ AV
        Bm = V.T @ np.column_stack([spmv(B, b) for b in basis])
        Am = 0.5 * (Am + Am.T)
        Bm = 0.5 * (Bm + Bm.T)
        vals, vecs = dense_sym_eig(Am, Bm)
        x_new = V @ vecs[:, 0]

        x_prev = x
        x = _b_normalize(B, _deflate(B, x_new, cfg.deflation))
        lam = rayleigh_quotient(A, B, x)
        res = float(np.linalg.norm(spmv(A, x) - lam * spmv(B, x)))
        residuals.append(res)
        rayleighs.append(lam)
        if res < cfg.tol:
            converged = True
            break

    x = _fix_sign(x)
    return EigResult(
        value=rayleighs[-1],
        vector=x,
        iterations=k,
        residual_history=residuals,
        rayleigh_history=rayleighs,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )


def deflated_smallest_k(A, B, cfg, m):
    """Smallest m eigenpairs by sequential LOPCG with hard B-orthogonal
    deflation; results are sorted ascending by eigenvalue.  A stagnating
    sub-run is returned with converged=False (partial result list)."""
    if m < 1:
        raise DataError("need m >= 1")
    results = []
    deflation = list(cfg.deflation)
    for run in range(m):
        x0 = cfg.x0
        if x0 is None and run > 0:
            # The all-ones default is exactly orthogonal to antisymmetric
            # modes, so deflated runs start from a seeded random vector.
            x0 = np.random.default_rng(run).standard_normal(A.n)
        sub = SolverConfig(
            sigma=cfg.sigma,
            tol=cfg.tol,
            k_max=cfg.k_max,
            x0=x0,
            x_prev=cfg.x_prev,
            deflation=tuple(deflation),
            backend=cfg.backend,
            cg_tol=cfg.cg_tol,
        )
        res = lopcg(A, B, sub)
        results.append(res)
        if not res.converged:
            break
        deflation.append(res.vector)
    results.sort(key=lambda r: r.value)
    return results
