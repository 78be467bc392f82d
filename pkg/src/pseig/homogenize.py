"""Cell correctors, homogenized coefficients, and the analytic limit
spectrum of the directionally homogenized eigenproblem.

The corrector theta_i solves the singular periodic cell problem

    -div(rho (e_i + grad theta_i)) = 0   on (0,1)^p x (0,ell)^q,

x-periodic and natural in y; uniqueness is fixed by the rho-weighted zero
mean.  The homogenized coefficients are

    Dbar_ij = integral rho (delta_ij + d theta_j / d x_i),   Cbar = integral rho.

For diagonal Dbar the limit eigenpairs are analytic:
nu^(m) = pi^2 (sum_i Dbar_ii m_i^2) / Cbar with eigenfunctions
N * prod_i sin(m_i pi x_i), N = 2^{p/2} / sqrt(Cbar).
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import (
    CoefficientSpec,
    ReferenceTables,
    ScalarField,
    _cell_node_ids,
    _chunks,
    _quad_coords,
    assemble_corrector_system,
    assemble_pencil,
    gradients_at_quadrature,
)
from .errors import AlignmentError, ConfigurationError, SolverNonConvergence
from .grid import NEUMANN, PERIODIC, BoundarySpec, build_dof_map
from .linalg import shift_invert_factor, spmv


@dataclass
class HomogenizedModel:
    Dbar: np.ndarray
    Cbar: float
    correctors: list = field(repr=False)
    nu: list = None
    multi_indices: list = None
    normalization: float = None

    def serialize(self):
        """Flat key=value text block for CSV-friendly diffing."""
        lines = []
        p = self.Dbar.shape[0]
        for i in range(p):
            for j in range(p):
                lines.append(f"Dbar_{i + 1}{j + 1} = {self.Dbar[i, j]:.10e}")
        lines.append(f"Cbar = {self.Cbar:.10e}")
        if self.normalization is not None:
            lines.append(f"normalization = {self.normalization:.10e}")
        for m, (nu, idx) in enumerate(
            zip(self.nu or (), self.multi_indices or ()), start=1
        ):
            idx_str = "x".join(str(k) for k in idx)
            lines.append(f"nu_{m} = {nu:.10e}  # index {idx_str}")
        return "\n".join(lines) + "\n"


def _weighted_mean(mesh, dofmap, rho, theta_coeffs):
    """(integral rho theta, integral rho) by quadrature."""
    coeff = CoefficientSpec(rho=rho)
    tables = ReferenceTables(mesh)
    cells = mesh.active_cell_indices()
    fld = ScalarField(mesh, dofmap, theta_coeffs)
    nv = fld.node_values()
    num = 0.0
    den = 0.0
    for lo, hi in _chunks(cells.shape[0], 20000):
        cm = cells[lo:hi]
        node_ids = _cell_node_ids(mesh, cm, tables.offsets)
        pts = _quad_coords(mesh, cm, tables).reshape(-1, mesh.dim)
        rho_q = coeff.rho_at(pts).reshape(hi - lo, -1)
        tq = nv[node_ids] @ tables.N.T
        num += float(np.sum(tables.w * rho_q * tq))
        den += float(np.sum(tables.w * rho_q))
    return num, den


def _solve_pinned(K, f, method):
    """Solve the singular consistent system K x = f with DOF 0 pinned to 0,
    either directly or by preconditioned CG on the full singular system."""
    n = K.n
    if method == "auto":
        # sparse LU fill-in makes the direct route impractically slow for 3D
        # Q2 meshes well before memory runs out, so switch to AMG-CG early
        method = "direct" if n <= 20_000 else "amg"
    if method == "direct":
        keep = np.arange(1, n)
        Kr = K.mat[keep][:, keep].tocsc()
        import scipy.sparse.linalg as spla

        x = np.zeros(n)
        x[1:] = spla.splu(Kr).solve(f[1:])
        return x
    # CG with an algebraic multigrid preconditioner on the singular matrix,
    # projecting out the constant nullspace each iteration.
    ones = np.ones(n) / np.sqrt(n)
    b = f - (ones @ f) * ones

    def project(v):
        return v - (ones @ v) * ones

    try:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(
            K.mat.tocsr(), B=np.ones((n, 1)), max_coarse=500
        )
        M = ml.aspreconditioner()
        precond = lambda r: project(M @ r)  # noqa: E731
    except Exception:
        diag = K.mat.diagonal().copy()
        diag[diag <= 0] = 1.0
        precond = lambda r: project(r / diag)  # noqa: E731

    x = np.zeros(n)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    bnorm = np.linalg.norm(b)
    for _ in range(5000):
        Kp = K.mat @ p
        alpha = rz / float(p @ Kp)
        x += alpha * p
        r -= alpha * Kp
        r = project(r)
        if np.linalg.norm(r) <= 1e-12 * bnorm:
            return x
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverNonConvergence("corrector CG stagnated")


def solve_correctors(mesh, rho, method="auto"):
    """Solve the p corrector problems; returns mean-zero ScalarFields."""
    p = mesh.domain.p
    bc = BoundarySpec(bx=PERIODIC, by=NEUMANN)
    dofmap = build_dof_map(mesh, bc)
    out = []
    for i in range(p):
        K, f = assemble_corrector_system(mesh, dofmap, rho, i)
        x = _solve_pinned(K, f, method)
        res = np.linalg.norm(spmv(K, x) - f)
        scale = max(np.linalg.norm(f), 1e-30)
        if res > 1e-8 * scale and res > 1e-12:
            raise SolverNonConvergence(
                f"corrector solve residual {res:.3e} too large"
            )
        num, den = _weighted_mean(mesh, dofmap, rho, x)
        x = x - num / den
        out.append(ScalarField(mesh, dofmap, x, periodic_extension_x=True))
    return out


def homogenized_coefficients(mesh, rho, correctors):
    """Quadrature evaluation of (Dbar, Cbar) on the cell mesh."""
    p = mesh.domain.p
    if len(correctors) != p:
        raise ConfigurationError("need one corrector per expanding direction")
    for th in correctors:
        if th.mesh.node_shape != mesh.node_shape or th.mesh.order != mesh.order:
            raise ConfigurationError("corrector mesh does not match cell mesh")
    coeff = CoefficientSpec(rho=rho)
    tables = ReferenceTables(mesh)
    cells = mesh.active_cell_indices()
    D = np.zeros((p, p))
    C = 0.0
    for lo, hi in _chunks(cells.shape[0], 10000):
        cm = cells[lo:hi]
        pts = _quad_coords(mesh, cm, tables).reshape(-1, mesh.dim)
        rho_q = coeff.rho_at(pts).reshape(hi - lo, -1)
        wrho = tables.w * rho_q
        C += float(wrho.sum())
        for j in range(p):
            grad = gradients_at_quadrature(correctors[j], tables, cm)
            for i in range(p):
                D[i, j] += float(np.sum(wrho * grad[:, :, i]))
    D += C * np.eye(p)
    return D, float(C)


def offdiag_tolerance(Dbar):
    """Default diagonality tolerance: 1e-6 * trace(Dbar)/p."""
    p = Dbar.shape[0]
    return 1e-6 * np.trace(Dbar) / p


def analytic_limit_eigenpairs(Dbar, Cbar, m_max):
    """First m_max limit eigenpairs (nu, multi-index, closure) for diagonal
    Dbar, sorted ascending by nu."""
    Dbar = np.atleast_2d(np.asarray(Dbar, dtype=float))
    p = Dbar.shape[0]
    tol = offdiag_tolerance(Dbar)
    off = np.abs(Dbar - np.diag(np.diag(Dbar))).max() if p > 1 else 0.0
    if off > tol:
        raise ConfigurationError(
            f"homogenized diffusion is not diagonal (max off-diagonal {off:.3e}); "
            "use solve_limit_problem_numerically instead"
        )
    diag = np.diag(Dbar)
    norm_const = 2.0 ** (p / 2.0) / np.sqrt(Cbar)

    # enumerate enough multi-indices to cover the first m_max values
    kmax = m_max + 2
    entries = []
    for idx in itertools.product(range(1, kmax + 1), repeat=p):
        nu = np.pi**2 * float(np.sum(diag * np.square(idx))) / Cbar
        entries.append((nu, idx))
    entries.sort(key=lambda e: (e[0], e[1]))
    out = []
    for nu, idx in entries[:m_max]:
        def closure(pts, idx=idx):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            vals = np.full(pts.shape[0], norm_const)
            for k, mk in enumerate(idx):
                vals *= np.sin(mk * np.pi * pts[:, k])
            return vals

        out.append((nu, idx, closure))
    return out


def solve_limit_problem_numerically(Dbar, Cbar, domain, m_max, cells=64, order=2):
    """Fallback for non-diagonal Dbar: solve the constant-coefficient
    p-dimensional limit eigenproblem on (0,1)^p with Dirichlet conditions."""
    from .eigensolve import SolverConfig, deflated_smallest_k
    from .grid import DIRICHLET, DomainSpec, build_box_mesh

    p = np.atleast_2d(Dbar).shape[0]
    dom = DomainSpec(p=0, q=p, L=1.0, ell=1.0)
    mesh = build_box_mesh(dom, (cells,) * p, order=order)
    dofmap = build_dof_map(mesh, BoundarySpec(bx=DIRICHLET, by=DIRICHLET))
    # stiffness with diffusion Dbar and unit weight, mass with weight Cbar
    A, _ = assemble_pencil(
        mesh, dofmap, CoefficientSpec(rho=1.0, V=0.0),
        diffusion=np.atleast_2d(Dbar) * 1.0,
    )
    _, B = assemble_pencil(mesh, dofmap, CoefficientSpec(rho=float(Cbar), V=0.0))
    results = deflated_smallest_k(A, B, SolverConfig(tol=1e-10, k_max=200), m_max)
    return [
        (r.value, None, ScalarField(mesh, dofmap, r.vector)) for r in results
    ]


DEGENERACY_REL_TOL = 1e-6


def align_degenerate_pair(x2, x3, t2, t3, B):
    """Rotate a B-orthonormal degenerate pair to match the targets:
    x_i' = <x2, t_i>_B x2 + <x3, t_i>_B x3, then B-renormalized."""
    out = []
    for t in (t2, t3):
        c2 = float(x2 @ spmv(B, t))
        c3 = float(x3 @ spmv(B, t))
        v = c2 * x2 + c3 * x3
        nrm = float(v @ spmv(B, v))
        if nrm <= 1e-24:
            raise AlignmentError("alignment target orthogonal to the eigenspace")
        out.append(v / np.sqrt(nrm))
    return tuple(out)
