"""Finite element assembly of the weighted generalized pencil (A, B).

The weak form is

    integral rho grad(u).D.grad(v) + integral V u v  =  lambda integral rho u v

over the active cells of a structured Q1/Q2 mesh, with tensor
Gauss-Legendre quadrature of (order + 1) points per direction.  D is an
optional constant diffusion matrix (identity by default) used for the
direction-scaled problems.

Coefficients are sampled pointwise at quadrature nodes; a weight given as a
discrete ScalarField is squared at the quadrature points (no clamping).
Dirichlet DOFs are eliminated (reduced pencil) and periodic contributions
are accumulated onto representative DOFs.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DataError, InconsistentSystemError
from .grid import DofMap, Mesh
from .linalg import SparseMatrix

try:  # compiled kernel, with a pure-numpy fallback
    from . import _kernels as _kern

    KERNEL_BACKEND = "cython"
except ImportError:  # pragma: no cover - depends on the build
    from . import _kernels_py as _kern

    KERNEL_BACKEND = "python"


# ---------------------------------------------------------------------------
# reference element tables
# ---------------------------------------------------------------------------

def _shape_1d(order, xi):
    """1D Lagrange shape values and derivatives at points xi in [0,1].

    Returns (vals, ders) of shape (len(xi), order+1); nodes are equispaced
    including the endpoints.
    """
    xi = np.asarray(xi, dtype=float)
    if order == 1:
        vals = np.stack([1.0 - xi, xi], axis=1)
        ders = np.stack([-np.ones_like(xi), np.ones_like(xi)], axis=1)
    elif order == 2:
        vals = np.stack(
            [2 * xi * xi - 3 * xi + 1, 4 * xi - 4 * xi * xi, 2 * xi * xi - xi],
            axis=1,
        )
        ders = np.stack([4 * xi - 3, 4 - 8 * xi, 4 * xi - 1], axis=1)
    else:
        raise ConfigurationError(f"unsupported order {order}")
    return vals, ders


def gauss_legendre_01(n):
    """n-point Gauss-Legendre rule on [0,1]."""
    pts, wts = np.polynomial.legendre.leggauss(n)
    return 0.5 * (pts + 1.0), 0.5 * wts


def _local_offsets(order, d):
    """Local node multi-offsets in lexicographic order, direction 0 fastest."""
    return np.column_stack(
        np.unravel_index(np.arange((order + 1) ** d), (order + 1,) * d, order="F")
    )


class ReferenceTables:
    """Per-mesh precomputed quadrature and shape tables.

    Attributes:
      w      (nq,)            weights including the cell volume
      qpts   (nq, d)          quadrature points in local cell coordinates [0,h]
      N      (nq, nloc)       shape values
      G      (nq, nloc, d)    physical gradients
      PG     (nq, nloc, nloc) gradient-pair table G_i . D . G_j
      NN     (nq, nloc, nloc) shape-pair table N_i N_j
    """

    def __init__(self, mesh, diffusion=None, n_qp=None):
        d = mesh.dim
        order = mesh.order
        h = mesh.h
        n1 = n_qp if n_qp is not None else order + 1
        x1, w1 = gauss_legendre_01(n1)
        vals1, ders1 = _shape_1d(order, x1)

        offsets = _local_offsets(order, d)
        nloc = offsets.shape[0]
        qmulti = _local_offsets(n1 - 1, d) if n1 > 1 else np.zeros((1, d), int)
        # quadrature points as a tensor grid, direction 0 fastest
        qmulti = np.column_stack(
            np.unravel_index(np.arange(n1**d), (n1,) * d, order="F")
        )
        nq = qmulti.shape[0]

        N = np.ones((nq, nloc))
        G = np.zeros((nq, nloc, d))
        for k in range(d):
            vk = vals1[qmulti[:, k]][:, offsets[:, k]]  # (nq, nloc)
            N *= vk
        for k in range(d):
            gk = ders1[qmulti[:, k]][:, offsets[:, k]] / h[k]
            prod = gk.copy()
            for m in range(d):
                if m != k:
                    prod *= vals1[qmulti[:, m]][:, offsets[:, m]]
            G[:, :, k] = prod

        w = np.ones(nq)
        for k in range(d):
            w *= w1[qmulti[:, k]] * h[k]

        if diffusion is None:
            D = np.eye(d)
        else:
            D = np.asarray(diffusion, dtype=float)
            if D.ndim == 1:
                D = np.diag(D)
            if D.shape != (d, d):
                raise ConfigurationError("diffusion matrix has wrong shape")

        self.w = w
        self.qpts_local = (qmulti * 0.0 + x1[qmulti]) * h  # (nq, d) in [0,h]
        self.N = N
        self.G = G
        self.PG = np.einsum("qid,de,qje->qij", G, D, G)
        self.NN = np.einsum("qi,qj->qij", N, N)
        self.offsets = offsets
        self.mesh = mesh


def _cell_node_ids(mesh, cells_multi, offsets):
    nodes_multi = mesh.order * cells_multi[:, None, :] + offsets[None, :, :]
    return np.ravel_multi_index(
        np.moveaxis(nodes_multi, -1, 0), mesh.node_shape, order="F"
    )


def _quad_coords(mesh, cells_multi, tables):
    """Physical quadrature coordinates, shape (nc, nq, d)."""
    origins = cells_multi * mesh.h
    return origins[:, None, :] + tables.qpts_local[None, :, :]


# ---------------------------------------------------------------------------
# fields and coefficients
# ---------------------------------------------------------------------------

@dataclass
class ScalarField:
    """A finite element function given by its free-DOF coefficients.

    If ``periodic_extension_x`` is set, evaluation reduces the first p
    coordinates modulo the field's own x-length before point location, which
    realizes the periodic extension of a unit-cell function to a larger box.
    """

    mesh: Mesh
    dofmap: DofMap
    coeffs: np.ndarray = field(repr=False)
    periodic_extension_x: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.dofmap.n_free,):
            raise ConfigurationError("coefficient vector length != n_free")

    def node_values(self):
        """Values on the full node lattice (eliminated nodes -> 0)."""
        dof = self.dofmap.node_to_dof
        out = np.zeros(self.mesh.n_nodes)
        mask = dof >= 0
        out[mask] = self.coeffs[dof[mask]]
        return out

    def __call__(self, points):
        return self.eval(points)

    def eval(self, points):
        """Evaluate at arbitrary points, shape (n, d) -> (n,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        mesh = self.mesh
        lengths = mesh.domain.lengths
        if self.periodic_extension_x and mesh.domain.p:
            p = mesh.domain.p
            pts[:, :p] = np.mod(pts[:, :p], lengths[:p])
        h = mesh.h
        cells = np.minimum(
            np.floor(pts / h).astype(np.int64),
            np.asarray(mesh.cells_per_dir) - 1,
        )
        cells = np.maximum(cells, 0)
        xi = pts / h - cells

        order = mesh.order
        offsets = _local_offsets(order, mesh.dim)
        vals = np.ones((pts.shape[0], offsets.shape[0]))
        for k in range(mesh.dim):
            v1, _ = _shape_1d(order, xi[:, k])
            vals *= v1[:, offsets[:, k]]
        node_ids = _cell_node_ids(mesh, cells, offsets)
        nv = self.node_values()
        return np.einsum("ni,ni->n", vals, nv[node_ids])


def interpolate(mesh, dofmap, fn):
    """Nodal interpolation of a closure onto the free DOFs."""
    coords = mesh.node_coords(dofmap.free_nodes)
    return ScalarField(mesh, dofmap, np.asarray(fn(coords), dtype=float))


@dataclass
class CoefficientSpec:
    """Weight rho and potential V of the prototype problem.

    rho: constant, closure over (n, d) points, or a ScalarField (which is
    squared at quadrature points).  V: constant, closure, or an object with
    an ``eval_potential``-compatible __call__ (see potentials module).
    """

    rho: object = 1.0
    V: object = 0.0

    def rho_at(self, pts):
        vals = _eval_coeff(self.rho, pts, square_fields=True)
        if not np.all(np.isfinite(vals)):
            raise DataError("non-finite weight value at a quadrature point")
        if np.any(vals < 0):
            raise DataError("negative weight value at a quadrature point")
        return vals

    def v_at(self, pts):
        vals = _eval_coeff(self.V, pts, square_fields=False)
        if not np.all(np.isfinite(vals)):
            raise DataError("non-finite potential value at a quadrature point")
        return vals


def _eval_coeff(c, pts, square_fields):
    if isinstance(c, ScalarField):
        vals = c.eval(pts)
        return vals * vals if square_fields else vals
    if callable(c):
        return np.asarray(c(pts), dtype=float).reshape(pts.shape[0])
    return np.full(pts.shape[0], float(c))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

class _CooAccumulator:
    """Accumulates COO triplets, collapsing to CSR in blocks to bound memory."""

    def __init__(self, n, flush_at=8_000_000):
        self.n = n
        self.flush_at = flush_at
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0
        self.acc = None

    def add(self, rows, cols, vals):
        self.rows.append(rows)
        self.cols.append(cols)
        self.vals.append(vals)
        self.count += rows.size
        if self.count >= self.flush_at:
            self._flush()

    def _flush(self):
        if not self.rows:
            return
        m = sp.coo_matrix(
            (np.concatenate(self.vals),
             (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=(self.n, self.n),
        ).tocsr()
        self.acc = m if self.acc is None else self.acc + m
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0

    def result(self):
        self._flush()
        if self.acc is None:
            self.acc = sp.csr_matrix((self.n, self.n))
        self.acc.sum_duplicates()
        self.acc.sort_indices()
        return self.acc


def _chunks(n, size):
    for start in range(0, n, size):
        yield start, min(n, start + size)


def assemble_pencil(mesh, dofmap, coeff, diffusion=None):
    """Assemble the reduced symmetric pencil (A, B) over active cells."""
    tables = ReferenceTables(mesh, diffusion=diffusion)
    cells = mesh.active_cell_indices()
    nloc = tables.N.shape[1]
    n = dofmap.n_free

    accA = _CooAccumulator(n)
    accB = _CooAccumulator(n)
    chunk = max(64, min(20000, 2_000_000 // (nloc * nloc)))
    for lo, hi in _chunks(cells.shape[0], chunk):
        cm = cells[lo:hi]
        pts = _quad_coords(mesh, cm, tables).reshape(-1, mesh.dim)
        rho = coeff.rho_at(pts).reshape(hi - lo, -1)
        V = coeff.v_at(pts).reshape(hi - lo, -1)
        Ae, Be = _kern.element_matrices(tables.w, rho, V, tables.PG, tables.NN)

        node_ids = _cell_node_ids(mesh, cm, tables.offsets)
        dofs = dofmap.node_to_dof[node_ids]  # (nc, nloc)
        rows = np.repeat(dofs, nloc, axis=1).ravel()
        cols = np.tile(dofs, (1, nloc)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        accA.add(rows[keep], cols[keep], Ae.reshape(-1)[keep])
        accB.add(rows[keep], cols[keep], Be.reshape(-1)[keep])

    return SparseMatrix(accA.result()), SparseMatrix(accB.result())


def assemble_corrector_system(mesh, dofmap, rho, direction):
    """Weighted-stiffness system K theta = f of the cell corrector problem.

    ``direction`` is a 0-based expanding-direction index i < p; the weak RHS
    is f_j = -integral rho e_i . grad(v_j).  Raises if the RHS is not
    orthogonal to the constant vector (inconsistent singular system).
    """
    p = mesh.domain.p
    if not 0 <= direction < p:
        raise ConfigurationError(
            f"corrector direction {direction} out of range for p={p}"
        )
    coeff = CoefficientSpec(rho=rho, V=0.0)
    tables = ReferenceTables(mesh)
    cells = mesh.active_cell_indices()
    nloc = tables.N.shape[1]
    n = dofmap.n_free

    accK = _CooAccumulator(n)
    f = np.zeros(n)
    chunk = max(64, min(20000, 2_000_000 // (nloc * nloc)))
    for lo, hi in _chunks(cells.shape[0], chunk):
        cm = cells[lo:hi]
        pts = _quad_coords(mesh, cm, tables).reshape(-1, mesh.dim)
        rho_q = coeff.rho_at(pts).reshape(hi - lo, -1)
        zeros = np.zeros_like(rho_q)
        Ke, _ = _kern.element_matrices(tables.w, rho_q, zeros, tables.PG, tables.NN)
        fe = -(rho_q * tables.w) @ tables.G[:, :, direction]  # (nc, nloc)

        node_ids = _cell_node_ids(mesh, cm, tables.offsets)
        dofs = dofmap.node_to_dof[node_ids]
        rows = np.repeat(dofs, nloc, axis=1).ravel()
        cols = np.tile(dofs, (1, nloc)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        accK.add(rows[keep], cols[keep], Ke.reshape(-1)[keep])
        fk = dofs.ravel()
        good = fk >= 0
        np.add.at(f, fk[good], fe.ravel()[good])

    tol = 1e-9
    drift = abs(f.sum())
    if drift > tol * max(1.0, np.linalg.norm(f)):
        raise InconsistentSystemError(
            f"corrector RHS not orthogonal to constants (|1^T f| = {drift:.3e})"
        )
    return SparseMatrix(accK.result()), f


# ---------------------------------------------------------------------------
# field utilities
# ---------------------------------------------------------------------------

def _values_at_quadrature(field_, tables, cells, node_ids):
    nv = field_.node_values()
    return nv[node_ids] @ tables.N.T  # (nc, nq)


def field_norms(u, v, rho=1.0):
    """Quadrature-evaluated (||u - v||, ||u - v|| / ||v||, <u, v>) with
    weight rho over the active cells."""
    if u.mesh is not v.mesh or u.dofmap is not v.dofmap:
        if u.mesh.node_shape != v.mesh.node_shape or u.mesh.order != v.mesh.order:
            raise ConfigurationError("field_norms requires matching meshes")
    tables = ReferenceTables(u.mesh)
    cells = u.mesh.active_cell_indices()
    err2 = 0.0
    v2 = 0.0
    inner = 0.0
    chunk = 20000
    for lo, hi in _chunks(cells.shape[0], chunk):
        cm = cells[lo:hi]
        node_ids = _cell_node_ids(u.mesh, cm, tables.offsets)
        pts = _quad_coords(u.mesh, cm, tables).reshape(-1, u.mesh.dim)
        rho_q = _eval_coeff(rho, pts, square_fields=True).reshape(hi - lo, -1)
        uq = _values_at_quadrature(u, tables, cm, node_ids)
        vq = _values_at_quadrature(v, tables, cm, node_ids)
        wq = tables.w * rho_q
        err2 += float(np.sum(wq * (uq - vq) ** 2))
        v2 += float(np.sum(wq * vq**2))
        inner += float(np.sum(wq * uq * vq))
    err = np.sqrt(err2)
    rel = err / np.sqrt(v2) if v2 > 0 else np.inf
    return err, rel, inner


def gradients_at_quadrature(field_, tables, cells_multi):
    """Field gradients at the quadrature points of the given cells,
    shape (nc, nq, d)."""
    node_ids = _cell_node_ids(field_.mesh, cells_multi, tables.offsets)
    nv = field_.node_values()
    return np.einsum("ci,qid->cqd", nv[node_ids], tables.G)
