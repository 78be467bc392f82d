"""Shared fixtures and small problem builders for the test suite."""

import numpy as np
import pytest
import scipy.sparse as sp

from pseig import (
    BoundarySpec,
    CoefficientSpec,
    DomainSpec,
    SparseMatrix,
    assemble_pencil,
    build_box_mesh,
    build_dof_map,
)


def to_sparse(dense):
    """Wrap a dense symmetric array as a SparseMatrix."""
    return SparseMatrix(sp.csr_matrix(np.asarray(dense, dtype=float)))


def diag_sparse(values):
    return to_sparse(np.diag(np.asarray(values, dtype=float)))


def laplace_pencil(cells=(9, 9), L=1.0, order=1, bc=None, potential=None):
    """Assemble the pencil of -Laplace (+V) on (0,L) x (0,1)."""
    dom = DomainSpec(p=1, q=1, L=L)
    mesh = build_box_mesh(dom, cells, order)
    dm = build_dof_map(mesh, bc or BoundarySpec())
    A, B = assemble_pencil(
        mesh, dm, CoefficientSpec(V=potential if potential is not None else 0.0)
    )
    return mesh, dm, A, B


def random_spd_pencil(n, seed=0, b_identity=False):
    """Random dense SPD pencil (A, B) wrapped as SparseMatrix."""
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    A = Q @ Q.T + n * np.eye(n)
    if b_identity:
        B = np.eye(n)
    else:
        R = rng.standard_normal((n, n))
        B = R @ R.T + n * np.eye(n)
    return to_sparse(A), to_sparse(B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
