# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled element-matrix accumulation kernel.

Computes batched element stiffness/mass contributions from precomputed
reference tables.  The numpy fallback in _kernels_py.py implements the same
contract; assembly picks whichever imported.

The stiffness contraction over quadrature points is a matrix product, so the
kernel folds the weights into the reference tables once, stacks the two
coefficient blocks, and issues a single fused GEMM for the stiffness part
(plus one for the mass part) instead of three separate products and an
elementwise add.
"""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _matmul(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C) nogil:
    """C = A @ B for C-contiguous arrays, via column-major BLAS on the
    transposed identity (A @ B)^T = B^T A^T."""
    cdef int m = A.shape[0], k = A.shape[1], n = B.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, &B[0, 0], &n, &A[0, 0], &k,
          &zero, &C[0, 0], &n)


def element_matrices(double[::1] w,
                     double[:, ::1] rho,
                     double[:, ::1] V,
                     double[:, :, ::1] PG,
                     double[:, :, ::1] NN):
    """Batched element matrices.

    w:   (nq,) quadrature weights including the cell volume factor
    rho: (nc, nq) weight values at quadrature points
    V:   (nc, nq) potential values at quadrature points
    PG:  (nq, nloc, nloc) gradient-pair table  G_i . D . G_j  per point
    NN:  (nq, nloc, nloc) shape-pair table  N_i N_j  per point

    Returns (Ae, Be) with shape (nc, nloc, nloc):
      Ae[c] = sum_q w[q] (rho[c,q] PG[q] + V[c,q] NN[q])
      Be[c] = sum_q w[q]  rho[c,q] NN[q]
    """
    cdef Py_ssize_t nc = rho.shape[0]
    cdef Py_ssize_t nq = rho.shape[1]
    cdef Py_ssize_t nloc = PG.shape[1]
    cdef Py_ssize_t npair = nloc * nloc
    cdef Py_ssize_t c, q, k

    # weighted reference tables, stacked [w*PG; w*NN] for the fused product
    cdef cnp.ndarray[double, ndim=2] tables = np.empty((2 * nq, npair))
    pg = np.asarray(PG).reshape(nq, npair)
    nn = np.asarray(NN).reshape(nq, npair)
    wcol = np.asarray(w)[:, None]
    tables[:nq] = wcol * pg
    tables[nq:] = wcol * nn

    # stacked coefficients [rho | V] so the stiffness needs one GEMM
    cdef cnp.ndarray[double, ndim=2] coeffs = np.empty((nc, 2 * nq))
    cdef double[:, ::1] cv = coeffs
    with nogil:
        for c in range(nc):
            for q in range(nq):
                cv[c, q] = rho[c, q]
                cv[c, nq + q] = V[c, q]

    cdef cnp.ndarray[double, ndim=2] Ae = np.empty((nc, npair))
    cdef cnp.ndarray[double, ndim=2] Be = np.empty((nc, npair))
    cdef double[:, ::1] av = Ae
    cdef double[:, ::1] bv = Be
    cdef double[:, ::1] rv = rho
    cdef double[:, ::1] full = tables
    cdef double[:, ::1] mass = tables[nq:]
    with nogil:
        _matmul(cv, full, av)
        _matmul(rv, mass, bv)
    return Ae.reshape(nc, nloc, nloc), Be.reshape(nc, nloc, nloc)
