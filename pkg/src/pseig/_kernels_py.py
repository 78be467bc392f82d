"""Pure-numpy fallback for the compiled element-matrix kernel.

Same contract as _kernels.pyx; the batched accumulation is phrased as two
matrix products so it stays BLAS-bound.
"""

import numpy as np


def element_matrices(w, rho, V, PG, NN):
    nq, nloc, _ = PG.shape
    nc = rho.shape[0]
    pg = PG.reshape(nq, nloc * nloc)
    nn = NN.reshape(nq, nloc * nloc)
    Ae = (rho * w) @ pg + (V * w) @ nn
    Be = (rho * w) @ nn
    return Ae.reshape(nc, nloc, nloc), Be.reshape(nc, nloc, nloc)
