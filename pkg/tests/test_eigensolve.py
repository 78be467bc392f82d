"""Shifted inverse power, LOPCG, and deflation."""

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from pseig import (
    SolverConfig,
    deflated_smallest_k,
    inverse_power,
    lopcg,
    rayleigh_quotient,
)
from pseig.errors import DataError

from conftest import diag_sparse, laplace_pencil, random_spd_pencil, to_sparse


def _dense_pair(A, B, k=0):
    vals, vecs = scipy.linalg.eigh(A.toarray(), B.toarray())
    return vals[k], vecs[:, k]


class TestRayleighQuotient:
    def test_identity(self):
        I2 = diag_sparse([1.0, 1.0])
        assert rayleigh_quotient(I2, I2, np.array([2.0, -1.0])) == 1.0

    def test_axis_vector(self):
        A = diag_sparse([1.0, 2.0])
        B = diag_sparse([1.0, 1.0])
        assert rayleigh_quotient(A, B, np.array([0.0, 1.0])) == 2.0

    def test_mixed_weights(self):
        A = diag_sparse([1.0, 2.0])
        B = diag_sparse([2.0, 1.0])
        assert rayleigh_quotient(A, B, np.array([1.0, 1.0])) == 1.0

    def test_nonpositive_b_energy_rejected(self):
        A = diag_sparse([1.0, 2.0])
        B = diag_sparse([1.0, -2.0])
        with pytest.raises(DataError):
            rayleigh_quotient(A, B, np.array([0.0, 1.0]))


class TestInversePower:
    def test_diag_ground_state(self):
        A = diag_sparse([1.0, 2.0, 3.0])
        B = diag_sparse([1.0, 1.0, 1.0])
        res = inverse_power(A, B, SolverConfig(sigma=0.0, tol=1e-10))
        assert res.converged
        assert res.value == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(np.abs(res.vector), [1.0, 0.0, 0.0], atol=1e-6)

    def test_better_shift_fewer_iterations(self):
        A = diag_sparse([1.0, 2.0, 3.0])
        B = diag_sparse([1.0, 1.0, 1.0])
        slow = inverse_power(A, B, SolverConfig(sigma=0.0, tol=1e-10))
        fast = inverse_power(A, B, SolverConfig(sigma=0.9, tol=1e-10))
        assert fast.converged and slow.converged
        assert fast.iterations < slow.iterations

    def test_laplace_matches_dense_oracle(self):
        mesh, dm, A, B = laplace_pencil(cells=(20, 20))
        res = inverse_power(A, B, SolverConfig(sigma=0.0, tol=1e-10, k_max=500))
        lam, vec = _dense_pair(A, B)
        assert res.converged
        assert abs(res.value - lam) <= 1e-8
        assert abs(res.value - 2 * math.pi ** 2) / (2 * math.pi ** 2) < 0.01

    def test_b_normalized_on_return(self):
        A, B = random_spd_pencil(30, seed=5)
        res = inverse_power(A, B, SolverConfig(sigma=0.0, tol=1e-10))
        assert abs(res.vector @ (B @ res.vector) - 1.0) <= 1e-10

    def test_stagnation_reports_history(self):
        mesh, dm, A, B = laplace_pencil(cells=(20, 20))
        res = inverse_power(A, B, SolverConfig(sigma=0.0, tol=1e-14, k_max=3))
        assert not res.converged
        assert res.iterations == 3
        assert len(res.residual_history) == 3

    def test_convergence_factor_law(self):
        # residual contraction of IP approaches |lam1 - sigma| / |lam2 - sigma|
        lams = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        A = diag_sparse(lams)
        B = diag_sparse(np.ones(5))
        for sigma, factor in ((0.0, 0.5), (0.5, 1.0 / 3.0)):
            cfg = SolverConfig(
                sigma=sigma, tol=1e-13, k_max=200,
                x0=np.ones(5) + 0.1 * np.arange(5),
            )
            res = inverse_power(A, B, cfg)
            hist = np.asarray(res.residual_history)
            # use the last 5 contraction steps above the rounding floor
            usable = np.flatnonzero(hist > 1e-11)
            ratios = hist[usable[-5:]] / hist[usable[-5:] - 1]
            mean = np.exp(np.mean(np.log(ratios)))
            assert abs(mean - factor) <= 0.1 * factor


class TestLopcg:
    def test_first_step_exact_when_answer_in_basis(self):
        # x_{-1} = e1 is the exact ground eigenvector, so the very first
        # Rayleigh-Ritz step over span{x0, w1, e1} is exact
        A = diag_sparse([1.0, 2.0, 3.0])
        B = diag_sparse([1.0, 1.0, 1.0])
        res = lopcg(A, B, SolverConfig(sigma=0.0, tol=1e-10))
        assert res.converged
        assert res.iterations == 1
        assert res.value == pytest.approx(1.0, abs=1e-12)

    def test_generic_start_converges_fast(self):
        A = diag_sparse([1.0, 2.0, 3.0])
        B = diag_sparse([1.0, 1.0, 1.0])
        cfg = SolverConfig(sigma=0.0, tol=1e-10,
                           x0=np.array([0.0, 1.0, 1.0]))
        res = lopcg(A, B, cfg)
        assert res.converged
        assert res.iterations <= 5
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_matches_dense_oracle_weighted(self):
        mesh, dm, A, B = laplace_pencil(
            cells=(9, 9), potential=lambda p: 10.0 * p[:, 1] ** 2
        )
        res = lopcg(A, B, SolverConfig(sigma=0.0, tol=1e-11))
        lam, vec = _dense_pair(A, B)
        assert abs(res.value - lam) <= 1e-8

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_rayleigh_monotone(self, seed):
        A, B = random_spd_pencil(25, seed=seed)
        res = lopcg(A, B, SolverConfig(sigma=0.0, tol=1e-12, k_max=60))
        hist = np.asarray(res.rayleigh_history)
        assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]) + 1e-12)

    def test_sign_convention(self):
        A, B = random_spd_pencil(25, seed=2)
        res = lopcg(A, B, SolverConfig(sigma=0.0, tol=1e-11))
        assert res.vector[np.argmax(np.abs(res.vector))] > 0

    def test_ordering_preserved_across_shifts(self):
        # converging with sigma = 0 and with a near-optimal shift yields the
        # same smallest eigenpair (the shift does not reorder the spectrum)
        mesh, dm, A, B = laplace_pencil(cells=(12, 12))
        lam1 = _dense_pair(A, B)[0]
        r0 = lopcg(A, B, SolverConfig(sigma=0.0, tol=1e-11))
        r1 = lopcg(A, B, SolverConfig(sigma=0.95 * lam1, tol=1e-11))
        assert abs(r0.value - r1.value) <= 1e-8
        assert np.linalg.norm(r0.vector - r1.vector) <= 1e-6


class TestDeflation:
    def test_diag_full_spectrum(self):
        A = diag_sparse([1.0, 2.0, 3.0])
        B = diag_sparse([1.0, 1.0, 1.0])
        results = deflated_smallest_k(A, B, SolverConfig(sigma=0.0, tol=1e-10), 3)
        vals = [r.value for r in results]
        assert np.allclose(vals, [1.0, 2.0, 3.0], atol=1e-9)
        for k, r in enumerate(results):
            assert np.argmax(np.abs(r.vector)) == k

    def test_laplace_degenerate_pair(self):
        mesh, dm, A, B = laplace_pencil(cells=(14, 14))
        results = deflated_smallest_k(A, B, SolverConfig(sigma=0.0, tol=1e-10), 3)
        vals = np.array([r.value for r in results])
        exact = np.array([2.0, 5.0, 5.0]) * math.pi ** 2
        assert np.all(np.abs(vals - exact) / exact < 0.02)
        # the degenerate pair spans the same 2D eigenspace as the dense oracle
        dvals, dvecs = scipy.linalg.eigh(A.toarray(), B.toarray())
        Bd = B.toarray()
        span = dvecs[:, 1:3]
        for r in results[1:]:
            proj = span @ (span.T @ (Bd @ r.vector))
            assert np.linalg.norm(proj - r.vector) <= 1e-6

    def test_pairwise_b_orthogonality(self):
        A, B = random_spd_pencil(40, seed=9)
        results = deflated_smallest_k(A, B, SolverConfig(sigma=0.0, tol=1e-11), 4)
        for i in range(4):
            for j in range(i):
                ip = results[i].vector @ (B @ results[j].vector)
                assert abs(ip) <= 1e-8

    def test_matches_dense_oracle_m4(self):
        mesh, dm, A, B = laplace_pencil(
            cells=(9, 9), potential=lambda p: 50.0 * np.sin(np.pi * p[:, 0]) ** 2
        )
        results = deflated_smallest_k(
            A, B, SolverConfig(sigma=0.0, tol=1e-10, k_max=200), 4
        )
        dvals = scipy.linalg.eigh(A.toarray(), B.toarray(), eigvals_only=True)
        got = np.array([r.value for r in results])
        assert np.max(np.abs(got - dvals[:4])) <= 1e-7

    def test_stagnating_subrun_gives_partial_list(self):
        mesh, dm, A, B = laplace_pencil(cells=(12, 12))
        results = deflated_smallest_k(
            A, B, SolverConfig(sigma=0.0, tol=1e-14, k_max=2), 4
        )
        assert len(results) < 4
        assert not results[-1].converged

    def test_values_ascending(self):
        A, B = random_spd_pencil(30, seed=11)
        results = deflated_smallest_k(A, B, SolverConfig(sigma=0.0, tol=1e-10), 3)
        vals = [r.value for r in results]
        assert vals == sorted(vals)
