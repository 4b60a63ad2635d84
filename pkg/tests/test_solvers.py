"""Conjugate gradient, proximal operators, power iteration, and ISTA.

Proximal operators are compared against brute-force one-dimensional searches
(ternary search on the convex prox objective — no closed forms reused), CG
against dense direct solves.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiecho import (
    InvalidArgumentError,
    NumericalFailureError,
    conjugate_gradient,
    ista_entrywise,
    ista_row_sparse,
    power_iteration,
    row_soft_threshold,
    soft_threshold,
)


def bisect_root(g, lo, hi, iters=200):
    """Root of a nondecreasing function by sign bisection (handles jumps)."""
    if g(lo) >= 0:
        return lo
    if g(hi) <= 0:
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def row_prox_oracle(v: np.ndarray, tau: float) -> np.ndarray:
    """Brute-force prox of ``tau * ||.||_2`` at ``v``.

    The minimizer of ``f(z) = 0.5 ||z - v||^2 + tau ||z||`` is colinear with
    ``v`` (an orthogonal component increases both terms), so with ``z = t v``
    it reduces to the convex scalar problem
    ``g(t) = 0.5 (t-1)^2 r^2 + tau t r`` with ``r = ||v||``, solved by
    bisection on the derivative ``g'(t) = (t-1) r^2 + tau r`` over [0, 1].
    """
    r = np.linalg.norm(v)
    if r == 0.0:
        return np.zeros_like(v)
    t = bisect_root(lambda t: (t - 1.0) * r * r + tau * r, 0.0, 1.0)
    return t * v


def entry_prox_oracle(v: float, tau: float) -> float:
    """Brute-force prox of ``tau * |.|`` at scalar ``v``.

    Bisection on the (monotone, jumping at 0) subgradient
    ``z - v + tau * sign(z)``; the jump at the kink makes 0 the root exactly
    when ``|v| <= tau``.
    """
    return bisect_root(
        lambda z: z - v + tau * np.sign(z), -abs(v) - tau - 1.0, abs(v) + tau + 1.0
    )


class TestRowSoftThreshold:
    def test_against_oracle_1000_rows(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            dim = int(rng.integers(1, 6))
            v = rng.normal(size=dim) * rng.choice([0.1, 1.0, 10.0])
            tau = float(rng.uniform(0, 2.0 * max(np.linalg.norm(v), 0.1)))
            got = row_soft_threshold(v[None, :], tau)[0]
            want = row_prox_oracle(v, tau)
            assert np.linalg.norm(got - want) <= 1e-8, (v, tau)

    def test_exact_zero_below_threshold(self):
        v = np.array([[0.3, 0.4]])  # norm 0.5
        out = row_soft_threshold(v, 0.5)
        assert np.all(out == 0.0)
        out = row_soft_threshold(v, 0.5000001)
        assert np.all(out == 0.0)

    def test_batched_3d_matches_per_matrix(self, rng):
        M = rng.normal(size=(5, 4, 3))
        whole = row_soft_threshold(M, 0.7)
        for i in range(5):
            assert np.allclose(whole[i], row_soft_threshold(M[i], 0.7), atol=1e-14)

    def test_rejects_bad_tau(self, rng):
        with pytest.raises(InvalidArgumentError):
            row_soft_threshold(rng.normal(size=(2, 2)), -0.1)
        with pytest.raises(InvalidArgumentError):
            row_soft_threshold(rng.normal(size=(2, 2)), np.nan)

    def test_tau_zero_is_identity(self, rng):
        M = rng.normal(size=(3, 4))
        assert np.array_equal(row_soft_threshold(M, 0.0), M)

    @given(st.integers(min_value=0, max_value=2**31 - 1),
           st.floats(min_value=0, max_value=5, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_shrinks_norm_keeps_direction(self, seed, tau):
        v = np.random.default_rng(seed).normal(size=4)
        out = row_soft_threshold(v[None, :], tau)[0]
        r = np.linalg.norm(v)
        assert np.linalg.norm(out) == pytest.approx(max(0.0, r - tau), abs=1e-12)
        if np.linalg.norm(out) > 0:
            cos = np.dot(out, v) / (np.linalg.norm(out) * r)
            assert cos == pytest.approx(1.0, abs=1e-12)


class TestSoftThreshold:
    def test_against_oracle_1000_entries(self):
        rng = np.random.default_rng(43)
        v = rng.normal(size=1000) * 3
        taus = rng.uniform(0, 2, size=1000)
        got = soft_threshold(v, 0.0)
        assert np.array_equal(got, v)
        for vi, ti in zip(v, taus):
            got = soft_threshold(np.array([vi]), ti)[0]
            want = entry_prox_oracle(vi, ti)
            assert abs(got - want) <= 1e-8

    def test_known_values(self):
        v = np.array([3.0, -3.0, 0.5, -0.5, 0.0])
        out = soft_threshold(v, 1.0)
        assert out.tolist() == [2.0, -2.0, 0.0, 0.0, 0.0]


class TestConjugateGradient:
    def test_matches_dense_solve(self, rng):
        B = rng.normal(size=(30, 30))
        A = B.T @ B + np.eye(30)
        b = rng.normal(size=30)
        want = np.linalg.solve(A, b)
        got, iters, res = conjugate_gradient(A, b, tol=1e-12, max_iters=300)
        assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)

    def test_exact_convergence_in_n_iters(self, rng):
        n = 12
        B = rng.normal(size=(n, n))
        A = B.T @ B + 0.5 * np.eye(n)
        b = rng.normal(size=n)
        x, iters, res = conjugate_gradient(A, b, tol=1e-10, max_iters=200)
        assert iters <= n + 5
        assert res <= 1e-10 * np.linalg.norm(b)

    def test_diagonal_example(self):
        A = np.diag([1.0, 2.0, 4.0])
        b = np.array([1.0, 2.0, 4.0])
        x, _, _ = conjugate_gradient(A, b, tol=1e-12, max_iters=10)
        assert np.allclose(x, [1.0, 1.0, 1.0], atol=1e-10)

    def test_zero_rhs_returns_zero_immediately(self):
        x, iters, res = conjugate_gradient(np.eye(3), np.zeros(3))
        assert np.array_equal(x, np.zeros(3))
        assert iters == 0 and res == 0.0

    def test_warm_start_at_solution(self, rng):
        A = np.diag([1.0, 3.0])
        b = np.array([2.0, 6.0])
        x, iters, _ = conjugate_gradient(A, b, x0=np.array([2.0, 2.0]), tol=1e-12)
        assert iters == 0
        assert np.allclose(x, [2.0, 2.0])

    def test_matrix_free_callable(self, rng):
        d = np.array([1.0, 2.0, 3.0, 4.0])
        x, _, _ = conjugate_gradient(lambda v: d * v, np.ones(4), tol=1e-12)
        assert np.allclose(x, 1.0 / d, atol=1e-10)

    def test_nd_unknown_shapes(self, rng):
        # operates on 2-D unknowns too (image planes)
        x0 = rng.normal(size=(6, 5))
        x, _, _ = conjugate_gradient(lambda v: 2.0 * v, 2.0 * x0, tol=1e-14)
        assert np.allclose(x, x0, atol=1e-10)

    def test_non_finite_raises_with_iteration(self):
        def bad_op(v):
            return np.full_like(v, np.nan)

        with pytest.raises(NumericalFailureError, match="at iteration"):
            conjugate_gradient(bad_op, np.ones(3))


class TestPowerIteration:
    def test_diagonal_example(self):
        assert power_iteration(np.diag([1.0, 5.0, 2.0]), 3) == pytest.approx(5.0, rel=1e-4)

    def test_matches_eigh_on_random_psd(self, rng):
        B = rng.normal(size=(9, 9))
        A = B @ B.T
        want = float(np.linalg.eigvalsh(A)[-1])
        assert power_iteration(A, 9) == pytest.approx(want, rel=1e-4)

    def test_callable_matches_matrix(self, rng):
        B = rng.normal(size=(6, 6))
        A = B @ B.T
        assert power_iteration(lambda v: A @ v, 6) == pytest.approx(
            power_iteration(A, 6), rel=1e-10
        )

    def test_zero_operator(self):
        assert power_iteration(np.zeros((4, 4)), 4) == 0.0


class TestIsta:
    def test_identity_dictionary_fixed_point(self, rng):
        # With D = I the row-lasso minimizer is the exact row prox at lam/2.
        X = rng.normal(size=(6, 3))
        lam = 0.8
        Z = ista_row_sparse(np.eye(6), X, lam, iters=3000, rel_tol=0.0)
        want = row_soft_threshold(X, lam / 2.0)
        assert np.linalg.norm(Z - want) <= 1e-5

    def test_identity_dictionary_entrywise(self, rng):
        X = rng.normal(size=(5, 2))
        lam = 0.6
        Z = ista_entrywise(np.eye(5), X, lam, iters=3000, rel_tol=0.0)
        want = soft_threshold(X, lam / 2.0)
        assert np.linalg.norm(Z - want) <= 1e-5

    def test_objective_descends(self, rng):
        D = rng.normal(size=(8, 12))
        X = rng.normal(size=(8, 4))
        Z, history = ista_row_sparse(D, X, 0.5, iters=50, rel_tol=0.0,
                                     track_objective=True)
        assert len(history) == 51  # initial objective plus one entry per step
        for a, b in zip(history, history[1:]):
            assert b <= a + 1e-10 * max(abs(a), 1.0)

    def test_fixed_point_is_stationary(self, rng):
        # Run long, then verify the first-order optimality conditions of
        # min ||X - D Z||_F^2 + lam * sum_rows ||Z_row||.
        D = rng.normal(size=(6, 9))
        X = rng.normal(size=(6, 3))
        lam = 1.0
        Z = ista_row_sparse(D, X, lam, iters=6000, rel_tol=0.0)
        G = 2.0 * D.T @ (D @ Z - X)  # gradient of the fit term
        for j in range(9):
            if np.linalg.norm(Z[j]) > 1e-9:
                want = -lam * Z[j] / np.linalg.norm(Z[j])
                assert np.linalg.norm(G[j] - want) <= 1e-4
            else:
                assert np.linalg.norm(G[j]) <= lam + 1e-4

    def test_batched_3d_matches_loop(self, rng):
        D = rng.normal(size=(5, 7))
        X = rng.normal(size=(4, 5, 2))
        batched = ista_row_sparse(D, X, 0.3, iters=40)
        for i in range(4):
            single = ista_row_sparse(D, X[i], 0.3, iters=40)
            assert np.allclose(batched[i], single, atol=1e-12)

    def test_warm_start_used(self, rng):
        # With D = I the exact minimizer is a fixed point of the iteration:
        # one warm-started step from it must not move (a cold start would).
        X = rng.normal(size=(5, 2)) + 1.0
        lam = 0.4
        Z_star = row_soft_threshold(X, lam / 2.0)
        Z_restart = ista_row_sparse(np.eye(5), X, lam, Z0=Z_star, iters=1)
        assert np.linalg.norm(Z_restart - Z_star) <= 1e-12
        Z_cold = ista_row_sparse(np.eye(5), X, lam, iters=1)
        assert np.linalg.norm(Z_cold - Z_star) > 1e-3

    def test_lam_zero_reduces_to_least_squares_direction(self, rng):
        D = rng.normal(size=(6, 4))  # overdetermined, unique LS solution
        X = rng.normal(size=(6, 2))
        Z = ista_row_sparse(D, X, 0.0, iters=4000, rel_tol=0.0)
        want = np.linalg.lstsq(D, X, rcond=None)[0]
        assert np.linalg.norm(Z - want) <= 1e-6

    def test_zero_dictionary_rejected(self):
        with pytest.raises(InvalidArgumentError, match="zero spectral norm"):
            ista_row_sparse(np.zeros((4, 4)), np.ones((4, 2)), 0.1)
