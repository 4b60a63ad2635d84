"""Numerical workhorses: conjugate gradient, proximal maps, ISTA.

Operators are plain callables on ndarrays (any shape); inner products flatten.
The proximal maps treat the *last* axis as the row direction, so a stack of
coefficient matrices ``(locations, atoms, echoes)`` thresholds every atom-row
of every location in one call.
"""

from __future__ import annotations

from typing import Callable, Union

import numpy as np

from .core import Dictionary, InvalidArgumentError, NumericalFailureError

__all__ = [
    "conjugate_gradient",
    "row_soft_threshold",
    "soft_threshold",
    "power_iteration",
    "ista_row_sparse",
    "ista_entrywise",
]


def conjugate_gradient(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    x0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iters: int = 100,
) -> tuple[np.ndarray, int, float]:
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    Parameters
    ----------
    apply_A : callable
        Matrix-free application of ``A``; must preserve the shape of ``b``.
    b : ndarray
        Right-hand side (any shape; inner products flatten).
    x0 : ndarray, optional
        Warm start.  CG monotonically decreases the quadratic
        ``x^T A x / 2 - b^T x`` from here, which the outer engines rely on.
    tol : float
        Terminate once ``||b - A x|| <= tol * ||b||``.

    Returns
    -------
    (x, iters, residual_norm)
    """
    if not callable(apply_A):
        apply_A = (lambda v, _m=np.asarray(apply_A, dtype=np.float64): _m @ v)
    b = np.asarray(b, dtype=np.float64)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply_A(x)
    p = r.copy()
    rs = float(np.vdot(r, r))
    if np.sqrt(rs) <= tol * b_norm:
        return x, 0, float(np.sqrt(rs))
    for k in range(1, max_iters + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap))
        if not np.isfinite(pAp):
            raise NumericalFailureError(f"conjugate gradient broke down at iteration {k}")
        if pAp <= 0.0:
            break  # p is in the (numerical) null space; current x is optimal there
        alpha = rs / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rs_new = float(np.vdot(r, r))
        if not np.isfinite(rs_new):
            raise NumericalFailureError(f"non-finite residual at iteration {k}")
        if np.sqrt(rs_new) <= tol * b_norm:
            return x, k, float(np.sqrt(rs_new))
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, max_iters, float(np.sqrt(rs))


def row_soft_threshold(M: np.ndarray, tau: float) -> np.ndarray:
    """Group shrinkage of the rows of ``M`` (rows run along the last axis).

    Each row ``m`` maps to ``max(0, 1 - tau/||m||) * m`` — the proximal map of
    ``tau * sum_of_row_norms`` — so rows with norm below ``tau`` become exactly
    zero and the rest keep their direction.  Leading axes are batched.
    """
    if not np.isfinite(tau) or tau < 0:
        raise InvalidArgumentError(f"threshold must be finite and >= 0, got {tau}")
    arr = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("row_soft_threshold input contains non-finite entries")
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    scale = np.maximum(0.0, 1.0 - tau / np.where(norms > 0, norms, 1.0))
    return arr * scale


def soft_threshold(M: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise shrinkage ``sign(m) * max(|m| - tau, 0)`` (prox of ``tau * l1``)."""
    if not np.isfinite(tau) or tau < 0:
        raise InvalidArgumentError(f"threshold must be finite and >= 0, got {tau}")
    arr = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("soft_threshold input contains non-finite entries")
    return np.sign(arr) * np.maximum(np.abs(arr) - tau, 0.0)


def power_iteration(
    G: Union[np.ndarray, Callable[[np.ndarray], np.ndarray]],
    dim: int,
    iters: int = 200,
    seed: int = 0,
) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Deterministic for a given seed (random unit start vector, Rayleigh
    quotient estimate).  Returns 0.0 for the zero operator.
    """
    apply_G = G if callable(G) else (lambda v, _m=np.asarray(G, dtype=np.float64): _m @ v)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max(1, iters)):
        w = apply_G(v)
        est = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
    return est


def _ista(D, X, lam, Z0, iters, rel_tol, prox, penalty, track_objective):
    atoms = D.atoms if isinstance(D, Dictionary) else np.asarray(D, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if lam < 0:
        raise InvalidArgumentError(f"lam must be >= 0, got {lam}")
    if atoms.ndim != 2 or X.shape[-2] != atoms.shape[0]:
        raise InvalidArgumentError(
            f"dictionary {atoms.shape} does not act on patches {X.shape}"
        )
    k = atoms.shape[1]
    # Step size from the gradient Lipschitz bound 2 * lambda_max(D^T D); the
    # 1.01 safety factor keeps the majorization (and hence descent) valid.
    L = 1.01 * power_iteration(atoms.T @ atoms, k, iters=200, seed=0)
    if L <= 0.0:
        raise InvalidArgumentError("dictionary has zero spectral norm")
    z_shape = X.shape[:-2] + (k, X.shape[-1])
    Z = np.zeros(z_shape) if Z0 is None else np.array(Z0, dtype=np.float64)
    if Z.shape != z_shape:
        raise InvalidArgumentError(f"Z0 shape {Z.shape} does not match {z_shape}")

    history = []
    if track_objective:
        R = np.matmul(atoms, Z) - X
        history.append(float(np.sum(R * R)) + lam * penalty(Z))
    for _ in range(iters):
        G = np.matmul(atoms.T, np.matmul(atoms, Z) - X)
        Z_new = prox(Z - G / L, lam / (2.0 * L))
        if track_objective:
            R = np.matmul(atoms, Z_new) - X
            history.append(float(np.sum(R * R)) + lam * penalty(Z_new))
        step = float(np.linalg.norm(Z_new - Z))
        scale = float(np.linalg.norm(Z))
        Z = Z_new
        if step <= rel_tol * max(scale, 1e-30):
            break
    return (Z, history) if track_objective else Z


def ista_row_sparse(
    D,
    X: np.ndarray,
    lam: float,
    Z0: np.ndarray | None = None,
    iters: int = 20,
    rel_tol: float = 1e-6,
    track_objective: bool = False,
):
    """Minimize ``||X - D Z||_F^2 + lam * sum_of_row_norms(Z)`` by proximal gradient.

    ``X`` may be one patch matrix ``(patch_dim, echoes)`` or a batch
    ``(locations, patch_dim, echoes)``; the same dictionary and step size are
    shared across the batch.  Warm-startable via ``Z0``; the objective is
    non-increasing across iterations.  With ``track_objective`` returns
    ``(Z, objective_history)``.
    """
    penalty = lambda Z: float(np.linalg.norm(Z, axis=-1).sum())
    return _ista(D, X, lam, Z0, iters, rel_tol, row_soft_threshold, penalty, track_objective)


def ista_entrywise(
    D,
    X: np.ndarray,
    lam: float,
    Z0: np.ndarray | None = None,
    iters: int = 20,
    rel_tol: float = 1e-6,
    track_objective: bool = False,
):
    """Entrywise-l1 twin of :func:`ista_row_sparse` (prox = scalar shrinkage)."""
    penalty = lambda Z: float(np.abs(Z).sum())
    return _ista(D, X, lam, Z0, iters, rel_tol, soft_threshold, penalty, track_objective)
