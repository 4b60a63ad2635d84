"""Joint reconstruction with a learned sparsifying transform.

Minimizes, over the image stack ``x``, square transform ``T``, and
per-location coefficient matrices ``Z_i``::

    ||y - A x||^2
      + mu * ( sum_i ||T X_i - Z_i||_F^2 + lam * sum_i ||Z_i||_2,1
               + gamma * (||T||_F^2 - log det T) )

The ``gamma`` term (counted once, not per patch) rules out trivial and
ill-conditioned transforms; its domain is ``det T > 0``.  All three blocks
have closed-form or CG solutions:

* coefficients — exact row shrinkage of ``T X_i``,
* transform    — closed form via an eigen-factorization of ``X X^T + gamma I``
  and an SVD (stationary point of the transform subproblem),
* image        — per-echo conjugate gradient on the normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DomainError,
    InvalidArgumentError,
    KSpaceData,
    MultiEchoImage,
    ReconParams,
    Transform,
)
from .dict_recon import _data_term, _fix_column_signs, concat_patches, scheme_for
from .operators import PatchScheme, apply_adjoint, patch_stack, scatter_stack
from .solvers import conjugate_gradient, row_soft_threshold

__all__ = [
    "TlState",
    "init_transform_svd",
    "objective_tl",
    "update_image_S1",
    "update_transform_S2",
    "update_coefs_S3",
    "reconstruct_tl",
]


@dataclass
class TlState:
    """Current iterate of the transform engine (see :class:`DlState`)."""

    image: MultiEchoImage
    transform: Transform
    coefs: np.ndarray  # (num_locations, patch_dim, echoes)
    cost_history: list[float]


def init_transform_svd(x0: MultiEchoImage, scheme: PatchScheme) -> Transform:
    """Orthonormal start: transposed left singular vectors of the patch matrix.

    Uses the same sign convention as the dictionary start, then flips the last
    row if needed so that ``det T = +1``.
    """
    big = concat_patches(patch_stack(x0.data, scheme))
    if not np.any(big):
        raise InvalidArgumentError("cannot initialize a transform from all-zero patches")
    U, _, _ = np.linalg.svd(big, full_matrices=True)
    T = _fix_column_signs(U).T
    if np.linalg.det(T) < 0:
        T = T.copy()
        T[-1, :] *= -1.0
    return Transform(T)


def objective_tl(state: TlState, y: KSpaceData, params: ReconParams) -> float:
    """Exact objective at ``state``; raises ``DomainError`` if ``det T <= 0``."""
    T = state.transform.matrix
    sign, logdet = np.linalg.slogdet(T)
    if sign <= 0:
        raise DomainError("transform determinant is not positive")
    x = state.image.data
    scheme = scheme_for(params, x.shape[0], x.shape[1])
    X = patch_stack(x, scheme)
    R = np.matmul(T, X) - state.coefs
    fit = float(np.sum(R * R))
    rows = float(np.linalg.norm(state.coefs, axis=-1).sum())
    cond = float(np.sum(T * T)) - float(logdet)
    return _data_term(x, y) + params.mu * (fit + params.lam * rows + params.gamma * cond)


def update_image_S1(
    y: KSpaceData,
    T: Transform,
    Z: np.ndarray,
    scheme: PatchScheme,
    params: ReconParams,
    x0: MultiEchoImage | None = None,
) -> MultiEchoImage:
    """Image step: per-echo CG on
    ``(A_c^T A_c + mu * sum_i P_i^T T^T T P_i) x_c = A_c^T y_c + mu * sum_i P_i^T T^T Z_i[:, c]``.

    With ``T = I`` this is exactly the dictionary-engine image step with
    ``D Z_i := Z_i``.
    """
    bmask = y.mask.bool_view()
    h, w, n_echo = y.data.shape
    G = T.matrix.T @ T.matrix
    target = scatter_stack(np.matmul(T.matrix.T, Z), scheme)
    x = np.empty((h, w, n_echo))
    for c in range(n_echo):
        plane_mask = bmask[:, :, c]
        rhs = np.fft.ifft2(np.where(plane_mask, y.data[:, :, c], 0.0), norm="ortho").real
        rhs = rhs + params.mu * target[:, :, c]

        def normal_op(v, _m=plane_mask):
            k = np.fft.fft2(v, norm="ortho")
            back = np.fft.ifft2(np.where(_m, k, 0.0), norm="ortho").real
            patches = patch_stack(v, scheme)  # (N, m)
            return back + params.mu * scatter_stack(patches @ G, scheme)

        start = None if x0 is None else x0.data[:, :, c]
        x[:, :, c], _, _ = conjugate_gradient(
            normal_op, rhs, x0=start, tol=params.cg_tol, max_iters=params.cg_max_iters
        )
    return MultiEchoImage(x)


def update_transform_S2(patches, Z: np.ndarray, gamma: float) -> Transform:
    """Transform step, in closed form.

    With ``X`` and ``Z`` the column-concatenated patches and coefficients:
    factor ``X X^T + gamma I = L L^T``, take the SVD
    ``L^{-1} X Z^T = Q S R^T``, and return
    ``T = R * (S + (S^2 + 2 gamma I)^{1/2}) / 2 * Q^T L^{-1}``,
    a stationary point of
    ``||T X - Z||_F^2 + gamma (||T||_F^2 - log det T)``.

    The log-det domain requires ``det T > 0``.  The formula's determinant sign
    follows ``det(X Z^T)``; when coefficient rows are zeroed at every location
    that matrix is singular and the SVD's sign on null directions is
    arbitrary, so the sign is enforced by flipping the direction of the
    smallest singular value (which leaves the subproblem value unchanged when
    that singular value is zero, and otherwise picks the best positive-
    determinant point of the same diagonal family).
    """
    if gamma <= 0:
        raise InvalidArgumentError(f"gamma must be > 0, got {gamma}")
    if isinstance(patches, np.ndarray) and patches.ndim == 3:
        Xs = np.asarray(patches, dtype=np.float64)
    else:
        Xs = np.stack([p.values for p in patches])
    X = concat_patches(Xs)
    Zc = concat_patches(np.asarray(Z, dtype=np.float64))
    m = X.shape[0]
    w, V = np.linalg.eigh(X @ X.T + gamma * np.eye(m))
    L_inv = (V / np.sqrt(w)) @ V.T  # symmetric inverse square root
    Q, s, Rt = np.linalg.svd(L_inv @ (X @ Zc.T))
    R = Rt.T
    scale = 0.5 * (s + np.sqrt(s * s + 2.0 * gamma))
    if np.linalg.det(Q) * np.linalg.det(R) < 0:
        R = R.copy()
        R[:, -1] *= -1.0
        scale = scale.copy()
        scale[-1] = 0.5 * (-s[-1] + np.sqrt(s[-1] * s[-1] + 2.0 * gamma))
    T = (R * scale) @ Q.T @ L_inv
    return Transform(T)


def update_coefs_S3(patches, T: Transform, lam: float) -> np.ndarray:
    """Coefficient step: exact prox, ``Z_i = row_soft_threshold(T X_i, lam / 2)``."""
    if isinstance(patches, np.ndarray) and patches.ndim == 3:
        X = np.asarray(patches, dtype=np.float64)
    else:
        X = np.stack([p.values for p in patches])
    return row_soft_threshold(np.matmul(T.matrix, X), lam / 2.0)


def reconstruct_tl(y: KSpaceData, params: ReconParams) -> tuple[MultiEchoImage, TlState]:
    """Alternating transform-learning reconstruction.

    Starts from the zero-filled image with an orthonormal SVD transform, then
    repeats coefficient, transform, and image steps, recording the exact
    objective once per outer iteration.  Stops at ``max_outer_iters`` or when
    the relative cost change falls below ``rel_cost_tol``.
    """
    if params.gamma <= 0:
        raise InvalidArgumentError("transform engine requires gamma > 0")
    x = apply_adjoint(y)
    if params.patch_size > min(x.height, x.width):
        raise InvalidArgumentError(
            f"patch_size {params.patch_size} exceeds image extent "
            f"{min(x.height, x.width)}"
        )
    scheme = scheme_for(params, x.height, x.width)
    T = init_transform_svd(x, scheme)
    Z = update_coefs_S3(patch_stack(x.data, scheme), T, params.lam)

    state = TlState(image=x, transform=T, coefs=Z, cost_history=[])
    state.cost_history.append(objective_tl(state, y, params))
    for _ in range(params.max_outer_iters):
        X = patch_stack(state.image.data, scheme)
        state.coefs = update_coefs_S3(X, state.transform, params.lam)
        state.transform = update_transform_S2(X, state.coefs, params.gamma)
        state.image = update_image_S1(
            y, state.transform, state.coefs, scheme, params, x0=state.image
        )
        cost = objective_tl(state, y, params)
        prev = state.cost_history[-1]
        state.cost_history.append(cost)
        if abs(prev - cost) <= params.rel_cost_tol * max(abs(prev), 1e-30):
            break
    return state.image, state
