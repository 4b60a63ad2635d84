"""Greedy L-curve parameter selection.

Regularization weights are tuned one at a time in the fixed order ``mu``,
``lam``, ``gamma`` (where the method has them): parameters later in the order
are held at zero, earlier ones at their already-chosen values.  For every grid
value the engine runs to completion and contributes one point
``(log residual, log penalty)``; the chosen value sits at the point of maximum
discrete curvature (the corner of the L).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .core import InvalidArgumentError, KSpaceData, MultiEchoImage, ReconParams
from .dict_recon import scheme_for
from .baselines import haar_dwt2
from .metrics import snr_db
from .methods import run_method
from .operators import apply_forward, patch_stack

__all__ = ["TUNABLE_PARAMS", "GAMMA_FLOOR", "lcurve_corner", "lcurve_greedy", "SweepPoint"]

TUNABLE_PARAMS = {
    "cs_analysis": ("lam",),
    "dl_sparse": ("mu", "lam"),
    "dl_rowsparse": ("mu", "lam"),
    "tl_rowsparse": ("mu", "lam", "gamma"),
}

# The transform update is undefined at gamma = 0, so "held at zero" is realized
# as this negligible positive floor while earlier parameters are being tuned.
GAMMA_FLOOR = 1e-8


@dataclass(frozen=True)
class SweepPoint:
    """One grid evaluation of one tuning stage."""

    param: str
    value: float
    residual_norm: float
    penalty: float
    snr_db: float | None


def lcurve_corner(points: Sequence[tuple[float, float]]) -> int:
    """Index of maximum discrete curvature of a polyline (endpoints excluded).

    Uses the three-point (Menger) curvature with the sign oriented so that the
    corner of a decreasing L-shaped curve is positive.  For a straight line
    all interior curvatures tie at ~0 and the first interior index is
    returned.
    """
    if len(points) < 3:
        raise InvalidArgumentError(f"need at least 3 points, got {len(points)}")
    pts = np.asarray(points, dtype=np.float64)
    best_idx, best_kappa = 1, -np.inf
    for k in range(1, len(pts) - 1):
        a = pts[k] - pts[k - 1]
        b = pts[k + 1] - pts[k]
        c = pts[k + 1] - pts[k - 1]
        denom = np.linalg.norm(a) * np.linalg.norm(b) * np.linalg.norm(c)
        if denom == 0.0:
            continue
        kappa = 2.0 * (a[0] * b[1] - a[1] * b[0]) / denom
        if kappa > best_kappa:
            best_idx, best_kappa = k, kappa
    return best_idx


def _log(v: float) -> float:
    return float(np.log(max(v, 1e-300)))


def _residual_norm(image: MultiEchoImage, y: KSpaceData) -> float:
    r = apply_forward(image, y.mask).data - y.data
    return float(np.sqrt(np.sum(r.real**2 + r.imag**2)))


def _penalty(method: str, param: str, out, params: ReconParams, y: KSpaceData) -> float:
    """Value of the penalty block governed by ``param`` at the solution."""
    x = out.image.data
    if method == "cs_analysis":
        levels = 3
        coeffs = np.stack(
            [haar_dwt2(x[:, :, c], levels) for c in range(x.shape[2])], axis=-1
        )
        return float(np.linalg.norm(coeffs.reshape(-1, x.shape[2]), axis=1).sum())
    scheme = scheme_for(params, x.shape[0], x.shape[1])
    X = patch_stack(x, scheme)
    state = out.state
    if param == "mu":
        if method == "tl_rowsparse":
            R = np.matmul(state.transform.matrix, X) - state.coefs
        else:
            R = X - np.matmul(state.dictionary.atoms, state.coefs)
        return float(np.sum(R * R))
    if param == "lam":
        if method == "dl_sparse":
            return float(np.abs(state.coefs).sum())
        return float(np.linalg.norm(state.coefs, axis=-1).sum())
    # gamma: transform conditioning term
    T = state.transform.matrix
    _, logdet = np.linalg.slogdet(T)
    return float(np.sum(T * T)) - float(logdet)


def lcurve_greedy(
    y: KSpaceData,
    method: str,
    grids: Mapping[str, Sequence[float]],
    base_params: ReconParams,
    truth: MultiEchoImage | None = None,
    truth_free: bool = True,
    **engine_kwargs,
) -> tuple[ReconParams, list[SweepPoint]]:
    """Tune the regularization weights of ``method`` on measured data.

    Parameters
    ----------
    grids : mapping
        Ascending value grid (>= 3 points) for each tunable parameter of the
        method.
    truth, truth_free :
        With ``truth_free=True`` (default) selection uses only the L-curve
        corner.  When a reference image is supplied and ``truth_free=False``,
        each stage instead picks the grid value of maximum SNR (oracle mode,
        used to calibrate the truth-free behavior).

    Returns the tuned parameters and the full evaluation trace.
    """
    names = TUNABLE_PARAMS.get(method)
    if names is None:
        raise InvalidArgumentError(f"method {method!r} has no tunable parameters")
    if not truth_free and truth is None:
        raise InvalidArgumentError("oracle selection requires a reference image")
    chosen: dict[str, float] = {}
    trace: list[SweepPoint] = []
    for pos, name in enumerate(names):
        grid = [float(v) for v in grids.get(name, ())]
        if len(grid) < 3:
            raise InvalidArgumentError(
                f"grid for {name!r} needs at least 3 values, got {len(grid)}"
            )
        if sorted(grid) != grid:
            raise InvalidArgumentError(f"grid for {name!r} must be ascending")
        overrides = dict(chosen)
        for later in names[pos + 1:]:
            overrides[later] = GAMMA_FLOOR if later == "gamma" else 0.0
        points, snrs, stage = [], [], []
        for v in grid:
            overrides[name] = v
            params_v = replace(base_params, **overrides)
            out = run_method(method, y, params_v, **engine_kwargs)
            resid = _residual_norm(out.image, y)
            pen = _penalty(method, name, out, params_v, y)
            quality = None if truth is None else snr_db(truth, out.image)
            points.append((_log(resid), _log(pen)))
            snrs.append(quality)
            stage.append(SweepPoint(name, v, resid, pen, quality))
        trace.extend(stage)
        if truth_free:
            idx = lcurve_corner(points)
        else:
            idx = int(np.argmax([s for s in snrs]))
        chosen[name] = grid[idx]
    return replace(base_params, **chosen), trace
