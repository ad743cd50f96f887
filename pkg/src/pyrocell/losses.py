"""Calibration loss, its analytic accumulator gradient, evaluation
metrics, and the probability-normalization constant fit."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

POOL_SIZE = 4


@dataclass(frozen=True)
class LossBreakdown:
    """total = bce_term + mse_term; crop_window is the half-open bounding
    box (row0, row1, col0, col1) of the union support used by the BCE
    term."""

    bce_term: float
    mse_term: float
    crop_window: Tuple[int, int, int, int]

    @property
    def total(self) -> float:
        return self.bce_term + self.mse_term


def _union_bbox(pred: np.ndarray, target: np.ndarray) -> Tuple[int, int, int, int]:
    support = (pred != 0) | target
    rows = np.flatnonzero(support.any(axis=1))
    if rows.size == 0:
        # Both grids empty: fall back to the full grid so the BCE mean is
        # still well defined (ln 2 for an all-zero accumulator).
        h, w = pred.shape
        return 0, h, 0, w
    cols = np.flatnonzero(support.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def combined_loss(
    accumulator: np.ndarray, target: np.ndarray
) -> Tuple[LossBreakdown, np.ndarray]:
    """Shape + scale loss between the ignition-probability accumulator and
    an observed burn map, with its exact derivative w.r.t. the accumulator.

    The BCE-with-logits term treats raw accumulator values as logits and
    averages over the bounding box of the union of nonzero cells (a speed
    crop, not a semantic one). The MSE term compares 4x4 average-pooled
    grids over the full extent, truncating remainder rows/columns.
    """
    acc = np.asarray(accumulator, dtype=np.float64)
    y = np.asarray(target)
    if y.shape != acc.shape:
        raise ValueError(f"target shape {y.shape} != accumulator {acc.shape}")
    y_bool = y.astype(bool)

    r0, r1, c0, c1 = _union_bbox(acc, y_bool)
    xw = acc[r0:r1, c0:c1]
    yw = y_bool[r0:r1, c0:c1].astype(np.float64)
    n_crop = xw.size
    # Stable BCE with logits: max(x,0) - x*y + log(1 + exp(-|x|))
    per_cell = np.maximum(xw, 0.0) - xw * yw + np.log1p(np.exp(-np.abs(xw)))
    bce = float(per_cell.sum() / n_crop)

    grad = np.zeros_like(acc)
    grad[r0:r1, c0:c1] = (expit(xw) - yw) / n_crop

    h, w = acc.shape
    hp, wp = h // POOL_SIZE, w // POOL_SIZE
    if hp > 0 and wp > 0:
        ha, wa = hp * POOL_SIZE, wp * POOL_SIZE
        pooled_y = y_bool[:ha, :wa].astype(np.float64).reshape(
            hp, POOL_SIZE, wp, POOL_SIZE).mean(axis=(1, 3))
        pooled_x = acc[:ha, :wa].reshape(hp, POOL_SIZE, wp, POOL_SIZE).mean(axis=(1, 3))
        diff = pooled_y - pooled_x
        mse = float(np.mean(diff * diff))
        cell_grad = -2.0 * diff / (POOL_SIZE * POOL_SIZE * hp * wp)
        grad[:ha, :wa] += np.repeat(np.repeat(cell_grad, POOL_SIZE, 0), POOL_SIZE, 1)
    else:
        mse = 0.0

    return LossBreakdown(bce_term=bce, mse_term=mse, crop_window=(r0, r1, c0, c1)), grad


def jaccard_index(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean grids; 1.0 when both empty."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    union = int(np.count_nonzero(a | b))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(a & b)) / union


def manhattan_distance(counts_a: Sequence[int], counts_b: Sequence[int]) -> int:
    """Sum of absolute differences between two per-step affected-cell
    count series."""
    if len(counts_a) != len(counts_b):
        raise ValueError(f"length mismatch: {len(counts_a)} vs {len(counts_b)}")
    return int(sum(abs(int(x) - int(y)) for x, y in zip(counts_a, counts_b)))


class NormCandidate(Enum):
    """Candidate normalization families fitted against the identity on
    [0.2, 0.8]."""

    EXP_BASE = "exp_base"  # f(x) = -c^(-x) + 1
    POWER = "power"        # f(x) = -(x + 1)^(-c) + 1
    TANH = "tanh"          # f(x) = tanh(c x)


_FIT_GRID = np.linspace(0.2, 0.8, 61)
_STARTS = {NormCandidate.EXP_BASE: 3.0, NormCandidate.POWER: 1.0, NormCandidate.TANH: 1.0}


def _candidate_values(candidate: NormCandidate, c: float, x: np.ndarray) -> np.ndarray:
    if candidate is NormCandidate.EXP_BASE:
        return -np.power(c, -x) + 1.0
    if candidate is NormCandidate.POWER:
        return -np.power(x + 1.0, -c) + 1.0
    return np.tanh(c * x)


class NormFit(NamedTuple):
    c: float
    sse: float
    converged: bool


def fit_normalization_constant(candidate: NormCandidate) -> NormFit:
    """Nelder-Mead fit of the candidate's constant so it best matches the
    identity on a uniform grid over [0.2, 0.8] (sum of squared
    differences). Returns the best-so-far point even without convergence."""

    def objective(v: np.ndarray) -> float:
        c = float(v[0])
        if candidate is NormCandidate.EXP_BASE and c <= 0:
            return np.inf
        diff = _candidate_values(candidate, c, _FIT_GRID) - _FIT_GRID
        return float(np.dot(diff, diff))

    result = minimize(
        objective,
        x0=[_STARTS[candidate]],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 500},
    )
    return NormFit(c=float(result.x[0]), sse=float(result.fun), converged=bool(result.success))


def fit_all_candidates() -> List[Tuple[NormCandidate, NormFit]]:
    """Fit every candidate; the tanh family should win on SSE."""
    return [(cand, fit_normalization_constant(cand)) for cand in NormCandidate]
