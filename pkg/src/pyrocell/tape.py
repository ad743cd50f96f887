"""Gradient tape: attached-step recording and the analytic backward pass.

The backward pass treats the realized boolean trajectory as fixed
(straight-through semantics): gradients flow only through the ignition
probabilities captured at attached steps, never through the sampled
transitions themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .model import StepRings


def attachment_plan(total_steps: int, rings: StepRings) -> Tuple[int, ...]:
    """Sorted step indices (1-based) attached to the tape.

    The first r_first and last r_last steps always attach; r_between
    interior steps are placed by rounding an even linear spacing between
    the end of the first block and the start of the last block.
    """
    if total_steps < 0:
        raise ValueError("total_steps must be >= 0")
    attached = set()
    attached.update(range(1, min(rings.r_first, total_steps) + 1))
    attached.update(range(max(total_steps - rings.r_last, 0) + 1, total_steps + 1))
    if rings.r_between > 0:
        lo = rings.r_first + 1
        hi = total_steps - rings.r_last + 1
        if hi > lo:
            interior = np.linspace(lo, hi, rings.r_between + 2)[1:-1]
            for s in np.round(interior).astype(int):
                if 1 <= s <= total_steps:
                    attached.add(int(s))
    return tuple(sorted(attached))


def check_if_attach(step: int, total_steps: int, rings: StepRings) -> bool:
    """Whether the given step (1-based) joins the gradient computation."""
    if not 1 <= step <= total_steps:
        raise ValueError(f"step {step} outside 1..{total_steps}")
    return step in attachment_plan(total_steps, rings)


@dataclass
class TapeBlock:
    """Cached forward values for one attached step's newly ignited cells.

    Arrays are (n, 8) over the fixed neighbor-slot order; mask marks slots
    whose neighbor existed and was burning, and every cached array is zero
    on dead slots. One logical tape entry = one ignited cell (one row).
    """

    t: int
    rows: np.ndarray
    cols: np.ndarray
    p_ignite: np.ndarray
    mask: np.ndarray
    fp: np.ndarray
    raw: np.ndarray
    rest: np.ndarray
    vw: np.ndarray
    cosm1: np.ndarray
    slope: np.ndarray
    veg1: np.ndarray
    den1: np.ndarray

    def __len__(self) -> int:
        return int(self.rows.size)

    def recombine(self) -> np.ndarray:
        """Recompute p_ignite from the cached normalized probabilities.

        Multiplies (1 - fp) over slots in the frozen order, so the result
        is bit-identical to the forward pass.
        """
        factors = np.where(self.mask, 1.0 - self.fp, 1.0)
        prod = np.ones(len(self), dtype=np.float64)
        for k in range(8):
            prod *= factors[:, k]
        return 1.0 - prod


@dataclass
class Tape:
    """Append-only record of attached steps for one simulation run."""

    shape: Tuple[int, int]
    blocks: List[TapeBlock] = field(default_factory=list)

    def add_block(self, block: TapeBlock) -> None:
        self.blocks.append(block)

    @property
    def num_entries(self) -> int:
        return sum(len(b) for b in self.blocks)

    def __len__(self) -> int:
        return self.num_entries


def _leave_one_out(factors: np.ndarray) -> np.ndarray:
    """Per-slot product of the other seven factors, computed by prefix and
    suffix products (no division, so factors equal to zero are safe)."""
    n, m = factors.shape
    prefix = np.ones((n, m), dtype=np.float64)
    suffix = np.ones((n, m), dtype=np.float64)
    for k in range(1, m):
        prefix[:, k] = prefix[:, k - 1] * factors[:, k - 1]
        suffix[:, m - 1 - k] = suffix[:, m - k] * factors[:, m - k]
    return prefix * suffix


def backward_params(
    tape: Tape, dl_dacc: np.ndarray, norm_c: float
) -> np.ndarray:
    """Gradient of the loss with respect to (c1, c2, a, p_h).

    dl_dacc is the loss derivative with respect to the accumulator grid.
    Chain per ignited cell j and burning neighbor i:
      d p_ignite/d f_i = prod_{k != i} (1 - f_k)
      d f_i / d raw_i  = c * (1 - f_i^2)
      d raw_i: * V_w for c1; * V_w (cos-1) for c2; * slope for a;
               raw_i / p_h (cached product, never divided) for p_h.
    Blocks are reduced in recording order so the sums are deterministic.
    """
    if dl_dacc.shape != tape.shape:
        raise ValueError(f"loss grid {dl_dacc.shape} != tape grid {tape.shape}")
    grad = np.zeros(4, dtype=np.float64)
    for block in tape.blocks:
        g = dl_dacc[block.rows, block.cols]
        factors = np.where(block.mask, 1.0 - block.fp, 1.0)
        dy_df = _leave_one_out(factors)
        chain = (
            g[:, None]
            * dy_df
            * (norm_c * (1.0 - block.fp * block.fp))
            * block.mask
        )
        grad[0] += np.sum(chain * block.raw * block.vw)
        grad[1] += np.sum(chain * block.raw * block.vw * block.cosm1)
        grad[2] += np.sum(chain * block.raw * block.slope)
        grad[3] += np.sum(chain * block.rest)
    return grad
