"""Counter-based uniform random draws.

Every draw is a pure function of (seed, step, cell, channel), so a
trajectory depends only on its inputs, never on evaluation order, worker
count, or how many draws other cells consumed. This is what makes
epoch-seed replay exact: re-simulating with the same seed reproduces each
cell's draws even when calibrated parameters change which cells ignite.

The mixing function is the SplitMix64 finalizer applied twice, which is
frozen: golden values in the test suite pin it down.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)

# 2**-53; top 53 bits of the mixed word give a uniform double in [0, 1)
_INV_2_53 = float(np.ldexp(1.0, -53))


class Channel(IntEnum):
    """Independent random channels consumed by one simulation step."""

    IGNITE = 0
    CONTINUE = 1


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on uint64 arrays (wraps mod 2^64)."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _as_u64(value: int) -> np.uint64:
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


def _stream_key(seed: int, t: int, channel: Channel) -> np.uint64:
    """Per-(seed, step, channel) base key; cells are folded in afterwards."""
    with np.errstate(over="ignore"):
        k = _mix64(np.asarray(_as_u64(seed) + _GOLDEN, dtype=np.uint64))
        k = k ^ (_as_u64(t) * np.uint64(0x9E3779B97F4A7C16))
        k = k ^ (_as_u64(int(channel)) * np.uint64(0xD1B54A32D192ED03))
        return np.uint64(_mix64(np.asarray(k, dtype=np.uint64)))


def uniform_grid(
    seed: int,
    t: int,
    channel: Channel,
    row0: int,
    col0: int,
    height: int,
    width: int,
) -> np.ndarray:
    """Uniform [0, 1) draws for the cell window starting at (row0, col0).

    Any window of any grid yields the same value for the same absolute
    cell, so partial evaluation (active-region windows, thread bands)
    cannot change a trajectory.
    """
    base = _stream_key(seed, t, channel)
    rows = (np.arange(row0, row0 + height, dtype=np.uint64) << np.uint64(32))[:, None]
    cols = np.arange(col0, col0 + width, dtype=np.uint64)[None, :]
    cell_code = rows | cols
    mixed = _mix64(_mix64(cell_code + _GOLDEN) ^ base)
    return (mixed >> np.uint64(11)).astype(np.float64) * _INV_2_53


def uniform_draw(seed: int, t: int, row: int, col: int, channel: Channel) -> float:
    """Single keyed draw; identical to the matching uniform_grid entry."""
    return float(uniform_grid(seed, t, channel, row, col, 1, 1)[0, 0])


def derive_epoch_seed(base_seed: int, epoch: int) -> int:
    """Deterministic per-epoch seed, injective in the epoch index."""
    with np.errstate(over="ignore"):
        k = _mix64(np.asarray(_as_u64(base_seed) + _GOLDEN, dtype=np.uint64))
        k = k ^ (_as_u64(epoch) * np.uint64(0xD1342543DE82EF95))
        return int(_mix64(np.asarray(k, dtype=np.uint64)))
