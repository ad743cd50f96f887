"""Synthetic landscape generators so every experiment and benchmark runs
without external data."""

from __future__ import annotations



import numpy as np

from .data_io import slope_from_altitude
from .model import Landscape


def _smooth(grid: np.ndarray, passes: int) -> np.ndarray:
    """Cheap box smoothing with edge clamping."""
    out = grid.astype(np.float64)
    for _ in range(passes):
        padded = np.pad(out, 1, mode="edge")
        acc = np.zeros_like(out)
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                acc += padded[1 + dr:1 + dr + out.shape[0], 1 + dc:1 + dc + out.shape[1]]
        out = acc / 9.0
    return out


def flat_landscape(size: int, cell_side: float = 30.0) -> Landscape:
    """Windless plain with neutral vegetation factors."""
    zeros = np.zeros((size, size), dtype=np.float64)
    return Landscape(
        wind_speed=zeros.copy(),
        wind_direction=zeros.copy(),
        slope=np.zeros((size, size, 3, 3), dtype=np.float64),
        canopy=zeros.copy(),
        density=zeros.copy(),
        cell_side=cell_side,
    )


def _dome_altitude(size: int, height_m: float) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, size)
    xx, yy = np.meshgrid(axis, axis)
    return height_m * np.exp(-2.0 * (xx * xx + yy * yy))


def hill_landscape(size: int, cell_side: float = 30.0,
                   slope_sign: str = "downhill-positive") -> Landscape:
    """Central dome with a steady 3 m/s wind toward the northeast."""
    land = flat_landscape(size, cell_side)
    altitude = _dome_altitude(size, height_m=8.0 * cell_side)
    return Landscape(
        wind_speed=np.full((size, size), 3.0),
        wind_direction=np.full((size, size), 45.0),
        slope=slope_from_altitude(altitude, cell_side, slope_sign),
        canopy=land.canopy,
        density=land.density,
        cell_side=cell_side,
    )


def valley_landscape(size: int, cell_side: float = 30.0,
                     slope_sign: str = "downhill-positive") -> Landscape:
    """Inverted dome with a steady 3 m/s wind toward the southwest."""
    altitude = -_dome_altitude(size, height_m=8.0 * cell_side)
    zeros = np.zeros((size, size), dtype=np.float64)
    return Landscape(
        wind_speed=np.full((size, size), 3.0),
        wind_direction=np.full((size, size), 225.0),
        slope=slope_from_altitude(altitude, cell_side, slope_sign),
        canopy=zeros.copy(),
        density=zeros.copy(),
        cell_side=cell_side,
    )


def windy_landscape(size: int, cell_side: float = 30.0,
                    slope_sign: str = "downhill-positive") -> Landscape:
    """Strong uniform wind (10 m/s toward 30 degrees) over a gentle dome
    with damped vegetation. Fires here are strongly directional, which
    makes the landscape a good inverse-modeling fixture: wrong parameters
    produce visibly wrong shapes and growth curves."""
    altitude = _dome_altitude(size, height_m=2.0 * cell_side)
    return Landscape(
        wind_speed=np.full((size, size), 10.0),
        wind_direction=np.full((size, size), 30.0),
        slope=slope_from_altitude(altitude, cell_side, slope_sign),
        canopy=np.full((size, size), -0.45),
        density=np.full((size, size), -0.45),
        cell_side=cell_side,
    )


def random_landscape(size: int, seed: int, cell_side: float = 30.0,
                     slope_sign: str = "downhill-positive") -> Landscape:
    """Smoothed random terrain, wind, and vegetation fields."""
    rng = np.random.default_rng(seed)
    altitude = _smooth(rng.uniform(0.0, 6.0 * cell_side, (size, size)), passes=3)
    speed = np.clip(_smooth(rng.uniform(0.0, 6.0, (size, size)), passes=2), 0.0, None)
    direction = _smooth(rng.uniform(0.0, 360.0, (size, size)), passes=2) % 360.0
    canopy = np.clip(_smooth(rng.uniform(-0.4, 0.4, (size, size)), passes=2), -1.0, None)
    density = np.clip(_smooth(rng.uniform(-0.4, 0.4, (size, size)), passes=2), -1.0, None)
    return Landscape(
        wind_speed=speed,
        wind_direction=direction,
        slope=slope_from_altitude(altitude, cell_side, slope_sign),
        canopy=canopy,
        density=density,
        cell_side=cell_side,
    )


def make_landscape(kind: str, size: int, cell_side: float = 30.0,
                   slope_sign: str = "downhill-positive") -> Landscape:
    """Build a landscape by generator kind: flat, hill, valley, windy, or
    random:<seed>."""
    if kind == "flat":
        return flat_landscape(size, cell_side)
    if kind == "hill":
        return hill_landscape(size, cell_side, slope_sign)
    if kind == "valley":
        return valley_landscape(size, cell_side, slope_sign)
    if kind == "windy":
        return windy_landscape(size, cell_side, slope_sign)
    if kind.startswith("random:"):
        return random_landscape(size, int(kind.split(":", 1)[1]), cell_side, slope_sign)
    raise ValueError(f"unknown synthetic landscape {kind!r}")


def center_ignition(size: int, block: int = 3) -> np.ndarray:
    """Initial fire mask: a block x block square at the grid center."""
    init = np.zeros((size, size), dtype=bool)
    half = block // 2
    mid = size // 2
    r0, r1 = max(mid - half, 0), min(mid - half + block, size)
    init[r0:r1, r0:r1] = True
    return init
