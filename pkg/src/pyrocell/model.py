"""Core value types: landscape rasters, model parameters, and fire state."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

# Clamp box applied after every optimizer step. p_continue is deliberately
# excluded: it is never calibrated, only validated.
PARAM_BOUNDS = {
    "c1": (0.0, 1.0),
    "c2": (0.0, 1.0),
    "a": (0.0, 1.0),
    "p_h": (0.2, 1.0),
}

CALIBRATED_PARAM_NAMES = ("c1", "c2", "a", "p_h")


@dataclass(frozen=True)
class ModelParams:
    """The five scalars controlling fire spread.

    c1/c2 scale the wind speed/direction response, a scales the slope
    response, p_h is the base spread probability and p_continue is the
    per-step probability that a burning cell keeps burning.
    """

    c1: float = 0.045
    c2: float = 0.131
    a: float = 0.078
    p_h: float = 0.58
    p_continue: float = 0.5

    def as_array(self) -> np.ndarray:
        """Calibratable parameters as a length-4 float array (c1, c2, a, p_h)."""
        return np.array([self.c1, self.c2, self.a, self.p_h], dtype=np.float64)

    def with_calibrated(self, values: np.ndarray) -> "ModelParams":
        """New params with (c1, c2, a, p_h) replaced; p_continue untouched."""
        c1, c2, a, p_h = (float(v) for v in values)
        return replace(self, c1=c1, c2=c2, a=a, p_h=p_h)


def clamp_params(p: ModelParams) -> ModelParams:
    """Project the calibratable parameters into their stability box.

    a, c1, c2 go to [0, 1]; p_h to [0.2, 1]. p_continue is never clamped
    (out-of-range values are reported by validate_params instead).
    """
    clamped = {
        name: min(max(getattr(p, name), lo), hi)
        for name, (lo, hi) in PARAM_BOUNDS.items()
    }
    return replace(p, **clamped)


def validate_params(p: ModelParams) -> List[str]:
    """Return a list of violation messages; empty means valid."""
    problems = []
    for name in CALIBRATED_PARAM_NAMES + ("p_continue",):
        v = getattr(p, name)
        if not np.isfinite(v):
            problems.append(f"{name} is not finite")
    if not 0.0 <= p.p_continue <= 1.0:
        problems.append(f"p_continue outside [0, 1]: {p.p_continue}")
    for name, (lo, hi) in PARAM_BOUNDS.items():
        v = getattr(p, name)
        if np.isfinite(v) and not lo <= v <= hi:
            problems.append(f"{name} outside [{lo}, {hi}]: {v}")
    return problems


@dataclass(frozen=True)
class Landscape:
    """Per-cell environmental rasters shared by every simulation step.

    wind_direction is measured in degrees from East, counterclockwise.
    slope has shape (H, W, 3, 3): entry [r, c, 1+dr, 1+dc] is the slope in
    degrees from cell (r, c) toward its neighbor at offset (dr, dc); the
    center entry is unused. canopy/density hold the already-scaled
    vegetation factors (category-to-factor mapping is a preprocessing
    concern, not ours).
    """

    wind_speed: np.ndarray
    wind_direction: np.ndarray
    slope: np.ndarray
    canopy: np.ndarray
    density: np.ndarray
    cell_side: float = 30.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.wind_speed.shape  # type: ignore[return-value]

    @property
    def height(self) -> int:
        return int(self.wind_speed.shape[0])

    @property
    def width(self) -> int:
        return int(self.wind_speed.shape[1])


def validate_landscape(land: Landscape) -> List[str]:
    """Check raster shapes and value bounds; returns violation messages."""
    problems: List[str] = []
    base = land.wind_speed.shape
    if len(base) != 2 or base[0] < 1 or base[1] < 1:
        problems.append(f"wind_speed must be a 2-D grid, got shape {base}")
        return problems
    h, w = base

    for name in ("wind_direction", "canopy", "density"):
        grid = getattr(land, name)
        if grid.shape != (h, w):
            problems.append(f"{name} shape {grid.shape} != {(h, w)}")
    if land.slope.shape != (h, w, 3, 3):
        problems.append(f"slope shape {land.slope.shape} != {(h, w, 3, 3)}")

    if land.cell_side <= 0:
        problems.append(f"cell_side must be > 0, got {land.cell_side}")

    for name in ("wind_speed", "wind_direction", "slope", "canopy", "density"):
        grid = getattr(land, name)
        if not np.all(np.isfinite(grid)):
            idx = np.argwhere(~np.isfinite(grid))[0]
            problems.append(f"{name} non-finite at {tuple(int(i) for i in idx)}")

    if land.wind_speed.shape == (h, w):
        neg = np.argwhere(land.wind_speed < 0)
        if neg.size:
            r, c = neg[0]
            problems.append(f"wind_speed negative at ({r}, {c})")
    for name in ("canopy", "density"):
        grid = getattr(land, name)
        if grid.shape == (h, w):
            bad = np.argwhere(grid < -1.0)
            if bad.size:
                r, c = bad[0]
                problems.append(f"{name} below -1 at ({r}, {c})")
    return problems


@dataclass
class FireState:
    """Mutable per-step fire state: two exclusive boolean grids plus the
    ignition-probability accumulator used as the prediction.

    Initial and injected ignition cells carry the constant 1.0 in the
    accumulator; cells ignited by spread carry the ignition probability
    captured at the step they first ignited.
    """

    burning: np.ndarray
    burned: np.ndarray
    accumulator: np.ndarray
    t: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.burning.shape  # type: ignore[return-value]

    def affected(self) -> np.ndarray:
        """Cells that are or have been on fire."""
        return self.burning | self.burned

    def copy(self) -> "FireState":
        return FireState(
            burning=self.burning.copy(),
            burned=self.burned.copy(),
            accumulator=self.accumulator.copy(),
            t=self.t,
        )


def new_fire_state(init: np.ndarray, land: Landscape | None = None) -> FireState:
    """Fresh state at t=0 from an initial burning mask.

    Initial cells get accumulator value 1.0 (a constant, never part of any
    gradient). Raises ValueError on a landscape/init dimension mismatch.
    """
    init = np.asarray(init, dtype=bool)
    if init.ndim != 2:
        raise ValueError(f"initial fire mask must be 2-D, got shape {init.shape}")
    if land is not None and init.shape != land.shape:
        raise ValueError(
            f"initial fire mask shape {init.shape} != landscape {land.shape}"
        )
    acc = np.zeros(init.shape, dtype=np.float64)
    acc[init] = 1.0
    return FireState(
        burning=init.copy(),
        burned=np.zeros(init.shape, dtype=bool),
        accumulator=acc,
        t=0,
    )


@dataclass(frozen=True)
class StepRings:
    """Which simulation steps attach to the gradient tape: the first
    r_first, the last r_last, and r_between spread evenly in between."""

    r_first: int = 2
    r_between: int = 5
    r_last: int = 10

    def __post_init__(self):
        for name in ("r_first", "r_between", "r_last"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.r_first + self.r_between + self.r_last


@dataclass
class RunManifest:
    """Reproducibility record for a simulation or calibration run."""

    base_seed: int
    steps_update_interval: int = 1
    max_epochs: int = 0
    max_iterations: int = 0
    learning_rate: float = 0.0
    epoch_seeds: List[int] = field(default_factory=list)
    trajectory: List[Tuple[int, int, ModelParams]] = field(default_factory=list)

    def record(self, epoch: int, iteration: int, params: ModelParams) -> None:
        self.trajectory.append((epoch, iteration, params))
