"""Forward cellular-automaton kernel.

Each step computes, for every cell with at least one burning Moore
neighbor, the probability of ignition by combining per-neighbor
propagation probabilities, then draws keyed uniforms to decide ignition
and burn-out. The active computation is restricted to the bounding box of
the burning front (plus a one-cell margin); because the random draws are
keyed per cell this windowing cannot change any trajectory.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .model import FireState, Landscape, ModelParams, new_fire_state
from .rng import Channel, uniform_grid
from .tape import Tape, TapeBlock

# Fitted constant of the tanh probability-normalization function.
DEFAULT_NORM_C = 1.1486328125

# Moore-neighbor positions relative to the target cell, row-major:
# NW, N, NE, W, E, SW, S, SE. This order is frozen; per-cell probability
# products run over it so floating-point results are bit-stable.
NEIGHBOR_POSITIONS: Tuple[Tuple[int, int], ...] = (
    (-1, -1), (-1, 0), (-1, 1),
    (0, -1), (0, 1),
    (1, -1), (1, 0), (1, 1),
)

# Compass bearing (degrees from East, counterclockwise) of a unit offset
# (dr, dc) in grid coordinates, where the row index grows southward.
OFFSET_BEARINGS = {
    (0, 1): 0.0, (-1, 1): 45.0, (-1, 0): 90.0, (-1, -1): 135.0,
    (0, -1): 180.0, (1, -1): 225.0, (1, 0): 270.0, (1, 1): 315.0,
}

# Bearing of the propagation direction arriving from each neighbor slot
# (the direction from the neighbor toward the target is minus its position).
PROPAGATION_BEARINGS = tuple(
    OFFSET_BEARINGS[(-pr, -pc)] for pr, pc in NEIGHBOR_POSITIONS
)


def wind_factor(c1: float, c2: float, v_w: float, theta_rel_deg: float) -> float:
    """Wind scaling exp(c1 V) * exp(c2 V (cos(theta) - 1)).

    theta_rel_deg is the angle between the cell's wind direction and the
    bearing toward the neighbor; the cosine makes its sign irrelevant.
    """
    return math.exp(c1 * v_w) * math.exp(
        c2 * v_w * (math.cos(math.radians(theta_rel_deg)) - 1.0)
    )


def slope_factor(a: float, theta_s_deg: float) -> float:
    """Slope scaling exp(a * theta), with the slope angle in degrees."""
    return math.exp(a * theta_s_deg)


def propagate_prob(
    params: ModelParams,
    land: Landscape,
    from_cell: Tuple[int, int],
    to_cell: Tuple[int, int],
    factor_site: str = "target",
) -> float:
    """Raw (un-normalized) probability that from_cell spreads to to_cell.

    Wind and slope are read at the source cell; vegetation and density at
    the cell named by factor_site ("target" by default, "source" to match
    landscapes keyed the other way).
    """
    fr, fc = from_cell
    tr, tc = to_cell
    dr, dc = tr - fr, tc - fc
    if (dr, dc) not in OFFSET_BEARINGS:
        raise ValueError(f"{to_cell} is not a Moore neighbor of {from_cell}")
    site = (tr, tc) if factor_site == "target" else (fr, fc)
    theta_rel = float(land.wind_direction[fr, fc]) - OFFSET_BEARINGS[(dr, dc)]
    p_w = wind_factor(params.c1, params.c2, float(land.wind_speed[fr, fc]), theta_rel)
    p_s = slope_factor(params.a, float(land.slope[fr, fc, 1 + dr, 1 + dc]))
    return (
        params.p_h
        * (1.0 + float(land.canopy[site]))
        * (1.0 + float(land.density[site]))
        * p_w
        * p_s
    )


def normalize_prob(x, c: float = DEFAULT_NORM_C):
    """Squash a non-negative factor product into [0, 1) via tanh(c * x)."""
    return np.tanh(c * x)


def ignition_prob(neighbor_probs: Sequence[float]) -> float:
    """Probability of ignition given normalized probabilities of the
    currently burning neighbors: 1 - prod(1 - p_i), in the fixed neighbor
    order the caller supplies."""
    probs = list(neighbor_probs)
    if not probs:
        return 0.0
    if len(probs) == 1:
        return float(probs[0])
    q = 1.0
    for p in probs:
        q *= 1.0 - p
    return 1.0 - q


def _shift(grid: np.ndarray, dr: int, dc: int, fill: float = 0.0) -> np.ndarray:
    """out[i] = grid[i + (dr, dc)], with fill outside the grid."""
    h, w = grid.shape
    out = np.full_like(grid, fill)
    s0, s1 = max(dr, 0), min(h + dr, h)
    c0, c1 = max(dc, 0), min(w + dc, w)
    if s0 < s1 and c0 < c1:
        out[s0 - dr:s1 - dr, c0 - dc:c1 - dc] = grid[s0:s1, c0:c1]
    return out


@dataclass
class PropagationFields:
    """Per-slot propagation probabilities for a fixed (landscape, params,
    wind) combination. fp[k] holds, at each source cell i, the normalized
    probability that i spreads to the cell for which i sits at neighbor
    slot k. The remaining stacks are only built when a gradient tape needs
    their cached values."""

    fp: np.ndarray
    vw: np.ndarray
    raw: Optional[np.ndarray] = None
    rest: Optional[np.ndarray] = None
    cosm1: Optional[np.ndarray] = None
    slope_toward: Optional[np.ndarray] = None
    site_is_target: bool = True

    @property
    def has_gradients(self) -> bool:
        return self.raw is not None


def build_fields(
    land: Landscape,
    params: ModelParams,
    wind: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    *,
    with_gradients: bool = False,
    norm_c: float = DEFAULT_NORM_C,
    factor_site: str = "target",
    slope_units: str = "degrees",
) -> PropagationFields:
    """Precompute the eight propagation-probability fields."""
    if factor_site not in ("target", "source"):
        raise ValueError(f"factor_site must be 'target' or 'source', got {factor_site!r}")
    if slope_units not in ("degrees", "radians"):
        raise ValueError(f"slope_units must be 'degrees' or 'radians', got {slope_units!r}")

    vw = np.asarray(wind[0] if wind else land.wind_speed, dtype=np.float64)
    wdir = np.asarray(wind[1] if wind else land.wind_direction, dtype=np.float64)
    slope = np.asarray(land.slope, dtype=np.float64)
    if slope_units == "radians":
        slope = np.degrees(slope)

    h, w = land.shape
    vd = (1.0 + np.asarray(land.canopy, dtype=np.float64)) * (
        1.0 + np.asarray(land.density, dtype=np.float64)
    )
    exp_c1 = np.exp(params.c1 * vw)

    fp = np.empty((8, h, w), dtype=np.float64)
    raw = np.empty((8, h, w), dtype=np.float64) if with_gradients else None
    rest = np.empty((8, h, w), dtype=np.float64) if with_gradients else None
    cosm1_stack = np.empty((8, h, w), dtype=np.float64) if with_gradients else None
    slope_stack = np.empty((8, h, w), dtype=np.float64) if with_gradients else None

    for k, (pr, pc) in enumerate(NEIGHBOR_POSITIONS):
        dr, dc = -pr, -pc  # direction from the source toward the target
        cosm1 = np.cos(np.radians(wdir - PROPAGATION_BEARINGS[k])) - 1.0
        slope_k = slope[:, :, 1 + dr, 1 + dc]
        vd_k = _shift(vd, dr, dc) if factor_site == "target" else vd
        rest_k = vd_k * exp_c1 * np.exp(params.c2 * vw * cosm1) * np.exp(params.a * slope_k)
        raw_k = params.p_h * rest_k
        np.tanh(norm_c * raw_k, out=fp[k])
        if with_gradients:
            raw[k] = raw_k
            rest[k] = rest_k
            cosm1_stack[k] = cosm1
            slope_stack[k] = slope_k

    return PropagationFields(
        fp=fp,
        vw=vw,
        raw=raw,
        rest=rest,
        cosm1=cosm1_stack,
        slope_toward=slope_stack,
        site_is_target=(factor_site == "target"),
    )


def _burning_bbox(burning: np.ndarray) -> Optional[Tuple[int, int, int, int]]:
    rows = np.flatnonzero(burning.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(burning.any(axis=0))
    return int(rows[0]), int(rows[-1]) + 1, int(cols[0]), int(cols[-1]) + 1


def _step_band(
    state: FireState,
    prev_burning: np.ndarray,
    prev_float: np.ndarray,
    fp: np.ndarray,
    seed: int,
    t: int,
    p_continue: float,
    r0: int,
    r1: int,
    c0: int,
    c1: int,
) -> Tuple[np.ndarray, np.ndarray, int, int]:
    """Advance one row band of the active window; returns the new-ignition
    mask and ignition probabilities for that band."""
    h, w = prev_burning.shape
    prod = np.ones((r1 - r0, c1 - c0), dtype=np.float64)
    for k, (pr, pc) in enumerate(NEIGHBOR_POSITIONS):
        s0, s1 = max(r0 + pr, 0), min(r1 + pr, h)
        sc0, sc1 = max(c0 + pc, 0), min(c1 + pc, w)
        if s0 >= s1 or sc0 >= sc1:
            continue
        term = fp[k][s0:s1, sc0:sc1] * prev_float[s0:s1, sc0:sc1]
        prod[s0 - pr - r0:s1 - pr - r0, sc0 - pc - c0:sc1 - pc - c0] *= 1.0 - term
    p_ignite = 1.0 - prod

    burning = prev_burning[r0:r1, c0:c1]
    burned = state.burned[r0:r1, c0:c1]
    burnable = ~burning & ~burned

    draw_ignite = uniform_grid(seed, t, Channel.IGNITE, r0, c0, r1 - r0, c1 - c0)
    new_ignition = burnable & (draw_ignite < p_ignite)
    draw_continue = uniform_grid(seed, t, Channel.CONTINUE, r0, c0, r1 - r0, c1 - c0)
    keeps = burning & (draw_continue < p_continue)
    newly_burned = burning & ~keeps

    state.burning[r0:r1, c0:c1] = keeps | new_ignition
    state.burned[r0:r1, c0:c1] |= newly_burned
    acc = state.accumulator[r0:r1, c0:c1]
    acc[new_ignition] = p_ignite[new_ignition]
    return new_ignition, p_ignite, r0, c0


# Row bands below this height are not worth dispatching to a thread.
_MIN_BAND_ROWS = 64


def step_forward(
    state: FireState,
    land: Landscape,
    params: ModelParams,
    seed: int,
    *,
    attach: bool = False,
    tape: Optional[Tape] = None,
    fields: Optional[PropagationFields] = None,
    threads: int = 1,
    executor: Optional[ThreadPoolExecutor] = None,
    norm_c: float = DEFAULT_NORM_C,
    factor_site: str = "target",
) -> FireState:
    """Advance the fire state by one step, in place.

    Draws are keyed on the pre-step index state.t, so replaying from the
    same seed reproduces every cell's draws exactly. When attach is true,
    the newly ignited cells' probability caches are appended to the tape;
    otherwise their accumulator contributions are constants.
    """
    if state.shape != land.shape:
        raise ValueError(f"state shape {state.shape} != landscape {land.shape}")
    if attach and tape is None:
        raise ValueError("attach=True requires a tape")
    if fields is None:
        fields = build_fields(
            land, params, with_gradients=attach, norm_c=norm_c, factor_site=factor_site
        )
    if attach and not fields.has_gradients:
        raise ValueError("attached step needs fields built with_gradients=True")

    t = state.t
    bbox = _burning_bbox(state.burning)
    if bbox is None:
        state.t = t + 1
        return state
    h, w = state.shape
    r0, r1 = max(bbox[0] - 1, 0), min(bbox[1] + 1, h)
    c0, c1 = max(bbox[2] - 1, 0), min(bbox[3] + 1, w)

    prev_burning = state.burning.copy()
    prev_float = prev_burning.astype(np.float64)

    # The band partition is a pure performance choice: every band output is
    # an elementwise function of the previous state and keyed draws, so any
    # partition produces bit-identical results.
    n_bands = max(1, min(int(threads), (r1 - r0) // _MIN_BAND_ROWS, r1 - r0))
    bounds = np.linspace(r0, r1, n_bands + 1, dtype=int)
    jobs = [
        (int(bounds[i]), int(bounds[i + 1]))
        for i in range(n_bands)
        if bounds[i] < bounds[i + 1]
    ]

    def run(band):
        return _step_band(
            state, prev_burning, prev_float, fields.fp, seed, t,
            params.p_continue, band[0], band[1], c0, c1,
        )

    if len(jobs) == 1 or executor is None:
        results = [run(job) for job in jobs]
    else:
        results = list(executor.map(run, jobs))

    if attach:
        _record_ignitions(tape, fields, land, prev_burning, results, t)

    state.t = t + 1
    return state


def _record_ignitions(
    tape: Tape,
    fields: PropagationFields,
    land: Landscape,
    prev_burning: np.ndarray,
    band_results: Iterable[Tuple[np.ndarray, np.ndarray, int, int]],
    t: int,
) -> None:
    """Append tape blocks for this step's newly ignited cells, in
    row-major cell order."""
    h, w = prev_burning.shape
    rows_all: List[np.ndarray] = []
    cols_all: List[np.ndarray] = []
    pign_all: List[np.ndarray] = []
    for new_ignition, p_ignite, r_off, c_off in band_results:
        rr, cc = np.nonzero(new_ignition)
        if rr.size == 0:
            continue
        rows_all.append(rr + r_off)
        cols_all.append(cc + c_off)
        pign_all.append(p_ignite[rr, cc])
    if not rows_all:
        return
    rows = np.concatenate(rows_all)
    cols = np.concatenate(cols_all)
    p_ignite = np.concatenate(pign_all)
    n = rows.size

    mask = np.zeros((n, 8), dtype=bool)
    fp = np.zeros((n, 8), dtype=np.float64)
    raw = np.zeros((n, 8), dtype=np.float64)
    rest = np.zeros((n, 8), dtype=np.float64)
    vw = np.zeros((n, 8), dtype=np.float64)
    cosm1 = np.zeros((n, 8), dtype=np.float64)
    slope = np.zeros((n, 8), dtype=np.float64)
    veg1 = np.zeros((n, 8), dtype=np.float64)
    den1 = np.zeros((n, 8), dtype=np.float64)

    canopy = np.asarray(land.canopy, dtype=np.float64)
    density = np.asarray(land.density, dtype=np.float64)

    for k, (pr, pc) in enumerate(NEIGHBOR_POSITIONS):
        sr = rows + pr
        sc = cols + pc
        inside = (sr >= 0) & (sr < h) & (sc >= 0) & (sc < w)
        sri = np.clip(sr, 0, h - 1)
        sci = np.clip(sc, 0, w - 1)
        live = inside & prev_burning[sri, sci]
        mask[:, k] = live
        fp[live, k] = fields.fp[k][sri[live], sci[live]]
        raw[live, k] = fields.raw[k][sri[live], sci[live]]
        rest[live, k] = fields.rest[k][sri[live], sci[live]]
        vw[live, k] = fields.vw[sri[live], sci[live]]
        cosm1[live, k] = fields.cosm1[k][sri[live], sci[live]]
        slope[live, k] = fields.slope_toward[k][sri[live], sci[live]]
        if fields.site_is_target:
            veg1[live, k] = 1.0 + canopy[rows[live], cols[live]]
            den1[live, k] = 1.0 + density[rows[live], cols[live]]
        else:
            veg1[live, k] = 1.0 + canopy[sri[live], sci[live]]
            den1[live, k] = 1.0 + density[sri[live], sci[live]]

    tape.add_block(TapeBlock(
        t=t, rows=rows, cols=cols, p_ignite=p_ignite, mask=mask,
        fp=fp, raw=raw, rest=rest, vw=vw, cosm1=cosm1, slope=slope,
        veg1=veg1, den1=den1,
    ))


def inject_ignitions(
    state: FireState, cells: Sequence[Tuple[int, int]]
) -> FireState:
    """Force the listed burnable cells to start burning, as if they were
    initial ignition points (spotting hook). Accumulator gets the constant
    1.0; burned cells are left alone. Raises on out-of-bounds indices."""
    h, w = state.shape
    for r, c in cells:
        if not (0 <= r < h and 0 <= c < w):
            raise IndexError(f"ignition cell ({r}, {c}) outside {h}x{w} grid")
        if state.burned[r, c] or state.burning[r, c]:
            continue
        state.burning[r, c] = True
        state.accumulator[r, c] = 1.0
    return state


@dataclass(frozen=True)
class WindUpdate:
    """Replacement wind fields that take effect at the given 1-based step."""

    apply_at_step: int
    wind_speed: np.ndarray
    wind_direction: np.ndarray


@dataclass
class StepStats:
    t: int
    burning: int
    burned: int

    @property
    def affected(self) -> int:
        return self.burning + self.burned


@dataclass
class SimulationResult:
    state: FireState
    series: List[StepStats]
    snapshots: List[Tuple[int, FireState]]
    tape: Optional[Tape] = None

    def affected_counts(self) -> List[int]:
        return [s.affected for s in self.series]


def run_simulation(
    land: Landscape,
    params: ModelParams,
    init: np.ndarray,
    steps: int,
    seed: int,
    *,
    wind_schedule: Optional[Sequence[WindUpdate]] = None,
    attach_steps: Iterable[int] = (),
    tape: Optional[Tape] = None,
    snapshot_every: int = 0,
    threads: int = 1,
    norm_c: float = DEFAULT_NORM_C,
    factor_site: str = "target",
    slope_units: str = "degrees",
) -> SimulationResult:
    """Run the CA forward for a fixed number of steps.

    Scheduled wind fields are swapped in before the step they apply to;
    steps listed in attach_steps record their new ignitions on the tape.
    The trajectory is a pure function of (seed, landscape, params, init,
    schedule): identical inputs reproduce it bit for bit.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    schedule = sorted(wind_schedule or [], key=lambda u: u.apply_at_step)
    for upd in schedule:
        if not 1 <= upd.apply_at_step <= max(steps, 0):
            raise ValueError(
                f"wind schedule step {upd.apply_at_step} outside run of {steps} steps"
            )
        if upd.wind_speed.shape != land.shape or upd.wind_direction.shape != land.shape:
            raise ValueError("scheduled wind field shape mismatch")

    attach_set = frozenset(int(s) for s in attach_steps)
    if attach_set and tape is None:
        tape = Tape(land.shape)

    state = new_fire_state(init, land)
    need_grads = bool(attach_set)
    fields = build_fields(
        land, params,
        with_gradients=need_grads, norm_c=norm_c,
        factor_site=factor_site, slope_units=slope_units,
    )

    series: List[StepStats] = []
    snapshots: List[Tuple[int, FireState]] = []
    pending = list(schedule)
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for s in range(1, steps + 1):
            while pending and pending[0].apply_at_step == s:
                upd = pending.pop(0)
                fields = build_fields(
                    land, params, wind=(upd.wind_speed, upd.wind_direction),
                    with_gradients=need_grads, norm_c=norm_c,
                    factor_site=factor_site, slope_units=slope_units,
                )
            step_forward(
                state, land, params, seed,
                attach=s in attach_set, tape=tape, fields=fields,
                threads=threads, executor=executor,
                norm_c=norm_c, factor_site=factor_site,
            )
            series.append(StepStats(
                t=s,
                burning=int(np.count_nonzero(state.burning)),
                burned=int(np.count_nonzero(state.burned)),
            ))
            if snapshot_every and s % snapshot_every == 0:
                snapshots.append((s, state.copy()))
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    return SimulationResult(state=state, series=series, snapshots=snapshots, tape=tape)
