"""Parameter calibration: AdamW updates driven by epoch-seed replay.

Every iteration re-simulates from the initial state with the latest
parameters and the epoch's saved seed, so that parameter updates, not
randomness, drive loss changes between iterations of the same epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .kernel import DEFAULT_NORM_C, WindUpdate, run_simulation
from .losses import combined_loss, jaccard_index, manhattan_distance
from .model import (
    Landscape,
    ModelParams,
    RunManifest,
    StepRings,
    clamp_params,
    validate_params,
)
from .rng import derive_epoch_seed
from .tape import Tape, attachment_plan, backward_params


@dataclass
class AdamWState:
    """Decoupled-weight-decay Adam over the four calibratable scalars."""

    learning_rate: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    m: np.ndarray = field(default_factory=lambda: np.zeros(4))
    v: np.ndarray = field(default_factory=lambda: np.zeros(4))
    step_count: int = 0


def adamw_update(
    state: AdamWState, params: ModelParams, grads: np.ndarray
) -> Tuple[AdamWState, ModelParams]:
    """One AdamW step on (c1, c2, a, p_h) with bias correction; p_continue
    is untouched. Raises on non-finite gradients instead of updating."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != (4,):
        raise ValueError(f"expected 4 gradients, got shape {grads.shape}")
    if not np.all(np.isfinite(grads)):
        raise ValueError(f"non-finite gradient: {grads}")

    state.step_count += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step_count)
    v_hat = state.v / (1.0 - state.beta2 ** state.step_count)

    theta = params.as_array()
    theta = theta - state.learning_rate * (
        m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * theta
    )
    return state, params.with_calibrated(theta)


@dataclass(frozen=True)
class Observation:
    """One observed burn map; wind, when present, applies from the start
    of the interval leading up to this observation."""

    target: np.ndarray
    wind: Optional[Tuple[np.ndarray, np.ndarray]] = None


@dataclass
class ObservationSchedule:
    observations: List[Observation]
    steps_update_interval: int

    def __post_init__(self):
        if self.steps_update_interval < 1:
            raise ValueError("steps_update_interval must be >= 1")

    @property
    def max_iterations(self) -> int:
        return len(self.observations)

    def wind_updates(self, upto_iteration: int) -> List[WindUpdate]:
        updates = []
        for k in range(1, upto_iteration + 1):
            obs = self.observations[k - 1]
            if obs.wind is not None:
                updates.append(WindUpdate(
                    apply_at_step=(k - 1) * self.steps_update_interval + 1,
                    wind_speed=obs.wind[0],
                    wind_direction=obs.wind[1],
                ))
        return updates


@dataclass
class IterationRecord:
    epoch: int
    iteration: int
    loss: float
    bce: float
    mse: float
    jaccard: float
    manhattan: int
    params_used: ModelParams


@dataclass
class CalibrationResult:
    best_params: ModelParams
    best_loss: float
    records: List[IterationRecord]
    manifest: RunManifest
    aborted_epochs: List[Tuple[int, str]] = field(default_factory=list)


def calibrate(
    land: Landscape,
    init: np.ndarray,
    schedule: ObservationSchedule,
    init_params: ModelParams,
    rings: StepRings,
    max_epochs: int,
    base_seed: int,
    learning_rate: float = 5e-3,
    weight_decay: float = 0.0,
    *,
    threads: int = 1,
    norm_c: float = DEFAULT_NORM_C,
    factor_site: str = "target",
    slope_units: str = "degrees",
) -> CalibrationResult:
    """Gradient-descent calibration of (c1, c2, a, p_h).

    Per epoch: derive and save a seed; per iteration it, re-simulate
    it * steps_update_interval steps from the initial state with the
    latest parameters and that same seed, attaching the ring-selected
    steps; compare the accumulator to the iteration's burn map; step the
    optimizer; clamp. The parameters whose end-of-epoch evaluation had the
    lowest loss are returned.
    """
    if schedule.max_iterations == 0:
        raise ValueError("observation schedule is empty")
    problems = validate_params(init_params)
    if problems:
        raise ValueError("; ".join(problems))
    for obs in schedule.observations:
        if obs.target.shape != land.shape:
            raise ValueError(
                f"target shape {obs.target.shape} != landscape {land.shape}"
            )

    interval = schedule.steps_update_interval
    manifest = RunManifest(
        base_seed=base_seed,
        steps_update_interval=interval,
        max_epochs=max_epochs,
        max_iterations=schedule.max_iterations,
        learning_rate=learning_rate,
    )

    params = init_params
    opt = AdamWState(learning_rate=learning_rate, weight_decay=weight_decay)
    records: List[IterationRecord] = []
    aborted: List[Tuple[int, str]] = []
    best_loss = np.inf
    best_params = init_params
    last_finite_params = init_params

    target_counts = [int(np.count_nonzero(o.target)) for o in schedule.observations]

    for epoch in range(1, max_epochs + 1):
        epoch_seed = derive_epoch_seed(base_seed, epoch)
        manifest.epoch_seeds.append(epoch_seed)

        for it in range(1, schedule.max_iterations + 1):
            total_steps = it * interval
            plan = attachment_plan(total_steps, rings)
            tape = Tape(land.shape)
            sim = run_simulation(
                land, params, init, total_steps, epoch_seed,
                wind_schedule=schedule.wind_updates(it),
                attach_steps=plan, tape=tape,
                threads=threads, norm_c=norm_c, factor_site=factor_site,
                slope_units=slope_units,
            )
            target = schedule.observations[it - 1].target
            breakdown, dl_dacc = combined_loss(sim.state.accumulator, target)
            loss = breakdown.total

            if not np.isfinite(loss):
                params = last_finite_params
                aborted.append((epoch, f"non-finite loss at iteration {it}"))
                break

            params_used = params
            affected = sim.state.affected()
            jac = jaccard_index(affected, target)
            pred_counts = [sim.series[k * interval - 1].affected for k in range(1, it + 1)]
            man = manhattan_distance(pred_counts, target_counts[:it])
            records.append(IterationRecord(
                epoch=epoch, iteration=it, loss=loss,
                bce=breakdown.bce_term, mse=breakdown.mse_term,
                jaccard=jac, manhattan=man, params_used=params_used,
            ))

            if it == schedule.max_iterations and loss < best_loss:
                best_loss = loss
                best_params = params_used

            grads = backward_params(tape, dl_dacc, norm_c)
            if not np.all(np.isfinite(grads)):
                params = last_finite_params
                aborted.append((epoch, f"non-finite gradient at iteration {it}"))
                break

            last_finite_params = params_used
            opt, params = adamw_update(opt, params, grads)
            params = clamp_params(params)
            manifest.record(epoch, it, params)

    return CalibrationResult(
        best_params=best_params,
        best_loss=float(best_loss) if np.isfinite(best_loss) else float("inf"),
        records=records,
        manifest=manifest,
        aborted_epochs=aborted,
    )
