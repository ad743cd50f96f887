"""Slow, independent reference implementations used as test oracles.

Everything here recomputes model quantities with per-cell Python loops and
the scalar helper functions, deliberately avoiding the vectorized kernel
paths it is used to check.
"""

import numpy as np

from pyrocell import (
    Channel,
    ModelParams,
    ignition_prob,
    new_fire_state,
    normalize_prob,
    propagate_prob,
    uniform_draw,
)
from pyrocell.kernel import NEIGHBOR_POSITIONS


def reference_step(burning, burned, acc, land, params, seed, t,
                   norm_c=1.1486328125, factor_site="target"):
    """One CA step via per-cell loops; returns (burning, burned, acc)."""
    h, w = burning.shape
    nxt_burning = burning.copy()
    nxt_burned = burned.copy()
    nxt_acc = acc.copy()
    for r in range(h):
        for c in range(w):
            if burning[r, c]:
                if uniform_draw(seed, t, r, c, Channel.CONTINUE) >= params.p_continue:
                    nxt_burning[r, c] = False
                    nxt_burned[r, c] = True
            elif not burned[r, c]:
                probs = []
                for pr, pc_ in NEIGHBOR_POSITIONS:
                    sr, sc = r + pr, c + pc_
                    if 0 <= sr < h and 0 <= sc < w and burning[sr, sc]:
                        raw = propagate_prob(params, land, (sr, sc), (r, c), factor_site)
                        probs.append(float(normalize_prob(raw, norm_c)))
                p = ignition_prob(probs)
                if uniform_draw(seed, t, r, c, Channel.IGNITE) < p:
                    nxt_burning[r, c] = True
                    nxt_acc[r, c] = p
    return nxt_burning, nxt_burned, nxt_acc


def reference_run(land, params, init, steps, seed, norm_c=1.1486328125,
                  factor_site="target"):
    """Full reference trajectory; returns the per-step (burning, burned,
    acc) triples including the initial state at index 0."""
    state = new_fire_state(init, land)
    burning, burned, acc = state.burning, state.burned, state.accumulator
    trajectory = [(burning.copy(), burned.copy(), acc.copy())]
    for t in range(steps):
        burning, burned, acc = reference_step(
            burning, burned, acc, land, params, seed, t, norm_c, factor_site)
        trajectory.append((burning.copy(), burned.copy(), acc.copy()))
    return trajectory


def land_with_wind(land, wind):
    """Copy of a landscape with its wind fields replaced."""
    from pyrocell import Landscape

    return Landscape(
        wind_speed=wind[0], wind_direction=wind[1], slope=land.slope,
        canopy=land.canopy, density=land.density, cell_side=land.cell_side)


def extract_transitions(land, params, init, steps, seed, wind_schedule=()):
    """Realized transitions of a kernel run: per step, the effective
    landscape, the pre-step burning mask, and the newly ignited cells."""
    from pyrocell import build_fields, step_forward

    state = new_fire_state(np.asarray(init, dtype=bool), land)
    effective = land
    fields = build_fields(effective, params, with_gradients=False)
    pending = sorted(wind_schedule, key=lambda u: u.apply_at_step)
    transitions = []
    for s in range(1, steps + 1):
        while pending and pending[0].apply_at_step == s:
            upd = pending.pop(0)
            effective = land_with_wind(land, (upd.wind_speed, upd.wind_direction))
            fields = build_fields(effective, params, with_gradients=False)
        prev_burning = state.burning.copy()
        prev_acc = state.accumulator.copy()
        step_forward(state, effective, params, seed, fields=fields)
        newly = np.argwhere(state.accumulator != prev_acc)
        transitions.append(
            (effective, prev_burning, [tuple(int(v) for v in cell) for cell in newly]))
    return state, transitions


def frozen_trajectory_loss(theta, p_continue, transitions, init, target,
                           norm_c=1.1486328125, factor_site="target"):
    """Total loss with the realized ignition decisions frozen: probabilities
    are recomputed from theta = (c1, c2, a, p_h), but which cells ignited
    when is taken from the recorded transitions."""
    from pyrocell import combined_loss

    c1, c2, a, p_h = theta
    params = ModelParams(c1=float(c1), c2=float(c2), a=float(a), p_h=float(p_h),
                         p_continue=p_continue)
    init = np.asarray(init, dtype=bool)
    h, w = init.shape
    acc = np.zeros((h, w))
    acc[init] = 1.0
    for effective_land, prev_burning, ignited in transitions:
        for r, c in ignited:
            probs = []
            for pr, pc_ in NEIGHBOR_POSITIONS:
                sr, sc = r + pr, c + pc_
                if 0 <= sr < h and 0 <= sc < w and prev_burning[sr, sc]:
                    raw = propagate_prob(params, effective_land, (sr, sc), (r, c),
                                         factor_site)
                    probs.append(float(normalize_prob(raw, norm_c)))
            acc[r, c] = ignition_prob(probs)
    breakdown, _ = combined_loss(acc, target)
    return breakdown.total


def frozen_fd_gradient(params, transitions, init, target, h_step=1e-6,
                       norm_c=1.1486328125, factor_site="target"):
    """Central finite differences of the frozen-trajectory loss."""
    theta0 = params.as_array()
    grad = np.zeros(4)
    for i in range(4):
        plus = theta0.copy()
        plus[i] += h_step
        minus = theta0.copy()
        minus[i] -= h_step
        grad[i] = (
            frozen_trajectory_loss(plus, params.p_continue, transitions,
                                   init, target, norm_c, factor_site)
            - frozen_trajectory_loss(minus, params.p_continue, transitions,
                                     init, target, norm_c, factor_site)
        ) / (2.0 * h_step)
    return grad
