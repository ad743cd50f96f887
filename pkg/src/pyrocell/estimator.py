"""Scikit-learn style facade: fit() calibrates the spread parameters
against observed burn maps, predict() runs the forward simulation."""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .calibration import Observation, ObservationSchedule, calibrate
from .kernel import DEFAULT_NORM_C, run_simulation
from .losses import jaccard_index
from .model import Landscape, ModelParams, StepRings, validate_landscape


class FireSpreadEstimator(BaseEstimator):
    """Differentiable cellular-automaton fire spread model.

    Parameters follow the usual estimator conventions: everything passed
    to __init__ is a hyperparameter visible to get_params/set_params and
    clone; calibration results land in trailing-underscore attributes.

    X is a Landscape; y (for fit) is a sequence of boolean burn maps
    observed every steps_update_interval simulation steps.
    """

    def __init__(
        self,
        c1: float = 0.045,
        c2: float = 0.131,
        a: float = 0.078,
        p_h: float = 0.58,
        p_continue: float = 0.5,
        rings: Tuple[int, int, int] = (2, 5, 10),
        learning_rate: float = 5e-3,
        weight_decay: float = 0.0,
        max_epochs: int = 10,
        steps_update_interval: int = 10,
        base_seed: int = 0,
        threads: int = 1,
        norm_c: float = DEFAULT_NORM_C,
        factor_site: str = "target",
        slope_units: str = "degrees",
    ):
        self.c1 = c1
        self.c2 = c2
        self.a = a
        self.p_h = p_h
        self.p_continue = p_continue
        self.rings = rings
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.max_epochs = max_epochs
        self.steps_update_interval = steps_update_interval
        self.base_seed = base_seed
        self.threads = threads
        self.norm_c = norm_c
        self.factor_site = factor_site
        self.slope_units = slope_units

    def _initial_params(self) -> ModelParams:
        return ModelParams(
            c1=self.c1, c2=self.c2, a=self.a, p_h=self.p_h,
            p_continue=self.p_continue,
        )

    def _check_landscape(self, X: Landscape) -> Landscape:
        if not isinstance(X, Landscape):
            raise TypeError(f"X must be a Landscape, got {type(X).__name__}")
        problems = validate_landscape(X)
        if problems:
            raise ValueError("invalid landscape: " + "; ".join(problems))
        return X

    def fit(
        self,
        X: Landscape,
        y: Sequence[np.ndarray],
        init: Optional[np.ndarray] = None,
        wind: Optional[Sequence[Optional[Tuple[np.ndarray, np.ndarray]]]] = None,
    ) -> "FireSpreadEstimator":
        """Calibrate (c1, c2, a, p_h) against observed burn maps."""
        land = self._check_landscape(X)
        if init is None:
            raise ValueError("fit requires an initial fire mask (init=...)")
        observations: List[Observation] = []
        for k, target in enumerate(y):
            obs_wind = wind[k] if wind is not None else None
            observations.append(Observation(
                target=np.asarray(target, dtype=bool), wind=obs_wind,
            ))
        schedule = ObservationSchedule(
            observations=observations,
            steps_update_interval=self.steps_update_interval,
        )
        result = calibrate(
            land, np.asarray(init, dtype=bool), schedule,
            self._initial_params(), StepRings(*self.rings),
            max_epochs=self.max_epochs, base_seed=self.base_seed,
            learning_rate=self.learning_rate, weight_decay=self.weight_decay,
            threads=self.threads, norm_c=self.norm_c,
            factor_site=self.factor_site, slope_units=self.slope_units,
        )
        self.params_ = result.best_params
        self.result_ = result
        return self

    def fitted_params(self) -> ModelParams:
        """Calibrated parameters; falls back to the configured initial
        values before fit() has run."""
        return getattr(self, "params_", self._initial_params())

    def predict(
        self,
        X: Landscape,
        init: Optional[np.ndarray] = None,
        steps: int = 100,
        seed: Optional[int] = None,
    ) -> np.ndarray:
        """Simulate forward and return the (2, H, W) boolean state:
        channel 0 burning, channel 1 burned."""
        land = self._check_landscape(X)
        if init is None:
            raise ValueError("predict requires an initial fire mask (init=...)")
        sim = run_simulation(
            land, self.fitted_params(), np.asarray(init, dtype=bool),
            steps, self.base_seed if seed is None else seed,
            threads=self.threads, norm_c=self.norm_c,
            factor_site=self.factor_site, slope_units=self.slope_units,
        )
        return np.stack([sim.state.burning, sim.state.burned])

    def score(
        self,
        X: Landscape,
        y: np.ndarray,
        init: Optional[np.ndarray] = None,
        steps: int = 100,
        seed: Optional[int] = None,
    ) -> float:
        """Jaccard index of the predicted affected region against y."""
        pred = self.predict(X, init=init, steps=steps, seed=seed)
        return jaccard_index(pred[0] | pred[1], np.asarray(y, dtype=bool))
