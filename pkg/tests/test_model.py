import numpy as np
import pytest

from pyrocell import (
    Landscape,
    ModelParams,
    clamp_params,
    new_fire_state,
    validate_landscape,
    validate_params,
)

from conftest import make_flat_landscape


class TestClampParams:
    def test_out_of_range_values_projected(self):
        p = ModelParams(a=1.4, c1=0.5, c2=-0.1, p_h=0.05, p_continue=0.5)
        q = clamp_params(p)
        assert (q.a, q.c1, q.c2, q.p_h) == (1.0, 0.5, 0.0, 0.2)
        assert q.p_continue == 0.5

    def test_in_range_unchanged(self):
        p = ModelParams(c1=0.3, c2=0.4, a=0.5, p_h=0.6, p_continue=0.7)
        assert clamp_params(p) == p

    def test_idempotent_on_random_params(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = ModelParams(*rng.uniform(-2, 2, 5))
            once = clamp_params(p)
            assert clamp_params(once) == once

    def test_p_continue_never_clamped(self):
        p = ModelParams(p_continue=7.0)
        assert clamp_params(p).p_continue == 7.0
        assert any("p_continue" in v for v in validate_params(p))


class TestValidateParams:
    def test_valid_params_pass(self):
        assert validate_params(ModelParams()) == []

    def test_non_finite_reported(self):
        assert validate_params(ModelParams(c1=float("nan"))) != []


class TestValidateLandscape:
    def test_all_zero_landscape_ok(self):
        land = make_flat_landscape(4)
        assert validate_landscape(land) == []

    def test_negative_wind_reported_with_position(self):
        land = make_flat_landscape(4)
        land.wind_speed[1, 2] = -1.0
        violations = validate_landscape(land)
        assert any("wind_speed negative at (1, 2)" in v for v in violations)

    def test_bad_slope_shape_reported(self):
        land = make_flat_landscape(4)
        bad = Landscape(
            wind_speed=land.wind_speed, wind_direction=land.wind_direction,
            slope=np.zeros((4, 4, 3, 2)), canopy=land.canopy, density=land.density,
        )
        assert any("slope shape" in v for v in validate_landscape(bad))

    def test_non_finite_reported(self):
        land = make_flat_landscape(4)
        land.canopy[0, 0] = np.inf
        assert any("canopy non-finite" in v for v in validate_landscape(land))

    def test_factor_below_minus_one_reported(self):
        land = make_flat_landscape(4)
        land.density[3, 3] = -1.5
        assert any("density below -1" in v for v in validate_landscape(land))


class TestNewFireState:
    def test_single_cell_init(self):
        init = np.zeros((5, 5), dtype=bool)
        init[2, 2] = True
        state = new_fire_state(init)
        assert np.count_nonzero(state.burning) == 1
        assert np.count_nonzero(state.burned) == 0
        assert state.accumulator[2, 2] == 1.0
        assert state.t == 0

    def test_block_init_accumulator(self):
        init = np.zeros((7, 7), dtype=bool)
        init[2:5, 2:5] = True
        state = new_fire_state(init)
        assert np.count_nonzero(state.accumulator == 1.0) == 9
        assert state.accumulator.sum() == 9.0

    def test_exclusivity_invariant(self):
        init = np.ones((3, 3), dtype=bool)
        state = new_fire_state(init)
        assert not np.any(state.burning & state.burned)

    def test_dimension_mismatch_raises(self):
        land = make_flat_landscape(4)
        with pytest.raises(ValueError, match="mask shape"):
            new_fire_state(np.zeros((5, 5), dtype=bool), land)
