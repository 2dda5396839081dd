import math

import numpy as np
import pytest

from src.criteria import (
    DivergenceWeights,
    Tolerances,
    VelocityError,
    entrapped_ground_truth,
    entrapped_measured,
    measurement_valid,
    stacked_norm,
    velocity_error,
    weighted_divergence,
)
from src.errors import ValidationError
from src.kinematics import TaskVelocity

STILL = TaskVelocity()
DRIVING = TaskVelocity(0.25, 0.0, 0.0)


@pytest.fixture
def tol():
    return Tolerances()


def test_tolerances_require_mg_below_ag():
    with pytest.raises(ValidationError, match="eps_mg"):
        Tolerances(eps_mg=0.2, eps_ag=0.15)
    with pytest.raises(ValidationError):
        Tolerances(eps_zero=0.0)


def test_stacked_norm_scales_yaw_rate():
    assert stacked_norm(TaskVelocity(0.0, 0.0, 0.5), 0.4) == pytest.approx(0.2)
    assert stacked_norm(TaskVelocity(0.3, 0.4, 0.0), 0.4) == pytest.approx(0.5)


def test_spinning_wheels_on_a_still_rover_are_entrapment(tol):
    assert entrapped_ground_truth(DRIVING, STILL, tol)


def test_moving_rover_is_not_entrapped(tol):
    assert not entrapped_ground_truth(DRIVING, TaskVelocity(0.2, 0.0, 0.0), tol)


def test_idle_rover_is_not_entrapped(tol):
    assert not entrapped_ground_truth(STILL, STILL, tol)


def test_boundaries_are_strict(tol):
    # divergence exactly eps_ag
    assert not entrapped_ground_truth(TaskVelocity(0.15, 0.0, 0.0), STILL, tol)
    # ground-truth speed exactly eps_zero
    assert not entrapped_ground_truth(TaskVelocity(0.5, 0.0, 0.0), TaskVelocity(0.05, 0.0, 0.0), tol)


def test_turning_in_place_counts_as_motion(tol):
    assert not entrapped_ground_truth(DRIVING, TaskVelocity(0.0, 0.0, 0.2), tol)


def test_measured_predicate_follows_the_ground_truth_one(tol):
    measured = TaskVelocity(0.01, -0.005, 0.0)
    assert entrapped_measured(DRIVING, measured, tol) == entrapped_ground_truth(DRIVING, measured, tol)
    assert entrapped_measured(DRIVING, measured, tol)


def test_measurement_valid(tol):
    assert measurement_valid(TaskVelocity(0.01, 0.0, 0.0), STILL, tol)
    assert not measurement_valid(TaskVelocity(0.02, 0.0, 0.0), STILL, tol)


def test_velocity_error_components():
    err = velocity_error(TaskVelocity(0.3, 0.0, 0.1), TaskVelocity(0.0, 0.4, -0.1))
    assert err.e_v == pytest.approx(0.5)
    assert err.e_omega == pytest.approx(0.2)


def test_weighted_divergence_identity_is_euclidean():
    assert weighted_divergence(VelocityError(0.3, 0.4), DivergenceWeights.identity()) == pytest.approx(0.5)


def test_weighted_divergence_respects_weights():
    w = DivergenceWeights.from_row_major([4.0, 0.0, 0.0, 0.0])
    assert weighted_divergence(VelocityError(0.3, 0.4), w) == pytest.approx(0.6)


def test_weighted_divergence_mixed_diagonal():
    w = DivergenceWeights.from_row_major([4.0, 0.0, 0.0, 1.0])
    assert weighted_divergence(VelocityError(1.0, 2.0), w) == pytest.approx(math.sqrt(8), rel=1e-12)


def test_uniform_weights_scale_the_euclidean_norm():
    rng = np.random.default_rng(5)
    for e_v, e_omega, c in zip(rng.uniform(0, 2, 200), rng.uniform(0, 2, 200), rng.uniform(0, 10, 200)):
        w = DivergenceWeights.from_row_major([c, 0.0, 0.0, c])
        expected = math.sqrt(c) * math.hypot(e_v, e_omega)
        assert weighted_divergence(VelocityError(e_v, e_omega), w) == pytest.approx(expected, rel=1e-12, abs=0)
    assert weighted_divergence(VelocityError(0.3, 0.4), DivergenceWeights((0.0, 0.0, 0.0, 0.0))) == 0.0


def test_divergence_grows_with_linear_error():
    rng = np.random.default_rng(6)
    for a, b, e_omega in zip(rng.uniform(0, 5, 50), rng.uniform(0, 5, 50), rng.uniform(0, 1, 50)):
        w = DivergenceWeights.from_row_major([a, 0.0, 0.0, b])
        values = [weighted_divergence(VelocityError(e_v, e_omega), w) for e_v in np.linspace(0, 2, 41)]
        assert all(later >= earlier for earlier, later in zip(values, values[1:]))


def test_weights_must_be_symmetric_psd():
    with pytest.raises(ValidationError, match="symmetric"):
        DivergenceWeights((1.0, 0.5, 0.0, 1.0))
    with pytest.raises(ValidationError, match="semi-definite"):
        DivergenceWeights((1.0, 2.0, 2.0, 1.0))
    with pytest.raises(ValidationError):
        DivergenceWeights((1.0, 0.0, 1.0))
