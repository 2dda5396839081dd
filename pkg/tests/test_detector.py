import dataclasses
import math

import pytest

from src.bayes import BeliefState, Status
from src.detector import DetectorConfig, EntrapmentDetector, PriorMode
from src.errors import ConfigError, StepError
from tests.factories import make_sample


@pytest.fixture
def detector(detector_config, models):
    return EntrapmentDetector(detector_config, models)


def test_initial_belief_is_uniform(detector):
    assert detector.belief == BeliefState(0.5, 0.5)
    assert detector.persistence == 0


@pytest.mark.parametrize("overrides", [
    {"clamp_eps": 0.6},
    {"clamp_eps": 0.0},
    {"decision_threshold": 0.5},
    {"decision_threshold": 1.0},
    {"persistence_steps": 0},
    {"persistence_steps": 2.5},
    {"prior_mode": "sometimes"},
])
def test_invalid_config_is_rejected(overrides):
    with pytest.raises(ConfigError):
        DetectorConfig(**overrides)


def test_config_is_stored_verbatim(models):
    config = DetectorConfig(decision_threshold=0.9, persistence_steps=10)
    detector = EntrapmentDetector(config, models)
    assert detector.config.decision_threshold == 0.9
    assert detector.config.persistence_steps == 10


def test_entrapment_evidence_compounds(detector, entrapped_sample):
    estimates = [detector.step(entrapped_sample(10 * i)) for i in range(3)]
    assert estimates[0].belief.p_diverged == pytest.approx(0.890, abs=2e-3)
    assert estimates[0].belief.p_stopped == pytest.approx(0.99, abs=1e-3)
    assert estimates[-1].status.p_entrapped > 0.9


def test_decision_needs_persistence(detector, entrapped_sample):
    decided = [detector.step(entrapped_sample(10 * i)).decided_entrapped for i in range(20)]
    first = decided.index(True)
    # p_entrapped crosses the threshold on the second step, then ten in a row are needed
    assert first == 10
    assert all(decided[first:])


def test_nominal_driving_never_decides(detector, nominal_sample):
    for i in range(10000):
        estimate = detector.step(nominal_sample(10 * i))
        assert not estimate.decided_entrapped
    assert estimate.status.argmax() is Status.MOVING


def test_single_spike_does_not_fire(detector, entrapped_sample, nominal_sample):
    detector.step(entrapped_sample(0))
    for i in range(1, 50):
        assert not detector.step(nominal_sample(10 * i)).decided_entrapped


def test_belief_stays_clamped(detector, entrapped_sample, nominal_sample):
    eps = detector.config.clamp_eps
    for i in range(200):
        sample = entrapped_sample(10 * i) if i < 100 else nominal_sample(10 * i)
        belief = detector.step(sample).belief
        assert eps <= belief.p_diverged <= 1 - eps
        assert eps <= belief.p_stopped <= 1 - eps


def test_recovery_from_saturation(detector, entrapped_sample, nominal_sample):
    for i in range(50):
        detector.step(entrapped_sample(10 * i))
    assert detector.belief.p_diverged == pytest.approx(0.99)

    below = [detector.step(nominal_sample(1000 + 10 * i)).belief.p_diverged < 0.5 for i in range(5)]
    assert below[0]


def test_decision_implies_entrapped_argmax(detector, scripted_trace):
    for estimate in detector.run(scripted_trace.samples):
        if estimate.decided_entrapped:
            assert estimate.status.argmax() is Status.ENTRAPPED


def test_status_follows_belief(detector, scripted_trace):
    for estimate in detector.run(scripted_trace.samples[:700]):
        s = estimate.status
        assert s.p_entrapped + s.p_slipping == estimate.belief.p_diverged
        assert s.p_entrapped + s.p_slipping + s.p_moving + s.p_stopped == pytest.approx(1.0, abs=1e-9)


def test_timestamps_must_increase(detector, nominal_sample):
    detector.step(nominal_sample(100))
    with pytest.raises(StepError):
        detector.step(nominal_sample(100))
    with pytest.raises(StepError):
        detector.step(nominal_sample(50))


def test_dropout_holds_belief_and_counter(detector, entrapped_sample):
    for i in range(5):
        detector.step(entrapped_sample(10 * i))
    belief, counter = detector.belief, detector.persistence

    estimate = detector.step(make_sample(50, wheel=4.0, meas=None))
    assert estimate.evidence_degenerate
    assert math.isnan(estimate.q_value) and math.isnan(estimate.speed)
    assert estimate.belief == belief
    assert detector.persistence == counter


def test_reset(detector, models, entrapped_sample, scripted_trace):
    list(detector.run(scripted_trace.samples))
    detector.reset().reset()
    assert detector.belief == BeliefState(0.5, 0.5)
    assert detector.persistence == 0
    fresh = EntrapmentDetector(detector.config, models)
    assert detector.step(entrapped_sample(0)) == fresh.step(entrapped_sample(0))


def test_runs_are_deterministic(detector_config, models, scripted_trace):
    first = list(EntrapmentDetector(detector_config, models).run(scripted_trace.samples))
    second = list(EntrapmentDetector(detector_config, models).run(scripted_trace.samples))
    assert first == second


def test_fixed_prior_mode_ignores_history(detector_config, models, entrapped_sample):
    detector = EntrapmentDetector(dataclasses.replace(detector_config, prior_mode=PriorMode.FIXED), models)
    first = detector.step(entrapped_sample(0))
    later = [detector.step(entrapped_sample(10 * i)) for i in range(1, 5)]
    assert all(e.belief == first.belief for e in later)
