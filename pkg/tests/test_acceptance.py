"""End-to-end checks on calibrated synthetic data with the shipped models."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.bayes import (
    fit_gaussian,
    fit_half_gaussian,
    load_models,
    posterior_divergence,
    posterior_movement,
    preprocess_diverged,
    status_distribution,
    two_class_posterior,
)
from src.cli import fit_classifier
from src.criteria import entrapped_ground_truth
from src.detector import EntrapmentDetector
from src.evaluator import step_frame, steady_state
from src.kinematics import JointState, RoverGeometry, ackermann_pair, assumed_velocity
from src.telemetry import Trace

ONSET = 600


@pytest.fixture
def shipped_models(model_path):
    return load_models(model_path)


def test_fitting_recovers_published_parameters(shipped_models):
    rng = np.random.Generator(np.random.PCG64(2024))
    n = 10000
    for name, model in shipped_models.entries().items():
        if model.kind.value == "gaussian":
            fitted = fit_gaussian(rng.normal(model.mu, model.sigma, n), name)
        else:
            fitted = fit_half_gaussian(stats.halfnorm.rvs(scale=model.sigma, size=n, random_state=rng), name)
        assert fitted.mu == pytest.approx(model.mu, abs=0.005), name
        assert fitted.var == pytest.approx(model.var, rel=0.1), name


def test_entrapment_detected_after_high_centering(scripted_trace, shipped_models, detector_config):
    estimates = list(EntrapmentDetector(detector_config, shipped_models).run(scripted_trace.samples))
    entrapped = [e.status.p_entrapped for e in estimates]
    assert max(entrapped[10:ONSET]) < 0.1
    assert any(p >= 0.9 for p in entrapped[ONSET:ONSET + 50])

    decided = [e.decided_entrapped for e in estimates]
    first = decided.index(True)
    assert ONSET <= first <= ONSET + 50


def test_posteriors_are_normalized(shipped_models):
    rng = np.random.default_rng(99)
    for prior, q, speed, p_d, p_s in zip(rng.uniform(0.01, 0.99, 10000), rng.uniform(0, 1, 10000),
                                         rng.uniform(0, 0.6, 10000), rng.uniform(0, 1, 10000),
                                         rng.uniform(0, 1, 10000)):
        a = shipped_models.divergence_diverged.log_likelihood(q)
        b = shipped_models.divergence_consistent.log_likelihood(q)
        total = two_class_posterior(prior, a, b).probability + two_class_posterior(1 - prior, b, a).probability
        assert total == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= posterior_divergence(prior, q, shipped_models).probability <= 1.0
        assert 0.0 <= posterior_movement(prior, speed, shipped_models).probability <= 1.0

        s = status_distribution(p_d, p_s)
        assert s.p_entrapped + s.p_slipping + s.p_moving + s.p_stopped == pytest.approx(1.0, abs=1e-9)
        assert s.p_entrapped + s.p_slipping == p_d


def test_shipped_densities_integrate_to_one(shipped_models):
    for name, model in shipped_models.entries().items():
        low, high = model.support()
        mass, _ = integrate.quad(lambda x: math.exp(model.log_likelihood(x)), low, high,
                                 points=[model.mu] if low < model.mu < high else None)
        assert mass == pytest.approx(1.0, abs=1e-6), name


def test_classifier_agrees_with_ground_truth_criterion(corpus, shipped_models, detector_config):
    agree = total = 0
    for trace in corpus.values():
        frame = step_frame(trace, shipped_models, detector_config)
        steady = steady_state(frame["label"], 20)
        called = frame.loc[steady, "argmax"].eq("entrapped")
        agree += int(called.eq(frame.loc[steady, "verdict"]).sum())
        total += int(steady.sum())
    assert agree / total >= 0.95


def test_fitting_a_calibrated_corpus(corpus, geometry, detector_config):
    merged = Trace([s for trace in corpus.values() for s in trace.samples])
    fitted = fit_classifier(merged, geometry, detector_config.weights)
    assert fitted.divergence_diverged.mu == pytest.approx(0.426055, rel=0.2)
    assert fitted.movement_moving.mu == pytest.approx(0.252618, rel=0.2)


def test_recovery_bound_matches_scalar_recursion(shipped_models, detector_config, entrapped_sample, nominal_sample):
    detector = EntrapmentDetector(detector_config, shipped_models)
    for i in range(50):
        detector.step(entrapped_sample(10 * i))
    assert detector.belief.p_diverged == pytest.approx(1 - detector_config.clamp_eps)

    # scalar oracle: iterate Bayes on q = 0 from the clamped prior
    prior, oracle_steps = 1 - detector_config.clamp_eps, 0
    while prior >= 0.5:
        prior = posterior_divergence(prior, 0.0, shipped_models).probability
        prior = min(max(prior, detector_config.clamp_eps), 1 - detector_config.clamp_eps)
        oracle_steps += 1

    steps = 0
    while detector.belief.p_diverged >= 0.5:
        detector.step(nominal_sample(1000 + 10 * steps))
        steps += 1
    assert steps == oracle_steps
    assert steps <= 5


def test_zero_wheel_rates_mean_zero_velocity():
    # zero input on random steering; linearity is covered with the kinematics tests
    geom = RoverGeometry()
    rng = np.random.default_rng(1)
    for delta in rng.uniform(-0.5, 0.5, 100):
        v = assumed_velocity(JointState((0.0,) * 4, ackermann_pair(delta, geom)), geom)
        assert (v.vx, v.vy, v.omega) == (0.0, 0.0, 0.0)


def test_preprocessing_cutoff_is_inclusive():
    assert preprocess_diverged([0.05, 0.4, 0.075, 0.5]).tolist() == [0.4, 0.5]


def test_ground_truth_verdict_on_the_scripted_trace(scripted_trace, geometry, detector_config):
    verdicts = [entrapped_ground_truth(assumed_velocity(s.joints, geometry), s.ground_truth, detector_config.tolerances)
                for s in scripted_trace.samples]
    assert not any(verdicts[:ONSET])
    assert all(verdicts[ONSET:])
