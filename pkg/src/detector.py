"""
Streaming entrapment detector.

Per sample: wheel odometry -> assumed velocity -> weighted divergence Q and
measured speed -> Bayes updates of Pr(D = diverged) and Pr(M = stopped) ->
four-way status. Posteriors feed back as the next priors (clamped so the
belief can always recover) and a persistence gate debounces the binary
entrapment decision.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from src.bayes import (
    BeliefState,
    ClassifierModels,
    StatusDistribution,
    posterior_divergence,
    posterior_movement,
    status_distribution,
)
from src.criteria import DivergenceWeights, Tolerances, velocity_error, weighted_divergence
from src.errors import ConfigError, StepError
from src.kinematics import RoverGeometry, assumed_velocity
from src.telemetry import TelemetrySample

logger = logging.getLogger(__name__)


class PriorMode(str, Enum):
    RECURSIVE = "recursive"  # previous posterior becomes the next prior
    FIXED = "fixed"          # uniform prior on every step


@dataclass(frozen=True)
class DetectorConfig:
    clamp_eps: float = 0.01
    decision_threshold: float = 0.9
    persistence_steps: int = 10
    weights: DivergenceWeights = field(default_factory=DivergenceWeights)
    tolerances: Tolerances = field(default_factory=Tolerances)
    geometry: RoverGeometry = field(default_factory=RoverGeometry)
    sample_period_ms: int = 10
    prior_mode: PriorMode = PriorMode.RECURSIVE

    def __post_init__(self):
        if not 0 < self.clamp_eps < 0.5:
            raise ConfigError(f"detector.clamp_eps must lie in (0, 0.5), got {self.clamp_eps!r}")
        if not 0.5 < self.decision_threshold < 1:
            raise ConfigError(
                f"detector.decision_threshold must lie in (0.5, 1), got {self.decision_threshold!r}"
            )
        if isinstance(self.persistence_steps, bool) or int(self.persistence_steps) != self.persistence_steps \
                or self.persistence_steps < 1:
            raise ConfigError(f"detector.persistence_steps must be an integer >= 1, got {self.persistence_steps!r}")
        if self.sample_period_ms <= 0:
            raise ConfigError(f"detector.sample_period_ms must be positive, got {self.sample_period_ms!r}")
        try:
            object.__setattr__(self, "prior_mode", PriorMode(self.prior_mode))
        except ValueError:
            raise ConfigError(f"detector.prior_mode must be recursive or fixed, got {self.prior_mode!r}")
        object.__setattr__(self, "persistence_steps", int(self.persistence_steps))


@dataclass(frozen=True)
class StatusEstimate:
    t: int  # ms
    q_value: float
    speed: float
    belief: BeliefState
    status: StatusDistribution
    decided_entrapped: bool
    evidence_degenerate: bool


INITIAL_BELIEF = BeliefState(0.5, 0.5)


class EntrapmentDetector:
    """Single-owner detector state; call `step` once per telemetry sample."""

    def __init__(self, config: DetectorConfig, models: ClassifierModels):
        self.config = config
        self.models = models
        self.reset()

    def reset(self) -> "EntrapmentDetector":
        self.belief = INITIAL_BELIEF
        self.persistence = 0
        self.last_t: Optional[int] = None
        return self

    def _prior(self) -> BeliefState:
        if self.config.prior_mode is PriorMode.FIXED:
            return INITIAL_BELIEF
        return self.belief

    def step(self, sample: TelemetrySample) -> StatusEstimate:
        if self.last_t is not None and sample.t_ms <= self.last_t:
            raise StepError(f"timestamp {sample.t_ms} ms does not follow {self.last_t} ms")
        cfg = self.config
        if self.last_t is not None and sample.t_ms - self.last_t > 2 * cfg.sample_period_ms:
            logger.debug("Gap of %d ms before t=%d ms", sample.t_ms - self.last_t, sample.t_ms)
        self.last_t = sample.t_ms

        measured = sample.measured
        if measured is None:
            # dropout: hold belief and persistence counter
            logger.debug("No measured velocity at t=%d ms, carrying belief forward", sample.t_ms)
            return StatusEstimate(
                t=sample.t_ms,
                q_value=float("nan"),
                speed=float("nan"),
                belief=self.belief,
                status=status_distribution(self.belief.p_diverged, self.belief.p_stopped),
                decided_entrapped=self.persistence >= cfg.persistence_steps,
                evidence_degenerate=True,
            )

        assumed = assumed_velocity(sample.joints, cfg.geometry)
        q = weighted_divergence(velocity_error(assumed, measured), cfg.weights)
        speed = measured.speed

        prior = self._prior()
        divergence = posterior_divergence(prior.p_diverged, q, self.models)
        movement = posterior_movement(prior.p_stopped, speed, self.models)
        self.belief = BeliefState(divergence.probability, movement.probability).clamped(cfg.clamp_eps)

        status = status_distribution(self.belief.p_diverged, self.belief.p_stopped)
        if status.p_entrapped >= cfg.decision_threshold:
            self.persistence += 1
        else:
            self.persistence = 0

        return StatusEstimate(
            t=sample.t_ms,
            q_value=q,
            speed=speed,
            belief=self.belief,
            status=status,
            decided_entrapped=self.persistence >= cfg.persistence_steps,
            evidence_degenerate=divergence.degenerate or movement.degenerate,
        )

    def run(self, samples: Iterable[TelemetrySample]) -> Iterator[StatusEstimate]:
        for sample in samples:
            yield self.step(sample)
