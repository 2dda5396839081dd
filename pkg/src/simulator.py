"""
Deterministic synthetic traces for the four data-collection scenarios
(flat, rocky, entrapped-and-jiggling, strictly high-centered) and scripted
sequences of them.

Noise model
-----------
- encoder_sigma: white noise on every wheel-rate reading (rad/s).
- terrain_v_sigma: real disturbance of the ground-truth linear velocity while
  driving (flat 0.02 m/s, rocky 0.08 m/s per axis, truncated at 2.5 sigma).
- tracker_v_sigma / tracker_omega_sigma: error of the external tracker against
  ground truth. The 2D linear error is truncated radially at 2.5 sigma and the
  yaw-rate error at 2.5 sigma, so with the defaults the stacked tracker error
  stays below eps_mg = 0.02 m/s on every sample.
- free_spin_gain: unloaded wheels of an entrapped rover spin faster than the
  commanded rate.
- jiggle: sinusoidal longitudinal motion of a partially entrapped rover.

Random numbers come from numpy's PCG64 generator seeded with Scenario.seed.
All draws are made up front in a fixed order, so a trace depends only on
(scenario, geometry).
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.bayes import Status
from src.criteria import DivergenceWeights
from src.errors import ValidationError
from src.kinematics import JointState, RoverGeometry, TaskVelocity, ackermann_pair, assumed_velocity
from src.telemetry import TelemetrySample, Trace, TraceMetadata, extract_training_sets

logger = logging.getLogger(__name__)

SAMPLE_PERIOD_MS = 10
TRUNCATION = 2.5


class ScenarioKind(str, Enum):
    FLAT = "flat"
    ROCKY = "rocky"
    ENTRAPPED_JIGGLING = "entrapped_jiggling"
    HIGH_CENTERED = "high_centered"
    SCRIPTED = "scripted"


STUCK_KINDS = frozenset({ScenarioKind.ENTRAPPED_JIGGLING, ScenarioKind.HIGH_CENTERED})
TERRAIN_SIGMA = {ScenarioKind.FLAT: 0.02, ScenarioKind.ROCKY: 0.08}


@dataclass(frozen=True)
class NoiseParams:
    encoder_sigma: float = 0.05          # rad/s
    tracker_v_sigma: float = 0.0075      # m/s, per axis
    tracker_omega_sigma: float = 0.005   # rad/s
    terrain_v_sigma: float = 0.0         # m/s, per axis
    jiggle_amplitude: float = 0.03       # m/s
    jiggle_period_ms: float = 500.0
    free_spin_gain: float = 1.7

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValidationError(f"noise.{f.name} must be a finite number, got {value!r}")
            if value < 0:
                raise ValidationError(f"noise.{f.name} must be nonnegative, got {value!r}")
        if self.jiggle_period_ms <= 0:
            raise ValidationError("noise.jiggle_period_ms must be positive")
        if self.free_spin_gain <= 0:
            raise ValidationError("noise.free_spin_gain must be positive")

    @classmethod
    def for_kind(cls, kind: ScenarioKind, **overrides) -> "NoiseParams":
        params = {"terrain_v_sigma": TERRAIN_SIGMA.get(ScenarioKind(kind), 0.0)}
        params.update(overrides)
        try:
            return cls(**params)
        except TypeError as e:
            raise ValidationError(f"bad noise parameter: {e}")

    @classmethod
    def zero(cls) -> "NoiseParams":
        """Noiseless sensors and terrain; jiggle and free spin are motion, not noise, and stay."""
        return cls(encoder_sigma=0.0, tracker_v_sigma=0.0, tracker_omega_sigma=0.0, terrain_v_sigma=0.0)


Script = Tuple[Tuple[int, ScenarioKind], ...]


def parse_script(text: str) -> Script:
    """'0:flat,6000:high_centered' -> ((0, FLAT), (6000, HIGH_CENTERED))"""
    segments = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            start, kind = part.split(":")
            segments.append((int(start), ScenarioKind(kind.strip())))
        except ValueError:
            raise ValidationError(f"bad script segment {part!r}, expected START_MS:KIND")
    return tuple(segments)


def format_script(script: Script) -> str:
    return ",".join(f"{start}:{kind.value}" for start, kind in script)


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    duration_ms: int
    seed: int = 0
    command_speed: float = 0.25  # m/s
    noise: Optional[NoiseParams] = None  # None: per-kind defaults
    script: Optional[Script] = None
    steer_angle: float = 0.0  # rad, single-track
    noise_overrides: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ScenarioKind(self.kind))
        except ValueError:
            raise ValidationError(f"unknown scenario kind {self.kind!r}")
        if self.duration_ms <= 0:
            raise ValidationError(f"duration must be positive, got {self.duration_ms}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ValidationError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if not math.isfinite(self.command_speed):
            raise ValidationError("command_speed must be finite")
        if self.kind is ScenarioKind.SCRIPTED:
            self._check_script()
        elif self.script:
            raise ValidationError(f"only scripted scenarios take a script, kind is {self.kind.value}")

    def _check_script(self):
        if not self.script:
            raise ValidationError("scripted scenario needs a non-empty script")
        script = tuple((int(start), ScenarioKind(kind)) for start, kind in self.script)
        if script[0][0] != 0:
            raise ValidationError("script must start at 0 ms")
        starts = [start for start, _ in script]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError(f"script start times must increase: {starts}")
        if starts[-1] >= self.duration_ms:
            raise ValidationError(f"script segment at {starts[-1]} ms starts after the scenario ends")
        if any(kind is ScenarioKind.SCRIPTED for _, kind in script):
            raise ValidationError("script segments cannot be scripted themselves")
        object.__setattr__(self, "script", script)

    def segments(self) -> Script:
        if self.kind is ScenarioKind.SCRIPTED:
            return self.script
        return ((0, self.kind),)

    def noise_for(self, kind: ScenarioKind) -> NoiseParams:
        if self.noise is not None:
            return self.noise
        return NoiseParams.for_kind(kind, **dict(self.noise_overrides))

    @property
    def num_samples(self) -> int:
        return math.ceil(self.duration_ms / SAMPLE_PERIOD_MS)


def _radial_truncated(rng: np.random.Generator, n: int) -> np.ndarray:
    """Standard 2D normal draws with norm <= TRUNCATION (rejection)."""
    draws = rng.standard_normal((n, 2))
    rejected = np.hypot(draws[:, 0], draws[:, 1]) > TRUNCATION
    while rejected.any():
        draws[rejected] = rng.standard_normal((int(rejected.sum()), 2))
        rejected = np.hypot(draws[:, 0], draws[:, 1]) > TRUNCATION
    return draws


def _truncated(rng: np.random.Generator, size) -> np.ndarray:
    return stats.truncnorm.rvs(-TRUNCATION, TRUNCATION, size=size, random_state=rng)


def _kind_at(segments: Script, t_ms: int) -> ScenarioKind:
    current = segments[0][1]
    for start, kind in segments:
        if start > t_ms:
            break
        current = kind
    return current


def simulate(scenario: Scenario, geom: RoverGeometry) -> Trace:
    n = scenario.num_samples
    rng = np.random.Generator(np.random.PCG64(scenario.seed))
    encoder = rng.standard_normal((n, RoverGeometry.NUM_WHEELS))
    terrain = _truncated(rng, (n, 2))
    tracker = _radial_truncated(rng, n)
    tracker_omega = _truncated(rng, n)

    steer = ackermann_pair(scenario.steer_angle, geom)
    base_rate = scenario.command_speed / geom.wheel_radius
    segments = scenario.segments()
    logger.info("Simulating %s for %d ms (%d samples, seed %d)",
                scenario.kind.value, scenario.duration_ms, n, scenario.seed)

    noise = {kind: scenario.noise_for(kind) for _, kind in segments}
    wheel_rate = {
        kind: base_rate * p.free_spin_gain if kind in STUCK_KINDS else base_rate
        for kind, p in noise.items()
    }
    command = {
        kind: assumed_velocity(JointState((rate,) * RoverGeometry.NUM_WHEELS, steer), geom)
        for kind, rate in wheel_rate.items()
    }

    samples: List[TelemetrySample] = []
    for i in range(n):
        t_ms = i * SAMPLE_PERIOD_MS
        kind = _kind_at(segments, t_ms)
        p = noise[kind]
        stuck = kind in STUCK_KINDS
        commanded = command[kind]
        wheels = wheel_rate[kind] + p.encoder_sigma * encoder[i]

        if stuck:
            gt = TaskVelocity()
            if kind is ScenarioKind.ENTRAPPED_JIGGLING:
                phase = 2 * math.pi * t_ms / p.jiggle_period_ms
                gt = TaskVelocity(p.jiggle_amplitude * math.sin(phase), 0.0, 0.0)
        else:
            gt = TaskVelocity(
                commanded.vx + p.terrain_v_sigma * terrain[i, 0],
                commanded.vy + p.terrain_v_sigma * terrain[i, 1],
                commanded.omega,
            )

        samples.append(TelemetrySample(
            t_ms=t_ms,
            wheel_vel=tuple(wheels),
            steer=steer,
            meas_vx=gt.vx + p.tracker_v_sigma * tracker[i, 0],
            meas_vy=gt.vy + p.tracker_v_sigma * tracker[i, 1],
            meas_omega=gt.omega + p.tracker_omega_sigma * tracker_omega[i],
            gt_vx=gt.vx,
            gt_vy=gt.vy,
            gt_omega=gt.omega,
            label=Status.ENTRAPPED if stuck else Status.MOVING,
        ))

    description = scenario.kind.value
    if scenario.kind is ScenarioKind.SCRIPTED:
        description = f"{description}:{format_script(scenario.script)}"
    metadata = TraceMetadata(scenario=description, seed=scenario.seed, geometry=geom)
    return Trace(samples=samples, metadata=metadata)


def calibration_report(trace: Trace, geom: RoverGeometry, weights: DivergenceWeights) -> pd.DataFrame:
    """Empirical per-class statistics of Q and ||v_m|| to compare with fitted models.

    `var` is the population variance; `mean_square` is the half-normal
    variance estimate for the classes modelled with a mode at zero.
    """
    sets = extract_training_sets(trace, geom, weights)
    rows = []
    for entry, feature, values in (
        ("divergence.diverged", "q", sets.diverged),
        ("divergence.consistent", "q", sets.consistent),
        ("movement.moving", "speed", sets.moving),
        ("movement.stopped", "speed", sets.stopped),
    ):
        series = pd.Series(values, dtype=float)
        rows.append({
            "entry": entry,
            "feature": feature,
            "count": int(series.size),
            "mean": series.mean(),
            "var": series.var(ddof=0),
            "mean_square": (series ** 2).mean(),
        })
    return pd.DataFrame(rows).set_index("entry")
