"""
Naive Bayes pieces of the detector: conditional likelihood models, their
maximum-likelihood fits, two-class posterior updates for the divergence (D)
and movement (M) variables, and fusion into the four-way rover status.

Densities are evaluated in log space; the stopped-class scale is ~0.012 m/s so
raw densities underflow at ordinary driving speeds.
"""

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, NamedTuple, Sequence, Union

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from src.errors import FittingError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_CUTOFF = 0.075


class ModelKind(str, Enum):
    GAUSSIAN = "gaussian"
    HALF_GAUSSIAN = "half_gaussian"


class Status(str, Enum):
    ENTRAPPED = "entrapped"
    SLIPPING = "slipping"
    MOVING = "moving"
    STOPPED = "stopped"


@dataclass(frozen=True)
class ConditionalModel:
    kind: ModelKind
    mu: float
    var: float

    def __post_init__(self):
        try:
            kind = ModelKind(self.kind)
        except ValueError:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "var", float(self.var))
        if not math.isfinite(self.mu):
            raise ValidationError(f"model mean must be finite, got {self.mu!r}")
        if not math.isfinite(self.var) or self.var <= 0:
            raise ValidationError(f"model variance must be positive, got {self.var!r}")
        if kind is ModelKind.HALF_GAUSSIAN and self.mu != 0:
            raise ValidationError(f"half-gaussian models have mu = 0, got {self.mu!r}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.var)

    def log_likelihood(self, x: float) -> float:
        if self.kind is ModelKind.GAUSSIAN:
            return float(stats.norm.logpdf(x, loc=self.mu, scale=self.sigma))
        # halfnorm is 2 * N(x; 0, var) on x >= 0 and -inf below
        return float(stats.halfnorm.logpdf(x, scale=self.sigma))

    def support(self, width: float = 8.0):
        """Interval holding all but a negligible tail of the mass."""
        if self.kind is ModelKind.GAUSSIAN:
            return self.mu - width * self.sigma, self.mu + width * self.sigma
        return 0.0, width * self.sigma

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "mu": self.mu, "var": self.var}


ENTRY_NAMES = (
    "divergence.diverged",
    "divergence.consistent",
    "movement.moving",
    "movement.stopped",
)


@dataclass(frozen=True)
class ClassifierModels:
    divergence_diverged: ConditionalModel
    divergence_consistent: ConditionalModel
    movement_moving: ConditionalModel
    movement_stopped: ConditionalModel

    @classmethod
    def published_defaults(cls) -> "ClassifierModels":
        """The published fits for the wheel-odometry / external-tracker pairing."""
        return cls(
            divergence_diverged=ConditionalModel(ModelKind.GAUSSIAN, 0.426055, 0.011208),
            divergence_consistent=ConditionalModel(ModelKind.HALF_GAUSSIAN, 0.0, 0.042947),
            movement_moving=ConditionalModel(ModelKind.GAUSSIAN, 0.252618, 0.022222),
            movement_stopped=ConditionalModel(ModelKind.HALF_GAUSSIAN, 0.0, 0.000137),
        )

    def entries(self) -> Dict[str, ConditionalModel]:
        return dict(zip(ENTRY_NAMES, (
            self.divergence_diverged,
            self.divergence_consistent,
            self.movement_moving,
            self.movement_stopped,
        )))

    @classmethod
    def from_entries(cls, entries: Dict[str, dict]) -> "ClassifierModels":
        if not isinstance(entries, dict):
            raise ValidationError("model file must hold a mapping of model entries")
        unknown = sorted(set(entries) - set(ENTRY_NAMES))
        missing = [name for name in ENTRY_NAMES if name not in entries]
        if unknown:
            raise ValidationError(f"unknown model entries: {', '.join(unknown)}")
        if missing:
            raise ValidationError(f"missing model entries: {', '.join(missing)}")
        models = []
        for name in ENTRY_NAMES:
            entry = entries[name]
            try:
                models.append(ConditionalModel(entry["kind"], entry["mu"], entry["var"]))
            except (KeyError, TypeError) as e:
                raise ValidationError(f"model entry {name} is incomplete: {e}")
            except ValidationError as e:
                raise ValidationError(f"model entry {name}: {e}")
        return cls(*models)


def load_models(path: Union[str, Path]) -> ClassifierModels:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ValidationError(f"cannot read model file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"model file {path} is not valid JSON: {e}")
    return ClassifierModels.from_entries(data)


def dump_models(models: ClassifierModels) -> str:
    entries = {name: model.as_dict() for name, model in models.entries().items()}
    return json.dumps(entries, indent=2, sort_keys=True) + "\n"


def save_models(models: ClassifierModels, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_models(models))


def likelihood(model: ConditionalModel, x: float) -> float:
    return math.exp(model.log_likelihood(x))


def log_likelihood_total(model: ConditionalModel, samples: Iterable[float]) -> float:
    return float(sum(model.log_likelihood(x) for x in samples))


# --- Fitting ---

def _as_samples(samples: Sequence[float], model_class: str) -> np.ndarray:
    data = np.asarray(list(samples), dtype=float)
    if not np.all(np.isfinite(data)):
        raise FittingError("samples contain non-finite values", model_class)
    return data


def fit_gaussian(samples: Sequence[float], model_class: str = None) -> ConditionalModel:
    """Maximum-likelihood normal fit (variance divides by n)."""
    data = _as_samples(samples, model_class)
    if data.size < 2:
        raise FittingError(f"need at least 2 samples, got {data.size}", model_class)
    if np.ptp(data) == 0:
        raise FittingError("zero variance", model_class)
    return ConditionalModel(ModelKind.GAUSSIAN, float(np.mean(data)), float(np.var(data)))


def fit_half_gaussian(samples: Sequence[float], model_class: str = None) -> ConditionalModel:
    """Half-normal MLE: sigma^2 is the mean of squares, mode fixed at 0."""
    data = _as_samples(samples, model_class)
    if data.size < 1:
        raise FittingError("need at least 1 sample", model_class)
    if np.any(data < 0):
        raise FittingError("half-gaussian samples must be nonnegative", model_class)
    if not np.any(data > 0):
        raise FittingError("all samples are zero", model_class)
    return ConditionalModel(ModelKind.HALF_GAUSSIAN, 0.0, float(np.mean(np.square(data))))


def preprocess_diverged(samples: Sequence[float], cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """Drop low divergence values (Q <= cutoff) left by command-switching transients."""
    if not math.isfinite(cutoff) or cutoff < 0:
        raise ValidationError(f"cutoff must be nonnegative, got {cutoff!r}")
    data = np.asarray(list(samples), dtype=float)
    return data[data > cutoff]


# --- Posterior updates ---

class Posterior(NamedTuple):
    probability: float
    degenerate: bool


def two_class_posterior(prior_a: float, log_lik_a: float, log_lik_b: float) -> Posterior:
    """Pr(A | x) for a two-class variable given log-likelihoods of x under A and B."""
    if log_lik_a == -math.inf and log_lik_b == -math.inf:
        logger.warning("Degenerate evidence: both likelihoods vanish, keeping prior %.6f", prior_a)
        return Posterior(prior_a, True)
    joint_a = log_lik_a + math.log(prior_a)
    joint_b = log_lik_b + math.log1p(-prior_a)
    return Posterior(math.exp(joint_a - logsumexp([joint_a, joint_b])), False)


def _check_prior(prior: float) -> None:
    if not 0 < prior < 1:
        raise ValidationError(f"prior must lie in (0, 1), got {prior!r}")


def posterior_divergence(prior_diverged: float, q: float, models: ClassifierModels) -> Posterior:
    """Pr(D = diverged | Q = q)."""
    _check_prior(prior_diverged)
    return two_class_posterior(
        prior_diverged,
        models.divergence_diverged.log_likelihood(q),
        models.divergence_consistent.log_likelihood(q),
    )


def posterior_movement(prior_stopped: float, speed: float, models: ClassifierModels) -> Posterior:
    """Pr(M = stopped | ||v_m|| = speed)."""
    _check_prior(prior_stopped)
    return two_class_posterior(
        prior_stopped,
        models.movement_stopped.log_likelihood(speed),
        models.movement_moving.log_likelihood(speed),
    )


# --- Status fusion ---

@dataclass(frozen=True)
class BeliefState:
    p_diverged: float = 0.5
    p_stopped: float = 0.5

    def clamped(self, eps: float) -> "BeliefState":
        return BeliefState(
            min(max(self.p_diverged, eps), 1 - eps),
            min(max(self.p_stopped, eps), 1 - eps),
        )


@dataclass(frozen=True)
class StatusDistribution:
    p_entrapped: float
    p_slipping: float
    p_moving: float
    p_stopped: float

    def as_dict(self) -> Dict[Status, float]:
        return {
            Status.ENTRAPPED: self.p_entrapped,
            Status.SLIPPING: self.p_slipping,
            Status.MOVING: self.p_moving,
            Status.STOPPED: self.p_stopped,
        }

    def argmax(self) -> Status:
        probabilities = self.as_dict()
        return max(probabilities, key=probabilities.get)


def _split(total: float, share: float):
    """Split `total` into (part, total - part) with part ~ total * share and
    part + rest == total exactly in floating point."""
    part = total * share
    for _ in range(4):
        rest = total - part
        if part + rest == total:
            return part, rest
        # the subtraction hit a rounding tie; one ulp on the product breaks it
        part = math.nextafter(part, 0.0)
    raise ArithmeticError(f"cannot split {total!r} exactly")


def status_distribution(p_diverged: float, p_stopped: float) -> StatusDistribution:
    """Product rule under conditional independence of D and M:
    entrapped = diverged & stopped, slipping = diverged & moving,
    stopped = consistent & stopped, moving = consistent & moving."""
    for name, p in (("p_diverged", p_diverged), ("p_stopped", p_stopped)):
        if not 0 <= p <= 1:
            raise ValidationError(f"{name} must lie in [0, 1], got {p!r}")
    entrapped, slipping = _split(p_diverged, p_stopped)
    stopped, moving = _split(1.0 - p_diverged, p_stopped)
    return StatusDistribution(
        p_entrapped=entrapped,
        p_slipping=slipping,
        p_moving=moving,
        p_stopped=stopped,
    )
