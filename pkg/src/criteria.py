"""
Entrapment criteria and the velocity error decomposition fed to the classifier.

Norms over a full task velocity stack (v_x, v_y, L_c * omega) so that the
linear and angular parts share a unit. All inequalities are strict; a norm
exactly equal to its tolerance does not satisfy the condition.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.errors import ValidationError
from src.kinematics import TaskVelocity

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Tolerances:
    eps_zero: float = 0.05  # m/s, "not moving"
    eps_ag: float = 0.15    # m/s, assumed vs ground-truth divergence
    eps_mg: float = 0.02    # m/s, measured vs ground-truth approximation error
    characteristic_length: float = 0.4  # m, scales omega into the stacked norm

    def __post_init__(self):
        for name in ("eps_zero", "eps_ag", "eps_mg", "characteristic_length"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"tolerances.{name} must be strictly positive, got {value!r}")
        if self.eps_mg >= self.eps_ag:
            raise ValidationError(
                f"tolerances.eps_mg ({self.eps_mg}) must be smaller than eps_ag ({self.eps_ag})"
            )


@dataclass(frozen=True)
class VelocityError:
    e_v: float      # m/s
    e_omega: float  # rad/s

    def as_array(self) -> np.ndarray:
        return np.array([self.e_v, self.e_omega])


@dataclass(frozen=True)
class DivergenceWeights:
    """Symmetric PSD 2x2 weight matrix R, stored row-major."""
    R: Tuple[float, float, float, float] = (1.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        values = tuple(float(x) for x in self.R)
        if len(values) != 4:
            raise ValidationError(f"weights need 4 row-major entries, got {len(values)}")
        if not all(math.isfinite(x) for x in values):
            raise ValidationError("weights contain non-finite entries")
        matrix = np.array(values).reshape(2, 2)
        if abs(matrix[0, 1] - matrix[1, 0]) > SYMMETRY_TOL:
            raise ValidationError(f"weight matrix is not symmetric: {values}")
        if np.linalg.eigvalsh(matrix).min() < -SYMMETRY_TOL:
            raise ValidationError(f"weight matrix is not positive semi-definite: {values}")
        object.__setattr__(self, "R", values)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.R).reshape(2, 2)

    @classmethod
    def identity(cls) -> "DivergenceWeights":
        return cls()

    @classmethod
    def from_row_major(cls, values: Sequence[float]) -> "DivergenceWeights":
        return cls(tuple(values))


def stacked_norm(velocity: TaskVelocity, length: float) -> float:
    return float(np.linalg.norm(velocity.stacked(length)))


def _difference(a: TaskVelocity, b: TaskVelocity) -> TaskVelocity:
    return TaskVelocity(a.vx - b.vx, a.vy - b.vy, a.omega - b.omega)


def velocity_error(assumed: TaskVelocity, measured: TaskVelocity) -> VelocityError:
    return VelocityError(
        e_v=float(np.linalg.norm(assumed.v - measured.v)),
        e_omega=abs(assumed.omega - measured.omega),
    )


def weighted_divergence(err: VelocityError, w: DivergenceWeights) -> float:
    """Q = sqrt(e^T R e)."""
    e = err.as_array()
    # R is PSD, so anything below zero here is rounding
    return math.sqrt(max(float(e @ w.matrix @ e), 0.0))


def entrapped_ground_truth(assumed: TaskVelocity, ground_truth: TaskVelocity, tol: Tolerances) -> bool:
    length = tol.characteristic_length
    stopped = stacked_norm(ground_truth, length) < tol.eps_zero
    diverged = stacked_norm(_difference(assumed, ground_truth), length) > tol.eps_ag
    return stopped and diverged


def entrapped_measured(assumed: TaskVelocity, measured: TaskVelocity, tol: Tolerances) -> bool:
    """Same predicate with the measured velocity standing in for ground truth.

    Only meaningful while `measurement_valid` holds; the result is reported
    regardless and validity is surfaced separately.
    """
    return entrapped_ground_truth(assumed, measured, tol)


def measurement_valid(measured: TaskVelocity, ground_truth: TaskVelocity, tol: Tolerances) -> bool:
    return stacked_norm(_difference(measured, ground_truth), tol.characteristic_length) < tol.eps_mg
