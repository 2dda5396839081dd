"""
Velocity kinematics for a four-wheel Ackermann rover, reduced to a planar
bicycle model.

Task space is the body-frame velocity (v_x, v_y, omega). Wheel order is
front-left, front-right, rear-left, rear-right; steer joints are (left, right)
with positive angles turning left.

Only the velocity-level map J(q) q_dot is implemented. A wheeled rover's pose
is not a function of its joint positions, so there is no position-level FK.
"""

import math
from dataclasses import dataclass
from typing import ClassVar, Sequence, Tuple

import numpy as np

from src.errors import ValidationError

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class RoverGeometry:
    wheelbase: float = 0.4      # m
    track_width: float = 0.3    # m
    wheel_radius: float = 0.09  # m

    NUM_WHEELS: ClassVar[int] = 4
    NUM_STEER_JOINTS: ClassVar[int] = 2

    def __post_init__(self):
        for name in ("wheelbase", "track_width", "wheel_radius"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValidationError(f"geometry.{name} must be a positive length, got {value!r}")

    def as_dict(self) -> dict:
        return {
            "wheelbase": self.wheelbase,
            "track_width": self.track_width,
            "wheel_radius": self.wheel_radius,
        }


@dataclass(frozen=True)
class JointState:
    wheel_velocities: Tuple[float, ...]  # rad/s
    steer_angles: Tuple[float, ...]      # rad

    def __post_init__(self):
        wheels = tuple(float(w) for w in self.wheel_velocities)
        steer = tuple(float(s) for s in self.steer_angles)
        if len(wheels) != RoverGeometry.NUM_WHEELS:
            raise ValidationError(f"expected {RoverGeometry.NUM_WHEELS} wheel velocities, got {len(wheels)}")
        if len(steer) != RoverGeometry.NUM_STEER_JOINTS:
            raise ValidationError(f"expected {RoverGeometry.NUM_STEER_JOINTS} steer angles, got {len(steer)}")
        if not all(math.isfinite(v) for v in wheels + steer):
            raise ValidationError("joint state contains non-finite values")
        if any(abs(s) >= HALF_PI for s in steer):
            raise ValidationError(f"steer angles must lie in (-pi/2, pi/2), got {steer}")
        object.__setattr__(self, "wheel_velocities", wheels)
        object.__setattr__(self, "steer_angles", steer)

    @property
    def q_dot(self) -> np.ndarray:
        return np.asarray(self.wheel_velocities, dtype=float)


@dataclass(frozen=True)
class TaskVelocity:
    vx: float = 0.0     # m/s, longitudinal
    vy: float = 0.0     # m/s, lateral
    omega: float = 0.0  # rad/s, yaw rate

    def __post_init__(self):
        for name in ("vx", "vy", "omega"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError(f"velocity component {name} is not finite")
            object.__setattr__(self, name, value)

    @property
    def v(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        """Norm of the linear part."""
        return math.hypot(self.vx, self.vy)

    def stacked(self, length: float) -> np.ndarray:
        """(v_x, v_y, length * omega), a single-unit vector for norms."""
        return np.array([self.vx, self.vy, length * self.omega])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "TaskVelocity":
        vx, vy, omega = (float(x) for x in values)
        return cls(vx, vy, omega)


def wheel_curvatures(joints: JointState, geom: RoverGeometry) -> Tuple[float, float]:
    """
    Path curvature of the rear-axle midpoint implied by each front steer joint.

    A joint at lateral offset y_i turning by delta_i puts the instantaneous turn
    center on the rear-axle line at y_i + L / tan(delta_i); the curvature is the
    reciprocal, tan(delta_i) / (L + y_i tan(delta_i)). A straight joint gives 0.
    """
    half_track = geom.track_width / 2
    curvatures = []
    for offset, angle in zip((half_track, -half_track), joints.steer_angles):
        t = math.tan(angle)
        denominator = geom.wheelbase + offset * t
        if denominator == 0:
            raise ValidationError(f"steer angle {angle!r} puts the turn center on the rear axle midpoint")
        curvatures.append(t / denominator)
    return curvatures[0], curvatures[1]


def effective_steer_angle(joints: JointState, geom: RoverGeometry) -> float:
    """
    Single-track steering angle equivalent to the two front steer joints:
    atan(L * mean curvature). Exact whenever the pair satisfies the Ackermann
    condition, since both joints then agree on one turn center.
    """
    return math.atan(geom.wheelbase * float(np.mean(wheel_curvatures(joints, geom))))


def ackermann_pair(delta: float, geom: RoverGeometry) -> Tuple[float, float]:
    """(left, right) steer angles that realise single-track angle `delta`."""
    if abs(delta) >= HALF_PI:
        raise ValidationError(f"steer angle must lie in (-pi/2, pi/2), got {delta!r}")
    if delta == 0:
        return 0.0, 0.0
    radius = geom.wheelbase / math.tan(delta)  # signed, positive to the left
    half_track = geom.track_width / 2
    if abs(radius) <= half_track:
        raise ValidationError(f"turn radius {abs(radius):.3f} m is inside the track, no Ackermann pair exists")
    left = math.atan(geom.wheelbase / (radius - half_track))
    right = math.atan(geom.wheelbase / (radius + half_track))
    return left, right


def jacobian(joints: JointState, geom: RoverGeometry) -> np.ndarray:
    """3x4 map from wheel rates to body velocity (v_x, v_y, omega)."""
    delta = effective_steer_angle(joints, geom)
    per_wheel = geom.wheel_radius / RoverGeometry.NUM_WHEELS
    J = np.zeros((3, RoverGeometry.NUM_WHEELS))
    J[0, :] = per_wheel
    # v_y row stays zero: no lateral slip in the bicycle model
    J[2, :] = per_wheel * math.tan(delta) / geom.wheelbase
    return J


def assumed_velocity(joints: JointState, geom: RoverGeometry) -> TaskVelocity:
    """Locomotion actuator odometry: x_dot_a = J(q) q_dot."""
    return TaskVelocity.from_array(jacobian(joints, geom) @ joints.q_dot)
