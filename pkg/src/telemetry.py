"""
Telemetry traces: one JSON object per line.

Sample keys: t_ms (int), wheel_vel (4 numbers, rad/s), steer (2 numbers, rad),
meas_vx, meas_vy, meas_omega (numbers, or all null for a tracker dropout),
optional gt_vx, gt_vy, gt_omega (present together) and optional label.
An optional first line {"_meta": {...}} carries scenario, seed and geometry.
Velocities are body-frame. Numbers are written with 9 significant digits.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.bayes import Status
from src.criteria import DivergenceWeights, velocity_error, weighted_divergence
from src.errors import TelemetryParseError, TimestampError, ValidationError
from src.kinematics import JointState, RoverGeometry, TaskVelocity, assumed_velocity

logger = logging.getLogger(__name__)

META_KEY = "_meta"
REQUIRED_KEYS = ("t_ms", "wheel_vel", "steer", "meas_vx", "meas_vy", "meas_omega")
MEAS_KEYS = ("meas_vx", "meas_vy", "meas_omega")
GT_KEYS = ("gt_vx", "gt_vy", "gt_omega")
KNOWN_KEYS = frozenset(REQUIRED_KEYS + GT_KEYS + ("label",))
SIGNIFICANT_DIGITS = 9


@dataclass(frozen=True)
class TelemetrySample:
    t_ms: int
    wheel_vel: Tuple[float, ...]
    steer: Tuple[float, ...]
    meas_vx: Optional[float]
    meas_vy: Optional[float]
    meas_omega: Optional[float]
    gt_vx: Optional[float] = None
    gt_vy: Optional[float] = None
    gt_omega: Optional[float] = None
    label: Optional[Status] = None

    def __post_init__(self):
        if self.t_ms < 0:
            raise ValidationError(f"t_ms must be >= 0, got {self.t_ms}")
        object.__setattr__(self, "wheel_vel", tuple(float(x) for x in self.wheel_vel))
        object.__setattr__(self, "steer", tuple(float(x) for x in self.steer))
        for group in (MEAS_KEYS, GT_KEYS):
            present = [getattr(self, k) is not None for k in group]
            if any(present) and not all(present):
                raise ValidationError(f"fields {', '.join(group)} must be present together")
        if self.label is not None:
            object.__setattr__(self, "label", Status(self.label))

    @property
    def joints(self) -> JointState:
        return JointState(self.wheel_vel, self.steer)

    @property
    def measured(self) -> Optional[TaskVelocity]:
        if self.meas_vx is None:
            return None
        return TaskVelocity(self.meas_vx, self.meas_vy, self.meas_omega)

    @property
    def ground_truth(self) -> Optional[TaskVelocity]:
        if self.gt_vx is None:
            return None
        return TaskVelocity(self.gt_vx, self.gt_vy, self.gt_omega)


@dataclass(frozen=True)
class TraceMetadata:
    scenario: Optional[str] = None
    seed: Optional[int] = None
    geometry: Optional[RoverGeometry] = None

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "geometry": self.geometry.as_dict() if self.geometry else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceMetadata":
        geometry = data.get("geometry")
        try:
            geometry = RoverGeometry(**geometry) if geometry else None
        except TypeError as e:
            raise TelemetryParseError(f"bad geometry in trace metadata: {e}", 1, META_KEY)
        return cls(scenario=data.get("scenario"), seed=data.get("seed"), geometry=geometry)


@dataclass
class Trace:
    samples: List[TelemetrySample] = field(default_factory=list)
    metadata: TraceMetadata = field(default_factory=TraceMetadata)

    def __len__(self):
        return len(self.samples)


# --- Parsing ---

def _number(record: dict, key: str, line_no: Optional[int]) -> float:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TelemetryParseError(f"{key} must be a number, got {value!r}", line_no, key)
    try:
        number = float(value)
    except OverflowError:
        raise TelemetryParseError(f"{key} is out of floating-point range", line_no, key)
    if not math.isfinite(number):
        raise TelemetryParseError(f"{key} must be finite", line_no, key)
    return number


def _array(record: dict, key: str, arity: int, line_no: Optional[int]) -> Tuple[float, ...]:
    value = record[key]
    if not isinstance(value, list) or len(value) != arity:
        raise TelemetryParseError(f"{key} must be an array of {arity} numbers", line_no, key)
    return tuple(_number({key: v}, key, line_no) for v in value)


def _reject_constant(name: str):
    raise ValueError(f"non-standard number {name}")


def _load_json(line: str, line_no: Optional[int]) -> Any:
    try:
        return json.loads(line, parse_constant=_reject_constant)
    except ValueError as e:
        raise TelemetryParseError(f"malformed record: {e}", line_no)


def parse_record(line: str, line_no: Optional[int] = None) -> TelemetrySample:
    record = _load_json(line, line_no)
    if not isinstance(record, dict):
        raise TelemetryParseError("record must be a JSON object", line_no)

    unknown = sorted(set(record) - KNOWN_KEYS)
    if unknown:
        raise TelemetryParseError(f"unknown key {unknown[0]}", line_no, unknown[0])
    for key in REQUIRED_KEYS:
        if key not in record:
            raise TelemetryParseError(f"missing required key {key}", line_no, key)

    t_ms = record["t_ms"]
    if isinstance(t_ms, bool) or not isinstance(t_ms, int):
        raise TelemetryParseError(f"t_ms must be an integer, got {t_ms!r}", line_no, "t_ms")
    if t_ms < 0:
        raise TelemetryParseError(f"t_ms must be >= 0, got {t_ms}", line_no, "t_ms")

    wheel_vel = _array(record, "wheel_vel", RoverGeometry.NUM_WHEELS, line_no)
    steer = _array(record, "steer", RoverGeometry.NUM_STEER_JOINTS, line_no)

    if all(record[k] is None for k in MEAS_KEYS):
        meas = (None, None, None)
    else:
        meas = tuple(_number(record, k, line_no) for k in MEAS_KEYS)

    present = [k in record for k in GT_KEYS]
    if any(present) and not all(present):
        missing = GT_KEYS[present.index(False)]
        raise TelemetryParseError(f"ground truth fields must appear together, missing {missing}", line_no, missing)
    gt = tuple(_number(record, k, line_no) for k in GT_KEYS) if all(present) else (None, None, None)

    label = record.get("label")
    if label is not None:
        try:
            label = Status(label)
        except ValueError:
            raise TelemetryParseError(f"unknown label {label!r}", line_no, "label")

    return TelemetrySample(t_ms, wheel_vel, steer, *meas, *gt, label=label)


def _fmt(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def write_record(sample: TelemetrySample) -> str:
    record: Dict[str, Any] = {
        "t_ms": sample.t_ms,
        "wheel_vel": [_fmt(x) for x in sample.wheel_vel],
        "steer": [_fmt(x) for x in sample.steer],
        "meas_vx": _fmt(sample.meas_vx),
        "meas_vy": _fmt(sample.meas_vy),
        "meas_omega": _fmt(sample.meas_omega),
    }
    if sample.gt_vx is not None:
        record["gt_vx"] = _fmt(sample.gt_vx)
        record["gt_vy"] = _fmt(sample.gt_vy)
        record["gt_omega"] = _fmt(sample.gt_omega)
    if sample.label is not None:
        record["label"] = sample.label.value
    return json.dumps(record, separators=(",", ":"))


def write_estimate(estimate) -> str:
    """One detector output line; shares the line format with telemetry records."""
    status = estimate.status
    record = {
        "t_ms": estimate.t,
        "q": _fmt(estimate.q_value) if math.isfinite(estimate.q_value) else None,
        "speed": _fmt(estimate.speed) if math.isfinite(estimate.speed) else None,
        "p_diverged": _fmt(estimate.belief.p_diverged),
        "p_stopped": _fmt(estimate.belief.p_stopped),
        "s_entrapped": _fmt(status.p_entrapped),
        "s_slipping": _fmt(status.p_slipping),
        "s_moving": _fmt(status.p_moving),
        "s_stopped": _fmt(status.p_stopped),
        "decided": estimate.decided_entrapped,
        "degenerate": estimate.evidence_degenerate,
    }
    return json.dumps(record, separators=(",", ":"))


# --- Trace files ---

def read_trace(fp: IO[str]) -> Trace:
    trace = Trace()
    previous: Optional[Tuple[int, int]] = None  # (t_ms, line_no)
    for line_no, raw in enumerate(fp, start=1):
        line = raw.strip()
        if not line:
            continue
        if line_no == 1:
            record = _load_json(line, line_no)
            if isinstance(record, dict) and set(record) == {META_KEY}:
                meta = record[META_KEY]
                if not isinstance(meta, dict):
                    raise TelemetryParseError("metadata must be an object", line_no, META_KEY)
                trace.metadata = TraceMetadata.from_dict(meta)
                continue
        sample = parse_record(line, line_no)
        if previous is not None and sample.t_ms <= previous[0]:
            raise TimestampError(
                f"line {line_no}: timestamp {sample.t_ms} ms does not increase "
                f"(line {previous[1]} has {previous[0]} ms)",
                line_no,
                previous[1],
            )
        previous = (sample.t_ms, line_no)
        trace.samples.append(sample)
    return trace


def load_trace(path: Union[str, Path]) -> Trace:
    try:
        with open(path, "r", encoding="utf-8") as f:
            trace = read_trace(f)
    except OSError as e:
        raise ValidationError(f"cannot read trace {path}: {e}")
    logger.info("Loaded %d samples from %s", len(trace), path)
    return trace


def dump_trace(trace: Trace, fp: IO[str]) -> None:
    fp.write(json.dumps({META_KEY: trace.metadata.as_dict()}, separators=(",", ":")) + "\n")
    for sample in trace.samples:
        fp.write(write_record(sample) + "\n")


def save_trace(trace: Trace, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        dump_trace(trace, f)


def trace_frame(trace: Trace) -> pd.DataFrame:
    """One row per sample, flattened arrays, label as string."""
    rows = []
    for s in trace.samples:
        row = {"t_ms": s.t_ms}
        row.update({f"wheel_vel_{i}": v for i, v in enumerate(s.wheel_vel)})
        row.update({f"steer_{i}": v for i, v in enumerate(s.steer)})
        row.update({k: getattr(s, k) for k in MEAS_KEYS + GT_KEYS})
        row["label"] = s.label.value if s.label is not None else None
        rows.append(row)
    return pd.DataFrame(rows)


# --- Training data ---

DIVERGED_LABELS = frozenset({Status.ENTRAPPED, Status.SLIPPING})
STOPPED_LABELS = frozenset({Status.ENTRAPPED, Status.STOPPED})


class TrainingSets(NamedTuple):
    diverged: np.ndarray     # Q values, D = diverged
    consistent: np.ndarray   # Q values, D = consistent
    moving: np.ndarray       # ||v_m||, M = moving
    stopped: np.ndarray      # ||v_m||, M = stopped

    def counts(self) -> Dict[str, int]:
        return {name: len(values) for name, values in self._asdict().items()}


def sample_features(sample: TelemetrySample, geom: RoverGeometry, weights: DivergenceWeights):
    """(Q, ||v_m||) for one sample with a measurement."""
    measured = sample.measured
    assumed = assumed_velocity(sample.joints, geom)
    return weighted_divergence(velocity_error(assumed, measured), weights), measured.speed


def extract_training_sets(trace: Trace, geom: RoverGeometry, weights: DivergenceWeights) -> TrainingSets:
    sets = {name: [] for name in TrainingSets._fields}
    dropouts = 0
    for index, sample in enumerate(trace.samples):
        if sample.label is None:
            raise ValidationError(f"sample {index} (t={sample.t_ms} ms) has no label")
        if sample.measured is None:
            dropouts += 1
            continue
        q, speed = sample_features(sample, geom, weights)
        sets["diverged" if sample.label in DIVERGED_LABELS else "consistent"].append(q)
        sets["stopped" if sample.label in STOPPED_LABELS else "moving"].append(speed)
    if dropouts:
        logger.warning("Skipped %d samples without measured velocity", dropouts)
    return TrainingSets(**{name: np.asarray(values, dtype=float) for name, values in sets.items()})
