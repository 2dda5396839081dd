"""
Scores the detector against labelled traces.

accuracy   argmax status == label, on steady-state steps
latency    steps from an entrapment onset up to and including the first decided
           step of that episode (first onset in the trace)
false alarms  rising edges of the decided flag while the label is not entrapped
agreement  (argmax is entrapped) == ground-truth entrapment criterion, on
           steady-state steps

Steady-state steps exclude the first `window` steps of the trace and of every
label change.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from tqdm import tqdm

from src.bayes import ClassifierModels, Status
from src.criteria import entrapped_ground_truth
from src.detector import DetectorConfig, EntrapmentDetector
from src.errors import ValidationError
from src.kinematics import assumed_velocity
from src.telemetry import Trace, load_trace, trace_frame

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 20


@dataclass(frozen=True)
class EvalResult:
    trace: str
    steps: int
    accuracy: Optional[float]
    latency_steps: Optional[int]
    false_alarms: int
    agreement: Optional[float]


STEP_COLUMNS = ["t_ms", "label", "argmax", "decided", "verdict"]


def step_frame(trace: Trace, models: ClassifierModels, config: DetectorConfig) -> pd.DataFrame:
    """Per-step labels, detector output and ground-truth verdicts."""
    frame = trace_frame(trace)
    if frame.empty:
        return pd.DataFrame(columns=STEP_COLUMNS)
    for column, what in (("label", "label"), ("gt_vx", "ground truth")):
        missing = frame[column].isna()
        if missing.any():
            index = int(missing.idxmax())
            raise ValidationError(f"sample {index} (t={frame.at[index, 't_ms']} ms) has no {what}")

    estimates = list(EntrapmentDetector(config, models).run(trace.samples))
    frame["argmax"] = [e.status.argmax().value for e in estimates]
    frame["decided"] = [e.decided_entrapped for e in estimates]
    frame["verdict"] = [
        entrapped_ground_truth(assumed_velocity(s.joints, config.geometry), s.ground_truth, config.tolerances)
        for s in trace.samples
    ]
    return frame[STEP_COLUMNS]


def steady_state(labels: pd.Series, window: int) -> pd.Series:
    change = labels.ne(labels.shift())
    since_change = labels.groupby(change.cumsum()).cumcount()
    return since_change >= window


def first_onset_latency(frame: pd.DataFrame) -> Optional[int]:
    entrapped = frame["label"].eq(Status.ENTRAPPED.value).to_numpy()
    decided = frame["decided"].to_numpy()
    for onset in range(len(frame)):
        if entrapped[onset] and (onset == 0 or not entrapped[onset - 1]):
            step = onset
            while step < len(frame) and entrapped[step]:
                if decided[step]:
                    return step - onset + 1
                step += 1
            return None
    return None


def score(frame: pd.DataFrame, window: int = DEFAULT_WINDOW, name: str = "") -> EvalResult:
    if frame.empty:
        return EvalResult(name, 0, None, None, 0, None)
    steady = steady_state(frame["label"], window)
    decided = frame["decided"].astype(bool)
    rising = decided & ~decided.shift(fill_value=False).astype(bool)
    non_entrapped = frame["label"].ne(Status.ENTRAPPED.value)

    accuracy = agreement = None
    if steady.any():
        accuracy = float(frame.loc[steady, "argmax"].eq(frame.loc[steady, "label"]).mean())
        called = frame.loc[steady, "argmax"].eq(Status.ENTRAPPED.value)
        agreement = float(called.eq(frame.loc[steady, "verdict"].astype(bool)).mean())

    return EvalResult(
        trace=name,
        steps=len(frame),
        accuracy=accuracy,
        latency_steps=first_onset_latency(frame),
        false_alarms=int((rising & non_entrapped).sum()),
        agreement=agreement,
    )


def evaluate_trace(trace: Trace, models: ClassifierModels, config: DetectorConfig,
                   window: int = DEFAULT_WINDOW, name: str = "") -> EvalResult:
    result = score(step_frame(trace, models, config), window, name)
    logger.info("Evaluated %s: %s", name or "trace", result)
    return result


def evaluate_paths(paths: Sequence[Path], models: ClassifierModels, config: DetectorConfig,
                   window: int = DEFAULT_WINDOW, jobs: int = 1) -> List[EvalResult]:
    """Evaluates each trace in isolation (own detector), optionally in parallel."""
    def _one(path: Path) -> EvalResult:
        return evaluate_trace(load_trace(path), models, config, window, name=str(path))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(tqdm(pool.map(_one, paths), total=len(paths), unit="trace", disable=len(paths) < 2))


def results_frame(results: Sequence[EvalResult]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in results],
                        columns=["trace", "steps", "accuracy", "latency_steps", "false_alarms", "agreement"])
