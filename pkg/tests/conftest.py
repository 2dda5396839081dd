import pytest

from src.bayes import ClassifierModels, Status
from src.config import DEFAULT_MODEL_PATH
from src.detector import DetectorConfig
from src.kinematics import RoverGeometry
from src.simulator import Scenario, ScenarioKind, parse_script, simulate
from src.telemetry import save_trace
from tests.factories import make_sample

SCRIPT = "0:flat,6000:high_centered"


@pytest.fixture
def geometry():
    return RoverGeometry()


@pytest.fixture
def models():
    return ClassifierModels.published_defaults()


@pytest.fixture
def detector_config():
    return DetectorConfig()


@pytest.fixture
def wheel_rate(geometry):
    """Wheel rate producing the default 0.25 m/s command."""
    return 0.25 / geometry.wheel_radius


@pytest.fixture
def entrapped_sample():
    def build(t_ms, geom=RoverGeometry()):
        return make_sample(t_ms, wheel=0.426055 / geom.wheel_radius, label=Status.ENTRAPPED)
    return build


@pytest.fixture
def nominal_sample(wheel_rate):
    def build(t_ms):
        return make_sample(t_ms, wheel=wheel_rate, meas=(0.25, 0.0, 0.0), label=Status.MOVING)
    return build


@pytest.fixture(scope="session")
def scripted_trace():
    """Flat driving for 6 s, then strictly high-centered for 6 s."""
    scenario = Scenario(ScenarioKind.SCRIPTED, 12000, seed=42, script=parse_script(SCRIPT))
    return simulate(scenario, RoverGeometry())


@pytest.fixture(scope="session")
def corpus():
    """One minute of each data-collection scenario."""
    kinds = (ScenarioKind.FLAT, ScenarioKind.ROCKY, ScenarioKind.ENTRAPPED_JIGGLING, ScenarioKind.HIGH_CENTERED)
    return {kind: simulate(Scenario(kind, 60000, seed=i + 1), RoverGeometry()) for i, kind in enumerate(kinds)}


@pytest.fixture
def trace_file(tmp_path, scripted_trace):
    path = tmp_path / "scripted.jsonl"
    save_trace(scripted_trace, path)
    return path


@pytest.fixture
def model_path():
    return DEFAULT_MODEL_PATH
