from src.telemetry import TelemetrySample


def make_sample(t_ms, wheel=0.0, meas=(0.0, 0.0, 0.0), gt=None, steer=(0.0, 0.0), label=None):
    """Sample with all four wheels at `wheel` rad/s; meas=None records a dropout."""
    meas = meas if meas is not None else (None, None, None)
    gt = gt if gt is not None else (None, None, None)
    return TelemetrySample(t_ms, (wheel,) * 4, steer, *meas, *gt, label=label)
