import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from verge.gaze import DEFAULT_SCREEN, GazeSample, Recording

FRAME_MS = 1000.0 / 60.0


def grid_times(n: int, dt: float = FRAME_MS) -> np.ndarray:
    return np.arange(n) * dt


def make_sample(t, lx=0.0, ly=0.0, rx=0.0, ry=0.0, lv=True, rv=True, le=None, re=None):
    return GazeSample(
        t_ms=float(t),
        left_px=(float(lx), float(ly)) if lv or lx is not None else None,
        right_px=(float(rx), float(ry)) if rv or rx is not None else None,
        left_valid=lv,
        right_valid=rv,
        left_eye_mm=le,
        right_eye_mm=re,
    )


def make_recording(samples, pid="p01", rate=60.0) -> Recording:
    return Recording(
        participant_id=pid,
        task_tag="test",
        screen=DEFAULT_SCREEN,
        samples=list(samples),
        nominal_rate_hz=rate,
    )


def binocular_trace(points, dt=FRAME_MS, disparity=0.0):
    """Recording where both eyes follow `points` (cyclopean), offset by a
    constant horizontal disparity."""
    samples = []
    for i, (x, y) in enumerate(points):
        samples.append(
            make_sample(i * dt, x - disparity / 2, y, x + disparity / 2, y)
        )
    return make_recording(samples)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
