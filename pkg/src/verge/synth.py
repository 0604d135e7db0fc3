"""Synthetic binocular gaze generator for tests and desk-scale evaluation.

Both eyes track a shared target process (dwell at a point, short ramp to
the next) whose dynamics are identical across classes, so only the vergence
pathway separates them: on-task episodes draw a tight disparity around a
small mean, internal-thought episodes a wide one plus a slow cyclopean
drift. Output is a fully valid 60 Hz recording and its ground-truth
segments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .annotate import LABEL_DELIBERATE, LABEL_INTERNAL, LabeledSegment
from .gaze import DEFAULT_SCREEN, GazeSample, Recording, ScreenConfig


@dataclass
class SynthSpec:
    seed: int
    duration_ms: float
    episodes: list[tuple[str, float, float]]  # (label, start_ms, end_ms)
    rate_hz: float = 60.0
    screen: ScreenConfig = field(default_factory=lambda: DEFAULT_SCREEN)
    # on-task vergence behaviour
    on_disparity_mean_px: float = 10.0
    on_disparity_sd_px: float = 2.0
    # internal-thought vergence behaviour
    it_disparity_mean_px: float = 15.0
    it_disparity_sd_px: float = 12.0
    it_drift_px_s: float = 5.0
    # shared oculomotor dynamics
    fixation_dwell_ms: float = 800.0
    saccade_ms: float = 50.0
    jitter_px: float = 1.0

    def validate(self) -> None:
        if self.duration_ms <= 0 or self.rate_hz <= 0:
            raise ValueError("duration and rate must be positive")
        prev_end = 0.0
        for label, start, end in self.episodes:
            if start < prev_end or end <= start or end > self.duration_ms + 1e-9:
                raise ValueError(f"bad episode ({label}, {start}, {end})")
            prev_end = end


def alternating_plan(
    duration_ms: float,
    seed: int,
    mean_episode_ms: float = 5000.0,
    jitter_ms: float = 1500.0,
    first_label: str = LABEL_DELIBERATE,
) -> list[tuple[str, float, float]]:
    """Alternate on-task and internal-thought episodes over the duration."""
    rng = np.random.default_rng([seed, 0xE7])
    labels = (
        (first_label, LABEL_INTERNAL)
        if first_label != LABEL_INTERNAL
        else (LABEL_INTERNAL, LABEL_DELIBERATE)
    )
    out = []
    t = 0.0
    i = 0
    while t < duration_ms:
        ln = float(rng.uniform(mean_episode_ms - jitter_ms, mean_episode_ms + jitter_ms))
        end = min(t + ln, duration_ms)
        out.append((labels[i % 2], t, end))
        t = end
        i += 1
    return out


def generate(spec: SynthSpec, participant_id: str = "synthetic") -> tuple[Recording, list[LabeledSegment]]:
    """Render the spec into a recording plus ground-truth segments."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    dt = 1000.0 / spec.rate_hz
    n = int(math.floor(spec.duration_ms / dt + 1e-9)) + 1
    t = np.arange(n) * dt

    # target process shared by both classes: dwell, then a short linear ramp
    box_x = (0.25 * spec.screen.width_px, 0.75 * spec.screen.width_px)
    box_y = (0.25 * spec.screen.height_px, 0.75 * spec.screen.height_px)
    cx = np.empty(n)
    cy = np.empty(n)
    pos = np.array([rng.uniform(*box_x), rng.uniform(*box_y)])
    i = 0
    while i < n:
        dwell = spec.fixation_dwell_ms * float(rng.uniform(0.75, 1.25))
        hold = max(1, int(round(dwell / dt)))
        j = min(n, i + hold)
        cx[i:j] = pos[0]
        cy[i:j] = pos[1]
        i = j
        if i >= n:
            break
        nxt = np.array([rng.uniform(*box_x), rng.uniform(*box_y)])
        ramp = max(1, int(round(spec.saccade_ms / dt)))
        k = min(n, i + ramp)
        for step in range(i, k):
            w = (step - i + 1) / (ramp + 1)
            cx[step] = pos[0] + w * (nxt[0] - pos[0])
            cy[step] = pos[1] + w * (nxt[1] - pos[1])
        i = k
        pos = nxt

    # per-sample class from the episode plan (gaps default to on-task)
    is_it = np.zeros(n, dtype=bool)
    for label, start, end in spec.episodes:
        if label == LABEL_INTERNAL:
            is_it |= (t >= start - 1e-9) & (t < end - 1e-9)

    disparity = np.where(
        is_it,
        rng.normal(spec.it_disparity_mean_px, spec.it_disparity_sd_px, size=n),
        0.0,
    )
    disparity_on = rng.normal(spec.on_disparity_mean_px, spec.on_disparity_sd_px, size=n)
    disparity = np.where(is_it, disparity, disparity_on)

    # slow cyclopean drift during internal thought, reset at episode start
    drift = np.zeros((n, 2))
    for label, start, end in spec.episodes:
        if label != LABEL_INTERNAL:
            continue
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        vel = np.array([math.cos(ang), math.sin(ang)]) * spec.it_drift_px_s
        rows = np.flatnonzero((t >= start - 1e-9) & (t < end - 1e-9))
        for step, row in enumerate(rows):
            drift[row] = vel * (step * dt / 1000.0)

    jitter = rng.normal(0.0, spec.jitter_px, size=(n, 2))

    samples = []
    for k in range(n):
        ccx = cx[k] + drift[k, 0] + jitter[k, 0]
        ccy = cy[k] + drift[k, 1] + jitter[k, 1]
        half = disparity[k] / 2.0
        samples.append(
            GazeSample(
                t_ms=float(t[k]),
                left_px=(float(ccx - half), float(ccy)),
                right_px=(float(ccx + half), float(ccy)),
                left_valid=True,
                right_valid=True,
            )
        )

    rec = Recording(
        participant_id=participant_id,
        task_tag="synthetic",
        screen=spec.screen,
        samples=samples,
        nominal_rate_hz=spec.rate_hz,
    )
    segments = [
        LabeledSegment(label=label, start_ms=start, end_ms=end, source="synthetic")
        for label, start, end in spec.episodes
    ]
    return rec, segments
