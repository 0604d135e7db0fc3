"""Oculomotor event segmentation on a fixed-rate gaze stream.

Fixations come from dispersion-threshold identification (I-DT): a window is
grown over consecutive valid samples while its spatial dispersion
(max x - min x) + (max y - min y) stays under the threshold, and it counts
as a fixation once it spans the minimum duration. Saccades fill qualifying
gaps between consecutive fixations of the same eye. Blinks are binocular
validity dropouts inside a physiological duration band.

Event intervals follow the frame convention [t_first, t_last + frame_period):
an event made of k frames at 60 Hz lasts k * 16.67 ms.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gaze import GazeSample

IDT_DURATION_MS = 80.0
IDT_DISPERSION_PX = 80.0
BLINK_MIN_MS = 75.0
BLINK_MAX_MS = 400.0
HORIZONTAL_BAND_DEG = 30.0


def normalize_angle_deg(a: float) -> float:
    """Map an angle in degrees onto [-180, 180)."""
    return (a + 180.0) % 360.0 - 180.0


def vector_angle_deg(dx: float, dy_screen: float) -> float:
    """Angle of a screen-space displacement, converted to y-up convention."""
    return normalize_angle_deg(math.degrees(math.atan2(-dy_screen, dx)))


@dataclass(frozen=True)
class Fixation:
    eye: str  # left | right | cyclopean
    start_ms: float
    end_ms: float
    centroid_px: tuple[float, float]
    sample_range: tuple[int, int]  # half-open index interval

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def midpoint_ms(self) -> float:
        return 0.5 * (self.start_ms + self.end_ms)


@dataclass(frozen=True)
class Saccade:
    eye: str  # left | right
    start_ms: float
    end_ms: float
    length_px: float
    velocity_px_s: float
    angle_deg: float

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def midpoint_ms(self) -> float:
        return 0.5 * (self.start_ms + self.end_ms)


@dataclass(frozen=True)
class Blink:
    start_ms: float
    end_ms: float

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    @property
    def midpoint_ms(self) -> float:
        return 0.5 * (self.start_ms + self.end_ms)


@dataclass
class OculomotorEvents:
    """All events detected over one span of samples."""

    left_fixations: list[Fixation]
    right_fixations: list[Fixation]
    cyclopean_fixations: list[Fixation]
    left_saccades: list[Saccade]
    right_saccades: list[Saccade]
    blinks: list[Blink]


def _eye_channels(samples: Sequence[GazeSample], eye: str):
    """(t, x, y, valid) arrays for the selected eye.

    The cyclopean stream is the midpoint of the two gaze points and is valid
    only where both eyes are.
    """
    n = len(samples)
    t = np.empty(n)
    x = np.full(n, np.nan)
    y = np.full(n, np.nan)
    v = np.zeros(n, dtype=bool)
    for i, s in enumerate(samples):
        t[i] = s.t_ms
        if eye == "left":
            if s.left_valid:
                v[i] = True
                x[i], y[i] = s.left_px
        elif eye == "right":
            if s.right_valid:
                v[i] = True
                x[i], y[i] = s.right_px
        elif eye == "cyclopean":
            if s.both_valid:
                v[i] = True
                x[i] = 0.5 * (s.left_px[0] + s.right_px[0])
                y[i] = 0.5 * (s.left_px[1] + s.right_px[1])
        else:
            raise ValueError(f"unknown eye selector {eye!r}")
    return t, x, y, v


def _frame_period(samples: Sequence[GazeSample]) -> float:
    if len(samples) >= 2:
        return samples[1].t_ms - samples[0].t_ms
    return 1000.0 / 60.0


def detect_fixations_idt(
    samples: Sequence[GazeSample],
    eye: str,
    duration_ms: float = IDT_DURATION_MS,
    dispersion_px: float = IDT_DISPERSION_PX,
) -> list[Fixation]:
    """Dispersion-threshold fixation identification for one eye stream.

    Greedy left to right: seed a window spanning the minimum duration,
    accept it if its dispersion is within threshold, then extend it while it
    stays within; otherwise slide the start by one sample. Invalid samples
    break windows.
    """
    t, x, y, v = _eye_channels(samples, eye)
    n = t.size
    if n == 0:
        return []
    dt = _frame_period(samples)
    min_len = max(1, math.ceil(duration_ms / dt - 1e-9))
    out: list[Fixation] = []
    i = 0
    while i + min_len <= n:
        if not np.all(v[i : i + min_len]):
            i += 1
            continue
        j = i + min_len - 1
        xmin = float(np.min(x[i : j + 1]))
        xmax = float(np.max(x[i : j + 1]))
        ymin = float(np.min(y[i : j + 1]))
        ymax = float(np.max(y[i : j + 1]))
        if (xmax - xmin) + (ymax - ymin) > dispersion_px:
            i += 1
            continue
        while j + 1 < n and v[j + 1]:
            nxmin = min(xmin, float(x[j + 1]))
            nxmax = max(xmax, float(x[j + 1]))
            nymin = min(ymin, float(y[j + 1]))
            nymax = max(ymax, float(y[j + 1]))
            if (nxmax - nxmin) + (nymax - nymin) > dispersion_px:
                break
            xmin, xmax, ymin, ymax = nxmin, nxmax, nymin, nymax
            j += 1
        out.append(
            Fixation(
                eye=eye,
                start_ms=float(t[i]),
                end_ms=float(t[j]) + dt,
                centroid_px=(float(np.mean(x[i : j + 1])), float(np.mean(y[i : j + 1]))),
                sample_range=(i, j + 1),
            )
        )
        i = j + 1
    return out


def _both_invalid_spans(samples: Sequence[GazeSample]) -> list[tuple[int, int]]:
    """Maximal half-open index spans where both eyes are invalid."""
    spans = []
    i = 0
    n = len(samples)
    while i < n:
        if samples[i].left_valid or samples[i].right_valid:
            i += 1
            continue
        j = i
        while j + 1 < n and not (samples[j + 1].left_valid or samples[j + 1].right_valid):
            j += 1
        spans.append((i, j + 1))
        i = j + 1
    return spans


def detect_blinks(samples: Sequence[GazeSample]) -> list[Blink]:
    """Binocular dropouts lasting BLINK_MIN_MS..BLINK_MAX_MS become blinks."""
    dt = _frame_period(samples)
    out = []
    for i, j in _both_invalid_spans(samples):
        dur = (j - i) * dt
        if BLINK_MIN_MS <= dur <= BLINK_MAX_MS:
            out.append(Blink(start_ms=samples[i].t_ms, end_ms=samples[j - 1].t_ms + dt))
    return out


def detect_loss(samples: Sequence[GazeSample]) -> list[tuple[float, float]]:
    """Binocular dropouts longer than the blink band: tracking loss spans."""
    dt = _frame_period(samples)
    out = []
    for i, j in _both_invalid_spans(samples):
        dur = (j - i) * dt
        if dur > BLINK_MAX_MS:
            out.append((samples[i].t_ms, samples[j - 1].t_ms + dt))
    return out


def _overlaps(a0: float, a1: float, b0: float, b1: float) -> bool:
    return min(a1, b1) > max(a0, b0)


def detect_saccades(
    fixations: Sequence[Fixation],
    samples: Sequence[GazeSample],
    eye: str,
    blinks: Optional[Sequence[Blink]] = None,
) -> list[Saccade]:
    """One saccade per qualifying gap between consecutive same-eye fixations.

    A gap qualifies when it contains at least one valid sample and does not
    overlap a blink. Displacement runs from the preceding fixation centroid
    to the following one; at the recording edges the first/last valid gap
    sample stands in for the missing endpoint.
    """
    if eye not in ("left", "right"):
        raise ValueError("saccades are segmented per eye: left or right")
    if not fixations:
        return []
    if blinks is None:
        blinks = detect_blinks(samples)
    t, x, y, v = _eye_channels(samples, eye)
    dt = _frame_period(samples)
    n = len(samples)

    def gap_endpoints(lo: int, hi: int):
        """Valid sample info within half-open index gap [lo, hi)."""
        idx = [k for k in range(lo, hi) if v[k]]
        if not idx:
            return None
        return idx[0], idx[-1]

    out: list[Saccade] = []

    def emit(p0, t0, p1, t1):
        dx = p1[0] - p0[0]
        dy = p1[1] - p0[1]
        length = math.hypot(dx, dy)
        dur = t1 - t0
        vel = length / (dur / 1000.0) if dur > 0 else 0.0
        out.append(
            Saccade(
                eye=eye,
                start_ms=t0,
                end_ms=t1,
                length_px=length,
                velocity_px_s=vel,
                angle_deg=vector_angle_deg(dx, dy),
            )
        )

    def gap_ok(lo: int, hi: int) -> Optional[tuple[int, int]]:
        ends = gap_endpoints(lo, hi)
        if ends is None:
            return None
        g0 = t[lo]
        g1 = t[hi - 1] + dt
        if any(_overlaps(g0, g1, b.start_ms, b.end_ms) for b in blinks):
            return None
        return ends

    first = fixations[0]
    if first.sample_range[0] > 0:
        ends = gap_ok(0, first.sample_range[0])
        if ends is not None:
            k = ends[0]
            emit((float(x[k]), float(y[k])), float(t[k]), first.centroid_px, first.start_ms)

    for a, b in zip(fixations, fixations[1:]):
        lo, hi = a.sample_range[1], b.sample_range[0]
        if hi <= lo:
            continue
        if gap_ok(lo, hi) is not None:
            emit(a.centroid_px, a.end_ms, b.centroid_px, b.start_ms)

    last = fixations[-1]
    if last.sample_range[1] < n:
        ends = gap_ok(last.sample_range[1], n)
        if ends is not None:
            k = ends[1]
            emit(last.centroid_px, last.end_ms, (float(x[k]), float(y[k])), float(t[k]) + dt)

    return out


def pair_fixations(
    left: Sequence[Fixation], right: Sequence[Fixation]
) -> list[tuple[Fixation, Fixation]]:
    """Match left/right fixations whose intervals overlap by >= 50% of the
    shorter one. Greedy by overlap, ties broken by earlier start; each
    fixation joins at most one pair.
    """
    candidates = []
    for li, lf in enumerate(left):
        for ri, rf in enumerate(right):
            ov = min(lf.end_ms, rf.end_ms) - max(lf.start_ms, rf.start_ms)
            if ov <= 0:
                continue
            shorter = min(lf.duration_ms, rf.duration_ms)
            if shorter <= 0 or ov < 0.5 * shorter:
                continue
            candidates.append((-ov, lf.start_ms, rf.start_ms, li, ri))
    candidates.sort()
    used_l: set[int] = set()
    used_r: set[int] = set()
    pairs = []
    for _, _, _, li, ri in candidates:
        if li in used_l or ri in used_r:
            continue
        used_l.add(li)
        used_r.add(ri)
        pairs.append((left[li], right[ri]))
    pairs.sort(key=lambda p: p[0].start_ms)
    return pairs


def detect_events(
    samples: Sequence[GazeSample],
    duration_ms: float = IDT_DURATION_MS,
    dispersion_px: float = IDT_DISPERSION_PX,
) -> OculomotorEvents:
    """Run the full segmentation over one span of samples."""
    blinks = detect_blinks(samples)
    lf = detect_fixations_idt(samples, "left", duration_ms, dispersion_px)
    rf = detect_fixations_idt(samples, "right", duration_ms, dispersion_px)
    cf = detect_fixations_idt(samples, "cyclopean", duration_ms, dispersion_px)
    return OculomotorEvents(
        left_fixations=lf,
        right_fixations=rf,
        cyclopean_fixations=cf,
        left_saccades=detect_saccades(lf, samples, "left", blinks),
        right_saccades=detect_saccades(rf, samples, "right", blinks),
        blinks=blinks,
    )


def events_to_jsonl(events: OculomotorEvents) -> str:
    """Debug dump of all events, one JSON object per line."""
    lines = []
    for f in events.left_fixations + events.right_fixations + events.cyclopean_fixations:
        lines.append(
            json.dumps(
                {
                    "kind": "fixation",
                    "eye": f.eye,
                    "start_ms": f.start_ms,
                    "end_ms": f.end_ms,
                    "centroid_px": list(f.centroid_px),
                }
            )
        )
    for s in events.left_saccades + events.right_saccades:
        lines.append(
            json.dumps(
                {
                    "kind": "saccade",
                    "eye": s.eye,
                    "start_ms": s.start_ms,
                    "end_ms": s.end_ms,
                    "length_px": s.length_px,
                    "velocity_px_s": s.velocity_px_s,
                    "angle_deg": s.angle_deg,
                }
            )
        )
    for b in events.blinks:
        lines.append(json.dumps({"kind": "blink", "start_ms": b.start_ms, "end_ms": b.end_ms}))
    return "\n".join(lines) + ("\n" if lines else "")
