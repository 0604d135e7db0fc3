"""Gradual-blur annotation: schedules, labels, and deblur statistics.

A session blurs the stimulus at random 10-20 s intervals with Gaussian
sigma growing linearly in time (sigma = alpha * t). A viewer who is
visually on task reliably notices the blur by the discrimination time T_d
and clears it within a short reaction time T_r, so a slow deblur betrays
attention directed inward. Each deblur event therefore yields, when slow
enough, a conservative internal-thought interval
[blur_start + T_d, deblur - T_r] plus a subsequent spontaneous on-task
interval of 1.5 s.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .features import Window

LABEL_INTERNAL = "internal_thought"
LABEL_DELIBERATE = "deliberate_on_task"
LABEL_SPONTANEOUS = "spontaneous_on_task"

DEFAULT_TD_MS = 1200.0
DEFAULT_TR_MS = 300.0
SPONTANEOUS_SPAN_MS = 1500.0
ENGAGED_DEBLUR_MS = 1500.0
MAX_SEGMENT_MS = 10000.0  # longer internal-thought candidates are outliers
ONSET_GAP_MIN_MS = 10000.0
ONSET_GAP_MAX_MS = 20000.0
BLUR_APERTURE_PX = 15
DEFAULT_WINDOW_COVERAGE = 0.8


def blur_sigma(alpha: float, elapsed_ms: float) -> float:
    """Gaussian sigma after ``elapsed_ms`` of blurring at speed ``alpha``."""
    return alpha * (elapsed_ms / 1000.0)


@dataclass(frozen=True)
class BlurSchedule:
    session_id: str
    alpha: float
    aperture_px: int
    onsets_ms: tuple[float, ...]
    rng_seed: int
    video_duration_ms: float

    def gaps_ms(self) -> list[float]:
        """Inter-onset gaps; at runtime each re-anchors on the actual deblur."""
        gaps = [self.onsets_ms[0]]
        gaps.extend(b - a for a, b in zip(self.onsets_ms, self.onsets_ms[1:]))
        return gaps

    def to_jsonable(self) -> dict:
        return {
            "session_id": self.session_id,
            "alpha": self.alpha,
            "aperture_px": self.aperture_px,
            "onsets_ms": list(self.onsets_ms),
            "rng_seed": self.rng_seed,
            "video_duration_ms": self.video_duration_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_jsonable(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BlurSchedule":
        d = json.loads(text)
        return cls(
            session_id=d["session_id"],
            alpha=float(d["alpha"]),
            aperture_px=int(d["aperture_px"]),
            onsets_ms=tuple(float(v) for v in d["onsets_ms"]),
            rng_seed=int(d["rng_seed"]),
            video_duration_ms=float(d["video_duration_ms"]),
        )


def make_schedule(video_duration_ms: float, alpha: float, seed: int, session_id: str = "") -> BlurSchedule:
    """Draw blur onsets at uniform 10-20 s gaps until the video ends.

    Scheduling assumes the deblur happens at the onset; the UI re-anchors
    later gaps on the actual deblur moments at runtime.
    """
    if video_duration_ms <= ONSET_GAP_MAX_MS:
        raise ValueError("video too short for a blur schedule")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    rng = np.random.default_rng(seed)
    onsets: list[float] = []
    t = 0.0
    while True:
        t += float(rng.uniform(ONSET_GAP_MIN_MS, ONSET_GAP_MAX_MS))
        if t >= video_duration_ms:
            break
        onsets.append(t)
    return BlurSchedule(
        session_id=session_id,
        alpha=alpha,
        aperture_px=BLUR_APERTURE_PX,
        onsets_ms=tuple(onsets),
        rng_seed=seed,
        video_duration_ms=video_duration_ms,
    )


@dataclass(frozen=True)
class DeblurEvent:
    blur_start_ms: float
    deblur_ms: float

    def __post_init__(self):
        if self.deblur_ms <= self.blur_start_ms:
            raise ValueError("deblur must come after blur start")

    @property
    def t_deblur_ms(self) -> float:
        return self.deblur_ms - self.blur_start_ms


@dataclass(frozen=True)
class LabeledSegment:
    label: str
    start_ms: float
    end_ms: float
    source: str = ""
    engaged: bool = False

    def __post_init__(self):
        if self.end_ms <= self.start_ms:
            raise ValueError("segment must have positive duration")

    @property
    def duration_ms(self) -> float:
        return self.end_ms - self.start_ms

    def to_jsonable(self) -> dict:
        return {
            "class": self.label,
            "start_ms": self.start_ms,
            "end_ms": self.end_ms,
            "source": self.source,
            "engaged": self.engaged,
        }

    @classmethod
    def from_jsonable(cls, d: dict) -> "LabeledSegment":
        return cls(
            label=d["class"],
            start_ms=float(d["start_ms"]),
            end_ms=float(d["end_ms"]),
            source=d.get("source", ""),
            engaged=bool(d.get("engaged", False)),
        )


def session_segment(label: str, start_ms: float, end_ms: float, source: str = "session") -> LabeledSegment:
    """Whole-session annotation, e.g. an instructed focused-viewing clip."""
    return LabeledSegment(label=label, start_ms=start_ms, end_ms=end_ms, source=source)


def derive_labels(
    events: Sequence[DeblurEvent],
    t_d_ms: float = DEFAULT_TD_MS,
    t_r_ms: float = DEFAULT_TR_MS,
) -> list[LabeledSegment]:
    """Turn deblur events into labelled time segments.

    Every event yields a 1.5 s spontaneous on-task segment starting at
    deblur - T_r, flagged engaged when the deblur was quick
    (T_deblur <= 1.5 s). Slow deblurs (T_deblur > T_d + T_r) additionally
    yield the internal-thought segment [blur_start + T_d, deblur - T_r],
    unless it exceeds the 10 s outlier bound.
    """
    for a, b in zip(events, events[1:]):
        if b.blur_start_ms < a.deblur_ms:
            raise ValueError("deblur events overlap")
    out: list[LabeledSegment] = []
    for i, ev in enumerate(events):
        source = f"deblur[{i}]"
        engaged = ev.t_deblur_ms <= ENGAGED_DEBLUR_MS
        if ev.t_deblur_ms > t_d_ms + t_r_ms:
            start = ev.blur_start_ms + t_d_ms
            end = ev.deblur_ms - t_r_ms
            if end - start <= MAX_SEGMENT_MS:
                out.append(LabeledSegment(LABEL_INTERNAL, start, end, source=source))
        out.append(
            LabeledSegment(
                LABEL_SPONTANEOUS,
                ev.deblur_ms - t_r_ms,
                ev.deblur_ms - t_r_ms + SPONTANEOUS_SPAN_MS,
                source=source,
                engaged=engaged,
            )
        )
    return out


@dataclass
class DeblurHistogram:
    bin_ms: float
    counts: list[int]  # bin k covers [k*bin_ms, (k+1)*bin_ms)
    n_events: int
    it_duration_mean_ms: float
    it_duration_sd_ms: float


def deblur_histogram(
    events: Sequence[DeblurEvent],
    bin_ms: float,
    t_d_ms: float = DEFAULT_TD_MS,
    t_r_ms: float = DEFAULT_TR_MS,
) -> DeblurHistogram:
    """Histogram of deblur times plus conservative internal-thought duration
    statistics (slow deblurs only, 10 s outliers removed)."""
    if bin_ms <= 0:
        raise ValueError("bin_ms must be positive")
    times = [ev.t_deblur_ms for ev in events]
    if times:
        n_bins = int(max(times) // bin_ms) + 1
        counts = [0] * n_bins
        for t in times:
            counts[min(int(t // bin_ms), n_bins - 1)] += 1
    else:
        counts = []
    durations = [
        t - t_d_ms - t_r_ms
        for t in times
        if t > t_d_ms + t_r_ms and (t - t_d_ms - t_r_ms) <= MAX_SEGMENT_MS
    ]
    if durations:
        arr = np.asarray(durations)
        mean = float(np.mean(arr))
        sd = float(math.sqrt(float(np.sum((arr - mean) ** 2)) / (arr.size - 1))) if arr.size >= 2 else 0.0
    else:
        mean, sd = 0.0, 0.0
    return DeblurHistogram(
        bin_ms=bin_ms,
        counts=counts,
        n_events=len(events),
        it_duration_mean_ms=mean,
        it_duration_sd_ms=sd,
    )


def label_windows(
    windows: Sequence[Window],
    segments: Sequence[LabeledSegment],
    coverage: float = DEFAULT_WINDOW_COVERAGE,
) -> list[Optional[str]]:
    """Assign each window the class of a segment covering >= ``coverage`` of
    it, or None when no single segment does (straddlers stay unlabelled)."""
    out: list[Optional[str]] = []
    for w in windows:
        label = None
        needed = coverage * (w.end_ms - w.start_ms)
        for seg in segments:
            overlap = min(w.end_ms, seg.end_ms) - max(w.start_ms, seg.start_ms)
            if overlap >= needed - 1e-9:
                label = seg.label
                break
        out.append(label)
    return out


# ---------------------------------------------------------------------------
# Event log and segment file I/O

EVENT_KIND_BLUR = "blur_start"
EVENT_KIND_DEBLUR = "deblur"


def parse_event_log(lines: Sequence[str]) -> list[DeblurEvent]:
    """Pair blur_start/deblur records from a session event log.

    Unknown kinds are ignored; a deblur without an open blur, or a blur
    opening over another, is a hard error. A trailing unanswered blur is
    dropped (the session ended mid-blur).
    """
    events: list[DeblurEvent] = []
    open_blur: Optional[float] = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"line {lineno}: invalid JSON: {e}") from e
        kind = d.get("kind")
        if kind == EVENT_KIND_BLUR:
            if open_blur is not None:
                raise ValueError(f"line {lineno}: blur_start while already blurred")
            open_blur = float(d["t_ms"])
        elif kind == EVENT_KIND_DEBLUR:
            if open_blur is None:
                raise ValueError(f"line {lineno}: deblur without blur_start")
            events.append(DeblurEvent(blur_start_ms=open_blur, deblur_ms=float(d["t_ms"])))
            open_blur = None
        # other kinds (session_end, markers) are passed over
    return events


def read_event_log(path: str) -> list[DeblurEvent]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_event_log(fh.readlines())


def write_segments(segments: Sequence[LabeledSegment], path: str, participant_id: str = "", auxiliary: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "participant_id": participant_id,
                "auxiliary": auxiliary,
                "segments": [s.to_jsonable() for s in segments],
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")


def read_segments(path: str) -> tuple[list[LabeledSegment], str, bool]:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    segs = [LabeledSegment.from_jsonable(s) for s in d["segments"]]
    return segs, d.get("participant_id", ""), bool(d.get("auxiliary", False))
