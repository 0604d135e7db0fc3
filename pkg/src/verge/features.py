"""Sliding-window feature extraction.

Each window yields 120 features in four groups: vergence/distance (17),
fixation (13), saccade (86), and blink (4). The layout is frozen in
FEATURE_MANIFEST; models store the manifest they were trained on so column
order can never drift silently.

Event membership: an event belongs to a window when its midpoint falls
inside it (per-event statistics and counts); duration totals use the
clipped in-window portion instead, so a fixation straddling the boundary
contributes only its overlap to "total fixation duration".
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gaze import GazeSample, Recording, TIME_EPS_MS
from .oculomotor import (
    HORIZONTAL_BAND_DEG,
    OculomotorEvents,
    detect_events,
    pair_fixations,
)
from .vergence import eye_geometry, fixation_circle, fixation_vergence, pair_stats

DESC_STAT_NAMES = ("mean", "sd", "median", "min", "max", "range", "kurtosis", "skewness")

MIN_VALID_RATIO = 0.5
WINDOW_SIZES_MS = (250.0, 500.0, 750.0, 1000.0)


@dataclass(frozen=True)
class DescStats:
    mean: float
    sd: float
    median: float
    min: float
    max: float
    range: float
    kurtosis: float
    skewness: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.mean, self.sd, self.median, self.min, self.max, self.range, self.kurtosis, self.skewness)


def desc_stats(xs: Sequence[float]) -> DescStats:
    """Eight descriptive statistics of a value list.

    SD uses the n-1 denominator; skewness is m3/m2^1.5 and kurtosis the
    excess m4/m2^2 - 3 with n-denominator central moments. Degenerate cases
    (empty input, zero variance, too few samples) yield zeros rather than
    NaN so downstream models never see non-finite values.
    """
    arr = np.asarray(xs, dtype=float)
    n = arr.size
    if n == 0:
        return DescStats(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    mean = float(np.mean(arr))
    mn = float(np.min(arr))
    mx = float(np.max(arr))
    med = float(np.median(arr))
    sd = float(math.sqrt(float(np.sum((arr - mean) ** 2)) / (n - 1))) if n >= 2 else 0.0
    centered = arr - mean
    m2 = float(np.mean(centered**2))
    skew = 0.0
    kurt = 0.0
    if m2 > 0.0:
        if n >= 3:
            skew = float(np.mean(centered**3)) / m2**1.5
        if n >= 4:
            kurt = float(np.mean(centered**4)) / m2**2 - 3.0
    return DescStats(mean, sd, med, mn, mx, mx - mn, kurt, skew)


# ---------------------------------------------------------------------------
# Feature manifest


def _stat_names(prefix: str) -> list[str]:
    return [f"{prefix}_{s}" for s in DESC_STAT_NAMES]


VERGENCE_FEATURES: tuple[str, ...] = (
    "pair_disparity_mean",
    "pair_disparity_sd",
    "focus_distance_mean",
    "focus_distance_sd",
    "fixation_pair_centroid_distance_mean",
    "fixation_pair_centroid_distance_sd",
    "fixation_pair_center_distance_mean",
    "fixation_pair_center_distance_sd",
    "fixation_pair_normalized_center_distance_mean",
    "fixation_pair_normalized_center_distance_sd",
    "pair_angle_mean",
    "pair_angle_sd",
    "fixation_pair_centroid_angle_mean",
    "fixation_pair_center_angle_mean",
    "eye_screen_distance_mean",
    "pupillary_distance_mean",
    "pupillary_distance_sd",
)

FIXATION_FEATURES: tuple[str, ...] = tuple(
    ["left_fixation_circle_radius_mean", "right_fixation_circle_radius_mean"]
    + _stat_names("fixation_duration")
    + ["fixation_total_duration", "fixation_count", "fixation_saccade_duration_ratio"]
)

SACCADE_FEATURES: tuple[str, ...] = tuple(
    [f"{eye}_saccade_{q}_{s}" for eye in ("left", "right") for q in ("duration", "length", "velocity") for s in DESC_STAT_NAMES]
    + [f"{eye}_saccade_{q}" for eye in ("left", "right") for q in ("total_duration", "count")]
    + [f"{eye}_saccade_{q}_{s}" for eye in ("left", "right") for q in ("angle_x", "angle_prev") for s in DESC_STAT_NAMES]
    + [f"{eye}_saccade_horizontal_ratio" for eye in ("left", "right")]
)

BLINK_FEATURES: tuple[str, ...] = (
    "blink_duration_mean",
    "blink_duration_sd",
    "blink_total_duration",
    "blink_count",
)

FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "vergence_distance": VERGENCE_FEATURES,
    "fixation": FIXATION_FEATURES,
    "saccade": SACCADE_FEATURES,
    "blink": BLINK_FEATURES,
}

FEATURE_MANIFEST: tuple[str, ...] = VERGENCE_FEATURES + FIXATION_FEATURES + SACCADE_FEATURES + BLINK_FEATURES

FEATURE_SUBSETS: dict[str, tuple[str, ...]] = {
    "full": FEATURE_MANIFEST,
    "vergence": VERGENCE_FEATURES,
    "classic": FIXATION_FEATURES + SACCADE_FEATURES + BLINK_FEATURES,
}

assert len(VERGENCE_FEATURES) == 17
assert len(FIXATION_FEATURES) == 13
assert len(SACCADE_FEATURES) == 86
assert len(BLINK_FEATURES) == 4
assert len(FEATURE_MANIFEST) == 120
assert len(set(FEATURE_MANIFEST)) == 120


# ---------------------------------------------------------------------------
# Windows


@dataclass(frozen=True)
class Window:
    start_ms: float
    end_ms: float
    size_ms: float
    recording: Recording
    valid_ratio: float

    def samples(self) -> list[GazeSample]:
        return window_slice(self.recording.samples, self.start_ms, self.end_ms)

    def contains_midpoint(self, mid_ms: float) -> bool:
        return self.start_ms - TIME_EPS_MS <= mid_ms < self.end_ms - TIME_EPS_MS


def window_slice(samples: Sequence[GazeSample], start_ms: float, end_ms: float) -> list[GazeSample]:
    """Samples with start <= t < end, tolerant of grid float noise."""
    return [s for s in samples if start_ms - TIME_EPS_MS <= s.t_ms < end_ms - TIME_EPS_MS]


def generate_windows(rec: Recording, size_ms: float, step_ms: Optional[float] = None) -> list[Window]:
    """Sliding windows covering the recording, stepped by size/4 by default."""
    if size_ms <= 0:
        raise ValueError("size_ms must be positive")
    if step_ms is None:
        step_ms = size_ms / 4.0
    if step_ms <= 0:
        raise ValueError("step_ms must be positive")
    if not rec.samples:
        return []
    t0 = rec.samples[0].t_ms
    span = rec.span_ms
    if span < size_ms:
        return []
    k_max = int(math.floor((span - size_ms) / step_ms + 1e-9))
    out = []
    for k in range(k_max + 1):
        start = t0 + k * step_ms
        end = start + size_ms
        sl = window_slice(rec.samples, start, end)
        ratio = (sum(1 for s in sl if s.both_valid) / len(sl)) if sl else 0.0
        out.append(Window(start_ms=start, end_ms=end, size_ms=size_ms, recording=rec, valid_ratio=ratio))
    return out


# ---------------------------------------------------------------------------
# Extraction


@dataclass(frozen=True)
class GeometryConfig:
    pitch_mm: float
    default_d_mm: float = 600.0
    default_pd_mm: float = 63.0


@dataclass
class FeatureVector:
    window: Window
    values: np.ndarray  # aligned with FEATURE_MANIFEST

    def __post_init__(self):
        if self.values.shape != (len(FEATURE_MANIFEST),):
            raise ValueError(f"expected {len(FEATURE_MANIFEST)} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            bad = [FEATURE_MANIFEST[i] for i in np.flatnonzero(~np.isfinite(self.values))]
            raise ValueError(f"non-finite features: {bad}")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_MANIFEST, self.values.tolist()))


def _clipped_overlap(start: float, end: float, w: Window) -> float:
    return max(0.0, min(end, w.end_ms) - max(start, w.start_ms))


def _assigned(events, w: Window):
    return [e for e in events if w.contains_midpoint(e.midpoint_ms)]


def _angle_diff_deg(a: float, b: float) -> float:
    """Absolute angle between two directions, in [0, 180]."""
    return abs((a - b + 180.0) % 360.0 - 180.0)


def extract_features(
    window: Window,
    events: OculomotorEvents,
    geom: GeometryConfig,
    event_samples: Optional[Sequence[GazeSample]] = None,
) -> FeatureVector:
    """Assemble the 120-feature vector for one window.

    ``events`` must come from the window's samples (the canonical pipeline
    re-segments each window slice); events reaching past the window edges
    are handled by the midpoint/clipping membership rules. ``event_samples``
    is the sequence the events' sample ranges index into, defaulting to the
    window slice itself.
    """
    samples = window.samples()
    if event_samples is None:
        event_samples = samples
    vals: dict[str, float] = {}

    # --- vergence / distance group
    ps = pair_stats(samples, geom.pitch_mm, geom.default_d_mm, geom.default_pd_mm)
    vals["pair_disparity_mean"] = ps.disparity_mean_px
    vals["pair_disparity_sd"] = ps.disparity_sd_px
    vals["pair_angle_mean"] = ps.angle_mean_deg
    vals["pair_angle_sd"] = ps.angle_sd_deg
    vals["focus_distance_mean"] = ps.focus_dist_mean_mm
    vals["focus_distance_sd"] = ps.focus_dist_sd_mm

    left_fx = _assigned(events.left_fixations, window)
    right_fx = _assigned(events.right_fixations, window)
    pairs = pair_fixations(left_fx, right_fx)
    pv = [fixation_vergence(p, event_samples) for p in pairs]

    def mean_sd_of(xs: list[float]) -> tuple[float, float]:
        st = desc_stats(xs)
        return st.mean, st.sd

    vals["fixation_pair_centroid_distance_mean"], vals["fixation_pair_centroid_distance_sd"] = mean_sd_of(
        [v.centroid_dist_px for v in pv]
    )
    vals["fixation_pair_center_distance_mean"], vals["fixation_pair_center_distance_sd"] = mean_sd_of(
        [v.circle_center_dist_px for v in pv]
    )
    (
        vals["fixation_pair_normalized_center_distance_mean"],
        vals["fixation_pair_normalized_center_distance_sd"],
    ) = mean_sd_of([v.normalized_center_dist for v in pv])
    vals["fixation_pair_centroid_angle_mean"] = mean_sd_of([v.centroid_angle_deg for v in pv])[0]
    vals["fixation_pair_center_angle_mean"] = mean_sd_of([v.center_angle_deg for v in pv])[0]

    d_mean, _, pd_mean, pd_sd = eye_geometry(samples, geom.default_d_mm, geom.default_pd_mm)
    vals["eye_screen_distance_mean"] = d_mean
    vals["pupillary_distance_mean"] = pd_mean
    vals["pupillary_distance_sd"] = pd_sd

    # --- fixation group (cyclopean durations, per-eye circle radii)
    for eye, fixes in (("left", left_fx), ("right", right_fx)):
        radii = [fixation_circle(f, event_samples).radius_px for f in fixes]
        vals[f"{eye}_fixation_circle_radius_mean"] = mean_sd_of(radii)[0]

    cyc_fx = _assigned(events.cyclopean_fixations, window)
    for name, v in zip(_stat_names("fixation_duration"), desc_stats([f.duration_ms for f in cyc_fx]).as_tuple()):
        vals[name] = v
    fix_total = sum(_clipped_overlap(f.start_ms, f.end_ms, window) for f in events.cyclopean_fixations)
    vals["fixation_total_duration"] = fix_total
    vals["fixation_count"] = float(len(cyc_fx))

    # --- saccade group
    sacc_totals = {}
    for eye, sacc in (("left", events.left_saccades), ("right", events.right_saccades)):
        assigned = _assigned(sacc, window)
        for q, xs in (
            ("duration", [s.duration_ms for s in assigned]),
            ("length", [s.length_px for s in assigned]),
            ("velocity", [s.velocity_px_s for s in assigned]),
            ("angle_x", [s.angle_deg for s in assigned]),
            ("angle_prev", [_angle_diff_deg(b.angle_deg, a.angle_deg) for a, b in zip(assigned, assigned[1:])]),
        ):
            for name, v in zip(_stat_names(f"{eye}_saccade_{q}"), desc_stats(xs).as_tuple()):
                vals[name] = v
        total = sum(_clipped_overlap(s.start_ms, s.end_ms, window) for s in sacc)
        sacc_totals[eye] = total
        vals[f"{eye}_saccade_total_duration"] = total
        vals[f"{eye}_saccade_count"] = float(len(assigned))
        horiz = [s for s in assigned if abs(s.angle_deg) <= HORIZONTAL_BAND_DEG]
        vals[f"{eye}_saccade_horizontal_ratio"] = len(horiz) / len(assigned) if assigned else 0.0

    # ratio uses the per-eye average saccade time since saccades are
    # segmented per eye while fixations here are cyclopean
    sacc_avg_total = 0.5 * (sacc_totals["left"] + sacc_totals["right"])
    vals["fixation_saccade_duration_ratio"] = fix_total / sacc_avg_total if sacc_avg_total > 0 else 0.0

    # --- blink group
    blinks = _assigned(events.blinks, window)
    bstats = desc_stats([b.duration_ms for b in blinks])
    vals["blink_duration_mean"] = bstats.mean
    vals["blink_duration_sd"] = bstats.sd
    vals["blink_total_duration"] = sum(_clipped_overlap(b.start_ms, b.end_ms, window) for b in events.blinks)
    vals["blink_count"] = float(len(blinks))

    return FeatureVector(window=window, values=np.array([vals[k] for k in FEATURE_MANIFEST]))


def featurize(
    rec: Recording,
    size_ms: float,
    step_ms: Optional[float] = None,
    geom: Optional[GeometryConfig] = None,
) -> list[FeatureVector]:
    """Window the recording and extract one feature vector per window.

    Events are re-segmented on each window slice, which keeps batch output
    identical to the streaming engine's buffer-local view.
    """
    if geom is None:
        geom = GeometryConfig(pitch_mm=rec.screen.pixel_pitch_mm)
    out = []
    for w in generate_windows(rec, size_ms, step_ms):
        sl = w.samples()
        events = detect_events(sl)
        out.append(extract_features(w, events, geom))
    return out


# ---------------------------------------------------------------------------
# Feature table (the on-disk matrix shared by training and evaluation)

META_COLUMNS = ("participant_id", "window_start_ms", "window_size_ms", "label", "valid_ratio")


@dataclass
class FeatureTable:
    """A feature matrix with per-row metadata, aligned to its manifest."""

    X: np.ndarray  # (n, m)
    feature_names: tuple[str, ...]
    participant_ids: list[str]
    window_starts: list[float]
    window_sizes: list[float]
    labels: list[Optional[str]]
    valid_ratios: list[float]

    def __post_init__(self):
        n = self.X.shape[0]
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise ValueError("X shape does not match the manifest")
        for col in (self.participant_ids, self.window_starts, self.window_sizes, self.labels, self.valid_ratios):
            if len(col) != n:
                raise ValueError("metadata length mismatch")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, subset_name: str) -> "FeatureTable":
        names = FEATURE_SUBSETS[subset_name]
        idx = [self.feature_names.index(n) for n in names]
        return FeatureTable(
            X=self.X[:, idx],
            feature_names=tuple(names),
            participant_ids=list(self.participant_ids),
            window_starts=list(self.window_starts),
            window_sizes=list(self.window_sizes),
            labels=list(self.labels),
            valid_ratios=list(self.valid_ratios),
        )

    def select(self, mask: Sequence[bool]) -> "FeatureTable":
        idx = [i for i, keep in enumerate(mask) if keep]
        return FeatureTable(
            X=self.X[idx],
            feature_names=self.feature_names,
            participant_ids=[self.participant_ids[i] for i in idx],
            window_starts=[self.window_starts[i] for i in idx],
            window_sizes=[self.window_sizes[i] for i in idx],
            labels=[self.labels[i] for i in idx],
            valid_ratios=[self.valid_ratios[i] for i in idx],
        )

    def labeled(self) -> "FeatureTable":
        return self.select([lab is not None for lab in self.labels])

    @classmethod
    def from_vectors(
        cls,
        vectors: Sequence[FeatureVector],
        participant_id: str,
        labels: Optional[Sequence[Optional[str]]] = None,
        min_valid_ratio: float = MIN_VALID_RATIO,
    ) -> "FeatureTable":
        if labels is None:
            labels = [None] * len(vectors)
        keep = [i for i, v in enumerate(vectors) if v.window.valid_ratio >= min_valid_ratio]
        vecs = [vectors[i] for i in keep]
        return cls(
            X=np.array([v.values for v in vecs]).reshape(len(vecs), len(FEATURE_MANIFEST)),
            feature_names=FEATURE_MANIFEST,
            participant_ids=[participant_id] * len(vecs),
            window_starts=[vectors[i].window.start_ms for i in keep],
            window_sizes=[vectors[i].window.size_ms for i in keep],
            labels=[labels[i] for i in keep],
            valid_ratios=[vectors[i].window.valid_ratio for i in keep],
        )

    @classmethod
    def concat(cls, tables: Sequence["FeatureTable"]) -> "FeatureTable":
        if not tables:
            raise ValueError("nothing to concatenate")
        names = tables[0].feature_names
        for t in tables[1:]:
            if t.feature_names != names:
                raise ValueError("manifest mismatch between tables")
        return cls(
            X=np.concatenate([t.X for t in tables], axis=0),
            feature_names=names,
            participant_ids=sum((t.participant_ids for t in tables), []),
            window_starts=sum((t.window_starts for t in tables), []),
            window_sizes=sum((t.window_sizes for t in tables), []),
            labels=sum((t.labels for t in tables), []),
            valid_ratios=sum((t.valid_ratios for t in tables), []),
        )

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + list(META_COLUMNS))
            for i in range(len(self)):
                writer.writerow(
                    [repr(v) for v in self.X[i].tolist()]
                    + [
                        self.participant_ids[i],
                        repr(self.window_starts[i]),
                        repr(self.window_sizes[i]),
                        self.labels[i] or "",
                        repr(self.valid_ratios[i]),
                    ]
                )

    @classmethod
    def from_csv(cls, path: str) -> "FeatureTable":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[-len(META_COLUMNS):] != list(META_COLUMNS):
                raise ValueError(f"{path}: unexpected column layout")
            names = tuple(header[: -len(META_COLUMNS)])
            rows = list(reader)
        m = len(names)
        X = np.empty((len(rows), m))
        pids, starts, sizes, labels, ratios = [], [], [], [], []
        for i, row in enumerate(rows):
            X[i] = [float(v) for v in row[:m]]
            pids.append(row[m])
            starts.append(float(row[m + 1]))
            sizes.append(float(row[m + 2]))
            labels.append(row[m + 3] or None)
            ratios.append(float(row[m + 4]))
        return cls(
            X=X,
            feature_names=names,
            participant_ids=pids,
            window_starts=starts,
            window_sizes=sizes,
            labels=labels,
            valid_ratios=ratios,
        )
