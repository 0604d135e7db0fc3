"""Domain types and preprocessing for raw binocular gaze streams.

A recording is a time-ordered list of binocular samples in screen pixel
coordinates (origin top-left, x right, y down). Before any event detection
or feature extraction the stream is resampled onto a fixed-rate grid and
smoothed with a speed-adaptive low-pass (1-euro) filter.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

# Dropouts shorter than this are bridged by interpolation during resampling;
# longer ones stay invalid and become blink / tracking-loss candidates.
MAX_BRIDGE_GAP_MS = 100.0

# Timestamp comparisons on the fixed-rate grid tolerate float noise up to
# this many milliseconds (grid points are ~16.7 ms apart at 60 Hz).
TIME_EPS_MS = 1e-6


class DataFormatError(ValueError):
    """Raised for unreadable, empty, or badly malformed gaze data files."""


@dataclass(frozen=True)
class ScreenConfig:
    """Physical display geometry; pixel pitch converts px to mm."""

    width_px: int
    height_px: int
    width_mm: float
    height_mm: float

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("screen pixel dimensions must be positive")
        if self.width_mm <= 0 or self.height_mm <= 0:
            raise ValueError("screen physical dimensions must be positive")

    @property
    def pixel_pitch_mm(self) -> float:
        return self.width_mm / self.width_px

    @classmethod
    def from_json(cls, path: str) -> "ScreenConfig":
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(
            width_px=int(d["width_px"]),
            height_px=int(d["height_px"]),
            width_mm=float(d["width_mm"]),
            height_mm=float(d["height_mm"]),
        )

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "width_px": self.width_px,
                    "height_px": self.height_px,
                    "width_mm": self.width_mm,
                    "height_mm": self.height_mm,
                },
                fh,
            )
            fh.write("\n")


# Default setup: 22-inch 1680x1050 display viewed from ~60 cm. The derived
# pixel pitch is ~0.283 mm/px.
DEFAULT_SCREEN = ScreenConfig(width_px=1680, height_px=1050, width_mm=473.8, height_mm=296.1)
DEFAULT_EYE_SCREEN_MM = 600.0
DEFAULT_PUPIL_DISTANCE_MM = 63.0


@dataclass(frozen=True)
class GazeSample:
    """One timestamped binocular observation.

    Coordinates are screen pixels. Eye positions, when the tracker reports
    them, are millimetres in a screen-anchored frame with z the perpendicular
    distance from the screen plane (z > 0).
    """

    t_ms: float
    left_px: Optional[tuple[float, float]]
    right_px: Optional[tuple[float, float]]
    left_valid: bool
    right_valid: bool
    left_eye_mm: Optional[tuple[float, float, float]] = None
    right_eye_mm: Optional[tuple[float, float, float]] = None

    def __post_init__(self):
        if self.left_valid:
            if self.left_px is None or not all(math.isfinite(v) for v in self.left_px):
                raise ValueError(f"valid left sample at t={self.t_ms} lacks finite coordinates")
        if self.right_valid:
            if self.right_px is None or not all(math.isfinite(v) for v in self.right_px):
                raise ValueError(f"valid right sample at t={self.t_ms} lacks finite coordinates")
        for eye in (self.left_eye_mm, self.right_eye_mm):
            if eye is not None and eye[2] <= 0:
                raise ValueError("eye position z must be positive")

    @property
    def both_valid(self) -> bool:
        return self.left_valid and self.right_valid


@dataclass
class Recording:
    """An ordered gaze stream for one participant and task."""

    participant_id: str
    task_tag: str
    screen: ScreenConfig
    samples: list[GazeSample]
    nominal_rate_hz: float = 60.0

    def __post_init__(self):
        for a, b in zip(self.samples, self.samples[1:]):
            if b.t_ms < a.t_ms:
                raise ValueError("samples not sorted by t_ms")

    @property
    def span_ms(self) -> float:
        if not self.samples:
            return 0.0
        return self.samples[-1].t_ms - self.samples[0].t_ms

    def frame_period_ms(self) -> float:
        if len(self.samples) >= 2:
            return self.samples[1].t_ms - self.samples[0].t_ms
        return 1000.0 / self.nominal_rate_hz


def sample_arrays(samples: Sequence[GazeSample]) -> dict[str, np.ndarray]:
    """Columnar views of a sample list for vectorised processing.

    Invalid / absent coordinates come back as NaN so masks must be applied
    before arithmetic.
    """
    n = len(samples)
    t = np.empty(n)
    lx = np.full(n, np.nan)
    ly = np.full(n, np.nan)
    rx = np.full(n, np.nan)
    ry = np.full(n, np.nan)
    lv = np.zeros(n, dtype=bool)
    rv = np.zeros(n, dtype=bool)
    le = np.full((n, 3), np.nan)
    re = np.full((n, 3), np.nan)
    for i, s in enumerate(samples):
        t[i] = s.t_ms
        lv[i] = s.left_valid
        rv[i] = s.right_valid
        if s.left_px is not None:
            lx[i], ly[i] = s.left_px
        if s.right_px is not None:
            rx[i], ry[i] = s.right_px
        if s.left_eye_mm is not None:
            le[i] = s.left_eye_mm
        if s.right_eye_mm is not None:
            re[i] = s.right_eye_mm
    return {"t": t, "lx": lx, "ly": ly, "rx": rx, "ry": ry, "lv": lv, "rv": rv, "le": le, "re": re}


# ---------------------------------------------------------------------------
# File ingestion


def _sample_from_dict(d: dict) -> GazeSample:
    lv = bool(d["lv"])
    rv = bool(d["rv"])

    def point(xk, yk, required):
        x, y = d.get(xk), d.get(yk)
        if x is None or y is None:
            if required:
                raise ValueError(f"missing {xk}/{yk}")
            return None
        return (float(x), float(y))

    def eye(k):
        v = d.get(k)
        if v is None:
            return None
        x, y, z = (float(c) for c in v)
        return (x, y, z)

    return GazeSample(
        t_ms=float(d["t_ms"]),
        left_px=point("lx", "ly", lv),
        right_px=point("rx", "ry", rv),
        left_valid=lv,
        right_valid=rv,
        left_eye_mm=eye("le"),
        right_eye_mm=eye("re"),
    )


def _iter_jsonl(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield lineno, line


_CSV_BOOL = {"true": True, "false": False, "1": True, "0": False}


def _csv_row_to_dict(row: dict) -> dict:
    d: dict = {}
    for k in ("t_ms", "lx", "ly", "rx", "ry"):
        v = row.get(k)
        if v is not None and v != "":
            d[k] = float(v)
    for k in ("lv", "rv"):
        d[k] = _CSV_BOOL[row[k].strip().lower()]
    for k in ("le", "re"):
        v = row.get(k)
        if v:
            d[k] = json.loads(v)
    return d


def parse_recording(
    path: str,
    fmt: str,
    screen: ScreenConfig,
    participant_id: str = "",
    task_tag: str = "",
    nominal_rate_hz: float = 60.0,
) -> Recording:
    """Read a gaze file (one sample per JSONL line, or the CSV variant).

    Malformed lines are skipped with a warning; more than 10% malformed is a
    hard error that reports the offending line numbers.
    """
    samples: list[GazeSample] = []
    bad: list[int] = []
    try:
        if fmt == "jsonl":
            for lineno, line in _iter_jsonl(path):
                try:
                    samples.append(_sample_from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                    bad.append(lineno)
        elif fmt == "csv":
            with open(path, "r", encoding="utf-8", newline="") as fh:
                reader = csv.DictReader(fh)
                for lineno, row in enumerate(reader, start=2):
                    try:
                        samples.append(_sample_from_dict(_csv_row_to_dict(row)))
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                        bad.append(lineno)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as e:
        raise DataFormatError(f"cannot read {path}: {e}") from e

    n_lines = len(samples) + len(bad)
    if n_lines == 0:
        raise DataFormatError(f"{path}: no samples")
    if len(bad) > 0.10 * n_lines:
        shown = ", ".join(str(b) for b in bad[:20])
        raise DataFormatError(f"{path}: {len(bad)}/{n_lines} malformed lines (lines {shown})")
    if bad:
        log.warning("%s: skipped %d malformed lines: %s", path, len(bad), bad[:20])
    if not samples:
        raise DataFormatError(f"{path}: no samples")
    return Recording(
        participant_id=participant_id,
        task_tag=task_tag,
        screen=screen,
        samples=samples,
        nominal_rate_hz=nominal_rate_hz,
    )


def sample_to_dict(s: GazeSample) -> dict:
    d: dict = {"t_ms": s.t_ms, "lv": s.left_valid, "rv": s.right_valid}
    if s.left_px is not None:
        d["lx"], d["ly"] = s.left_px
    if s.right_px is not None:
        d["rx"], d["ry"] = s.right_px
    if s.left_eye_mm is not None:
        d["le"] = list(s.left_eye_mm)
    if s.right_eye_mm is not None:
        d["re"] = list(s.right_eye_mm)
    return d


def write_recording(rec: Recording, path: str, fmt: str = "jsonl") -> None:
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for s in rec.samples:
                fh.write(json.dumps(sample_to_dict(s)) + "\n")
    elif fmt == "csv":
        cols = ["t_ms", "lx", "ly", "rx", "ry", "lv", "rv", "le", "re"]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for s in rec.samples:
                d = sample_to_dict(s)
                writer.writerow(
                    [
                        d.get("t_ms"),
                        d.get("lx", ""),
                        d.get("ly", ""),
                        d.get("rx", ""),
                        d.get("ry", ""),
                        "true" if s.left_valid else "false",
                        "true" if s.right_valid else "false",
                        json.dumps(d["le"]) if "le" in d else "",
                        json.dumps(d["re"]) if "re" in d else "",
                    ]
                )
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Resampling


def _interp_channel(grid: np.ndarray, tv: np.ndarray, vals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate one eye's channel values onto the grid.

    ``tv`` holds the timestamps of that eye's valid source samples. A grid
    point is valid when it coincides with a valid sample or lies between two
    valid samples no more than MAX_BRIDGE_GAP_MS apart.
    """
    out = np.full(grid.shape, np.nan)
    ok = np.zeros(grid.shape, dtype=bool)
    if tv.size == 0:
        return out, ok
    idx = np.searchsorted(tv, grid, side="right") - 1
    inside = idx >= 0
    idx_c = np.clip(idx, 0, tv.size - 1)

    exact = inside & (np.abs(tv[idx_c] - grid) <= TIME_EPS_MS)
    out[exact] = vals[idx_c[exact]]
    ok |= exact

    has_next = inside & (idx_c + 1 < tv.size)
    nxt = np.clip(idx_c + 1, 0, tv.size - 1)
    bridgeable = has_next & ~exact & (tv[nxt] - tv[idx_c] <= MAX_BRIDGE_GAP_MS)
    if np.any(bridgeable):
        t0 = tv[idx_c[bridgeable]]
        t1 = tv[nxt[bridgeable]]
        w = (grid[bridgeable] - t0) / (t1 - t0)
        out[bridgeable] = (1 - w) * vals[idx_c[bridgeable]] + w * vals[nxt[bridgeable]]
        ok |= bridgeable
    return out, ok


def resample(rec: Recording, rate_hz: float) -> Recording:
    """Project the recording onto a fixed-rate time grid.

    The grid runs from the first to the last source timestamp; nothing is
    extrapolated. Per eye, coordinates are linearly interpolated between the
    nearest valid source samples, but only across gaps of at most
    MAX_BRIDGE_GAP_MS; grid points inside longer dropouts stay invalid.
    """
    if len(rec.samples) < 2:
        raise ValueError("resample needs at least 2 samples")
    if rate_hz <= 0:
        raise ValueError("rate_hz must be positive")
    arr = sample_arrays(rec.samples)
    t0 = arr["t"][0]
    t_last = arr["t"][-1]
    step = 1000.0 / rate_hz
    n = int(math.floor((t_last - t0) / step + 1e-9))
    grid = t0 + np.arange(n + 1) * step
    # the final grid point may overshoot t_last by float noise; clamp it
    if grid[-1] > t_last:
        grid[-1] = t_last

    new_cols = {}
    for eye, xk, yk, vk in (("l", "lx", "ly", "lv"), ("r", "rx", "ry", "rv")):
        mask = arr[vk]
        tv = arr["t"][mask]
        x, okx = _interp_channel(grid, tv, arr[xk][mask])
        y, _ = _interp_channel(grid, tv, arr[yk][mask])
        new_cols[eye] = (x, y, okx)

    # eye positions: interpolate wherever present (validity flags do not
    # apply to head geometry)
    eyes = {}
    for key in ("le", "re"):
        present = np.all(np.isfinite(arr[key]), axis=1)
        tv = arr["t"][present]
        chans = []
        ok_all = None
        for c in range(3):
            v, ok = _interp_channel(grid, tv, arr[key][present, c])
            chans.append(v)
            ok_all = ok if ok_all is None else (ok_all & ok)
        eyes[key] = (chans, ok_all if ok_all is not None else np.zeros(grid.shape, bool))

    out: list[GazeSample] = []
    lx, ly, lok = new_cols["l"]
    rx, ry, rok = new_cols["r"]
    for i in range(grid.size):
        le = tuple(eyes["le"][0][c][i] for c in range(3)) if eyes["le"][1][i] else None
        re = tuple(eyes["re"][0][c][i] for c in range(3)) if eyes["re"][1][i] else None
        out.append(
            GazeSample(
                t_ms=float(grid[i]),
                left_px=(float(lx[i]), float(ly[i])) if lok[i] else None,
                right_px=(float(rx[i]), float(ry[i])) if rok[i] else None,
                left_valid=bool(lok[i]),
                right_valid=bool(rok[i]),
                left_eye_mm=le,
                right_eye_mm=re,
            )
        )
    return replace(rec, samples=out, nominal_rate_hz=rate_hz)


# ---------------------------------------------------------------------------
# 1-euro filtering


def _smoothing_alpha(cutoff_hz: float, dt_s: float) -> float:
    r = 2.0 * math.pi * cutoff_hz * dt_s
    return r / (r + 1.0)


def _one_euro_run(t_ms: np.ndarray, x: np.ndarray, min_cutoff: float, beta: float, d_cutoff: float) -> np.ndarray:
    """Filter one contiguous run of valid values; state starts fresh.

    The update x + a*(target - x) keeps constant signals exact fixed points.
    """
    out = np.empty_like(x)
    out[0] = x[0]
    dx_hat = 0.0
    x_hat = x[0]
    for i in range(1, x.size):
        dt = (t_ms[i] - t_ms[i - 1]) / 1000.0
        if dt <= 0:
            out[i] = x_hat
            continue
        a_d = _smoothing_alpha(d_cutoff, dt)
        dx = (x[i] - x_hat) / dt
        dx_hat = dx_hat + a_d * (dx - dx_hat)
        cutoff = min_cutoff + beta * abs(dx_hat)
        a = _smoothing_alpha(cutoff, dt)
        x_hat = x_hat + a * (x[i] - x_hat)
        out[i] = x_hat
    return out


def prepare_recording(rec: Recording, rate_hz: float = 60.0, smooth: bool = True) -> Recording:
    """Canonical preprocessing: fixed-rate resampling, then 1-euro smoothing."""
    out = resample(rec, rate_hz)
    if smooth:
        out = one_euro_filter(out)
    return out


def one_euro_filter(
    rec: Recording,
    min_cutoff_hz: float = 1.0,
    beta_coef: float = 0.007,
    d_cutoff_hz: float = 1.0,
) -> Recording:
    """Smooth each eye's x and y channels with the 1-euro recurrence.

    Invalid spans pass through untouched and the filter restarts after each
    gap, so dropouts never leak stale state into the next run.
    """
    if not rec.samples:
        return rec
    arr = sample_arrays(rec.samples)
    t = arr["t"]
    filtered: dict[str, np.ndarray] = {}
    for xk, vk in (("lx", "lv"), ("ly", "lv"), ("rx", "rv"), ("ry", "rv")):
        col = arr[xk].copy()
        mask = arr[vk]
        i = 0
        n = mask.size
        while i < n:
            if not mask[i]:
                i += 1
                continue
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            col[i : j + 1] = _one_euro_run(
                t[i : j + 1], col[i : j + 1], min_cutoff_hz, beta_coef, d_cutoff_hz
            )
            i = j + 1
        filtered[xk] = col

    out = []
    for i, s in enumerate(rec.samples):
        left = (float(filtered["lx"][i]), float(filtered["ly"][i])) if s.left_valid else s.left_px
        right = (float(filtered["rx"][i]), float(filtered["ry"][i])) if s.right_valid else s.right_px
        out.append(replace(s, left_px=left, right_px=right))
    return replace(rec, samples=out)
