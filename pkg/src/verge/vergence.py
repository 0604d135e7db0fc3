"""Vergence geometry: gaze disparity, enclosing circles, focus displacement.

Disparity is the Euclidean distance between simultaneous left and right
gaze points on the screen. Converted to millimetres via the pixel pitch and
combined with the eye-to-screen distance D and pupillary distance PD, it
yields the displacement of the visual focus from the screen plane:

    d = E * D / (PD - E)   when the gaze rays diverge (focus behind screen)
    d = -E * D / (PD + E)  when they converge (focus in front)

with E the disparity in mm. Divergence vs convergence is decided purely by
the horizontal ordering of the two gaze x coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .gaze import (
    DEFAULT_EYE_SCREEN_MM,
    DEFAULT_PUPIL_DISTANCE_MM,
    GazeSample,
)
from .oculomotor import Fixation, vector_angle_deg

# Divergence with E >= PD means parallel or outward visual axes: the focus
# is at or beyond infinity. Saturate instead of overflowing.
DIVERGENCE_SATURATION_FACTOR = 10.0


@dataclass(frozen=True)
class VergenceSampleStats:
    """Per-window statistics over valid gaze point pairs."""

    disparity_mean_px: float
    disparity_sd_px: float
    angle_mean_deg: float
    angle_sd_deg: float
    focus_dist_mean_mm: float
    focus_dist_sd_mm: float
    n_pairs: int


@dataclass(frozen=True)
class EnclosingCircle:
    center_px: tuple[float, float]
    radius_px: float


@dataclass(frozen=True)
class FixationVergence:
    """Vergence geometry of one matched left/right fixation pair."""

    centroid_dist_px: float
    centroid_angle_deg: float
    circle_center_dist_px: float
    center_angle_deg: float
    normalized_center_dist: float
    left_radius_px: float
    right_radius_px: float


def _mean_sd(xs: np.ndarray) -> tuple[float, float]:
    """Mean and sample SD (n-1 denominator); zeros on empty, SD 0 for n=1."""
    n = xs.size
    if n == 0:
        return 0.0, 0.0
    m = float(np.mean(xs))
    if n < 2:
        return m, 0.0
    return m, float(math.sqrt(float(np.sum((xs - m) ** 2)) / (n - 1)))


def focus_displacement(
    left_px: tuple[float, float],
    right_px: tuple[float, float],
    d_mm: float,
    pd_mm: float,
    pitch_mm: float,
) -> float:
    """Displacement of the visual focus from the screen plane, in mm.

    Positive values lie behind the screen (divergence), negative in front
    (convergence). Zero disparity means focus on the screen.
    """
    if d_mm <= 0 or pd_mm <= 0 or pitch_mm <= 0:
        raise ValueError("d_mm, pd_mm and pitch_mm must be positive")
    e = pitch_mm * math.hypot(left_px[0] - right_px[0], left_px[1] - right_px[1])
    if e == 0.0:
        return 0.0
    if left_px[0] < right_px[0]:  # diverging
        if e >= pd_mm:
            return DIVERGENCE_SATURATION_FACTOR * d_mm
        return e * d_mm / (pd_mm - e)
    return -e * d_mm / (pd_mm + e)


def sample_eye_geometry(s: GazeSample) -> Optional[tuple[float, float]]:
    """(eye-to-screen distance, pupillary distance) for one sample, if the
    tracker reported 3-D eye positions."""
    if s.left_eye_mm is None or s.right_eye_mm is None:
        return None
    le = s.left_eye_mm
    re = s.right_eye_mm
    d = 0.5 * (le[2] + re[2])
    pd = math.sqrt((le[0] - re[0]) ** 2 + (le[1] - re[1]) ** 2 + (le[2] - re[2]) ** 2)
    return d, pd


def eye_geometry(
    samples: Sequence[GazeSample],
    default_d_mm: float = DEFAULT_EYE_SCREEN_MM,
    default_pd_mm: float = DEFAULT_PUPIL_DISTANCE_MM,
) -> tuple[float, float, float, float]:
    """(D_mean, D_sd, PD_mean, PD_sd) over a window.

    Falls back to configured constants with zero SD when the stream carries
    no 3-D eye positions.
    """
    ds = []
    pds = []
    for s in samples:
        g = sample_eye_geometry(s)
        if g is not None:
            ds.append(g[0])
            pds.append(g[1])
    if not ds:
        return default_d_mm, 0.0, default_pd_mm, 0.0
    d_mean, d_sd = _mean_sd(np.asarray(ds))
    pd_mean, pd_sd = _mean_sd(np.asarray(pds))
    return d_mean, d_sd, pd_mean, pd_sd


def pair_stats(
    samples: Sequence[GazeSample],
    pitch_mm: float,
    default_d_mm: float = DEFAULT_EYE_SCREEN_MM,
    default_pd_mm: float = DEFAULT_PUPIL_DISTANCE_MM,
) -> VergenceSampleStats:
    """Disparity, direction, and focus-distance statistics over all samples
    in the window where both eyes are valid."""
    disparities = []
    angles = []
    focus = []
    for s in samples:
        if not s.both_valid:
            continue
        lx, ly = s.left_px
        rx, ry = s.right_px
        disparities.append(math.hypot(rx - lx, ry - ly))
        angles.append(vector_angle_deg(rx - lx, ry - ly))
        g = sample_eye_geometry(s)
        d_mm, pd_mm = g if g is not None else (default_d_mm, default_pd_mm)
        focus.append(focus_displacement(s.left_px, s.right_px, d_mm, pd_mm, pitch_mm))
    n = len(disparities)
    if n == 0:
        return VergenceSampleStats(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)
    dm, dsd = _mean_sd(np.asarray(disparities))
    am, asd = _mean_sd(np.asarray(angles))
    fm, fsd = _mean_sd(np.asarray(focus))
    return VergenceSampleStats(dm, dsd, am, asd, fm, fsd, n)


# ---------------------------------------------------------------------------
# Smallest enclosing circle (Welzl-style incremental construction)


def _circle_two(p: tuple[float, float], q: tuple[float, float]):
    cx = 0.5 * (p[0] + q[0])
    cy = 0.5 * (p[1] + q[1])
    r = max(math.hypot(cx - p[0], cy - p[1]), math.hypot(cx - q[0], cy - q[1]))
    return cx, cy, r


def _circumcircle(a, b, c):
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0
    if d == 0.0:
        return None
    ux = ox + ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = oy + ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    r = max(math.hypot(ux - p[0], uy - p[1]) for p in (a, b, c))
    return ux, uy, r


def _in_circle(c, p) -> bool:
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1 + 1e-12) + 1e-12


def min_enclosing_circle(points: Sequence[tuple[float, float]]) -> EnclosingCircle:
    """The unique smallest circle containing all points.

    Deterministic incremental construction (no shuffling) so repeated runs
    give bit-identical results on identical input.
    """
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("min_enclosing_circle needs at least one point")
    c = (pts[0][0], pts[0][1], 0.0)
    for i, p in enumerate(pts[1:], start=1):
        if _in_circle(c, p):
            continue
        # p must lie on the boundary of the new circle
        c = (p[0], p[1], 0.0)
        for j in range(i):
            q = pts[j]
            if _in_circle(c, q):
                continue
            # p and q both on the boundary
            c = _circle_two(p, q)
            for k in range(j):
                r = pts[k]
                if _in_circle(c, r):
                    continue
                cc = _circumcircle(p, q, r)
                if cc is not None:
                    c = cc
    return EnclosingCircle(center_px=(c[0], c[1]), radius_px=c[2])


def fixation_points(fix: Fixation, samples: Sequence[GazeSample]) -> list[tuple[float, float]]:
    """Per-eye gaze points belonging to a fixation's sample range."""
    lo, hi = fix.sample_range
    pts = []
    for s in samples[lo:hi]:
        if fix.eye == "left" and s.left_valid:
            pts.append(s.left_px)
        elif fix.eye == "right" and s.right_valid:
            pts.append(s.right_px)
        elif fix.eye == "cyclopean" and s.both_valid:
            pts.append((0.5 * (s.left_px[0] + s.right_px[0]), 0.5 * (s.left_px[1] + s.right_px[1])))
    return pts


def fixation_circle(fix: Fixation, samples: Sequence[GazeSample]) -> EnclosingCircle:
    pts = fixation_points(fix, samples)
    if not pts:
        return EnclosingCircle(center_px=fix.centroid_px, radius_px=0.0)
    return min_enclosing_circle(pts)


def fixation_vergence(
    pair: tuple[Fixation, Fixation], samples: Sequence[GazeSample]
) -> FixationVergence:
    """Vergence geometry between a matched left/right fixation pair."""
    lf, rf = pair
    dx = rf.centroid_px[0] - lf.centroid_px[0]
    dy = rf.centroid_px[1] - lf.centroid_px[1]
    centroid_dist = math.hypot(dx, dy)
    centroid_angle = vector_angle_deg(dx, dy)
    lc = fixation_circle(lf, samples)
    rc = fixation_circle(rf, samples)
    cdx = rc.center_px[0] - lc.center_px[0]
    cdy = rc.center_px[1] - lc.center_px[1]
    center_dist = math.hypot(cdx, cdy)
    center_angle = vector_angle_deg(cdx, cdy)
    radius_sum = lc.radius_px + rc.radius_px
    normalized = center_dist / radius_sum if radius_sum > 0 else 0.0
    return FixationVergence(
        centroid_dist_px=centroid_dist,
        centroid_angle_deg=centroid_angle,
        circle_center_dist_px=center_dist,
        center_angle_deg=center_angle,
        normalized_center_dist=normalized,
        left_radius_px=lc.radius_px,
        right_radius_px=rc.radius_px,
    )
