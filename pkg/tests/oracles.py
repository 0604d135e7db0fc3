"""Independent brute-force oracles used to pin expected values.

These deliberately recompute everything from first principles (plain Python
sums, from-scratch window scans, exhaustive candidate enumeration) so they
share no code path with the implementations they check.
"""
from __future__ import annotations

import math


def desc_stats_oracle(xs) -> dict:
    """Two-pass moments and sort-based median."""
    xs = [float(v) for v in xs]
    n = len(xs)
    if n == 0:
        return dict.fromkeys(
            ("mean", "sd", "median", "min", "max", "range", "kurtosis", "skewness"), 0.0
        )
    mean = sum(xs) / n
    s = sorted(xs)
    median = s[n // 2] if n % 2 == 1 else 0.5 * (s[n // 2 - 1] + s[n // 2])
    mn, mx = s[0], s[-1]
    sd = math.sqrt(sum((v - mean) ** 2 for v in xs) / (n - 1)) if n >= 2 else 0.0
    m2 = sum((v - mean) ** 2 for v in xs) / n
    m3 = sum((v - mean) ** 3 for v in xs) / n
    m4 = sum((v - mean) ** 4 for v in xs) / n
    skew = m3 / m2**1.5 if m2 > 0 and n >= 3 else 0.0
    kurt = m4 / m2**2 - 3.0 if m2 > 0 and n >= 4 else 0.0
    return {
        "mean": mean,
        "sd": sd,
        "median": median,
        "min": mn,
        "max": mx,
        "range": mx - mn,
        "kurtosis": kurt,
        "skewness": skew,
    }


def desc_stats_oracle_fast(xs) -> dict:
    """Same two-pass/sort formulation as desc_stats_oracle, vectorised so
    the large acceptance sweep stays within its runtime budget."""
    import numpy as np

    xs = np.asarray(xs, dtype=float)
    n = xs.size
    if n == 0:
        return dict.fromkeys(
            ("mean", "sd", "median", "min", "max", "range", "kurtosis", "skewness"), 0.0
        )
    mean = float(np.sum(xs)) / n
    s = np.sort(xs)
    median = float(s[n // 2]) if n % 2 == 1 else 0.5 * float(s[n // 2 - 1] + s[n // 2])
    mn, mx = float(s[0]), float(s[-1])
    c = xs - mean
    sd = math.sqrt(float(np.sum(c**2)) / (n - 1)) if n >= 2 else 0.0
    m2 = float(np.sum(c**2)) / n
    m3 = float(np.sum(c**3)) / n
    m4 = float(np.sum(c**4)) / n
    skew = m3 / m2**1.5 if m2 > 0 and n >= 3 else 0.0
    kurt = m4 / m2**2 - 3.0 if m2 > 0 and n >= 4 else 0.0
    return {
        "mean": mean,
        "sd": sd,
        "median": median,
        "min": mn,
        "max": mx,
        "range": mx - mn,
        "kurtosis": kurt,
        "skewness": skew,
    }


def idt_oracle(t, x, y, valid, dt, duration_ms, dispersion_px) -> list[tuple[int, int]]:
    """Greedy maximal-window scan recomputing dispersion from scratch.

    Returns half-open (start, end) index ranges of fixations.
    """

    def dispersion(i, j):
        xs = x[i : j + 1]
        ys = y[i : j + 1]
        return (max(xs) - min(xs)) + (max(ys) - min(ys))

    n = len(t)
    min_len = max(1, math.ceil(duration_ms / dt - 1e-9))
    out = []
    i = 0
    while i + min_len <= n:
        if not all(valid[i : i + min_len]):
            i += 1
            continue
        j = i + min_len - 1
        if dispersion(i, j) > dispersion_px:
            i += 1
            continue
        while j + 1 < n and valid[j + 1] and dispersion(i, j + 1) <= dispersion_px:
            j += 1
        out.append((i, j + 1))
        i = j + 1
    return out


def _circle_from_pair(p, q):
    cx = 0.5 * (p[0] + q[0])
    cy = 0.5 * (p[1] + q[1])
    r = max(math.dist((cx, cy), p), math.dist((cx, cy), q))
    return cx, cy, r


def _circle_from_triple(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        return None
    ux = (
        (a[0] ** 2 + a[1] ** 2) * (b[1] - c[1])
        + (b[0] ** 2 + b[1] ** 2) * (c[1] - a[1])
        + (c[0] ** 2 + c[1] ** 2) * (a[1] - b[1])
    ) / d
    uy = (
        (a[0] ** 2 + a[1] ** 2) * (c[0] - b[0])
        + (b[0] ** 2 + b[1] ** 2) * (a[0] - c[0])
        + (c[0] ** 2 + c[1] ** 2) * (b[0] - a[0])
    ) / d
    r = max(math.dist((ux, uy), p) for p in (a, b, c))
    return ux, uy, r


def mec_oracle(points) -> tuple[float, float, float]:
    """Smallest of all pair/triple candidate circles that encloses everything."""
    pts = [(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("no points")
    candidates = [(pts[0][0], pts[0][1], 0.0)] if len(pts) == 1 else []
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            candidates.append(_circle_from_pair(pts[i], pts[j]))
            for k in range(j + 1, n):
                c = _circle_from_triple(pts[i], pts[j], pts[k])
                if c is not None:
                    candidates.append(c)
    best = None
    for cx, cy, r in candidates:
        if all(math.dist((cx, cy), p) <= r * (1 + 1e-10) + 1e-7 for p in pts):
            if best is None or r < best[2]:
                best = (cx, cy, r)
    assert best is not None
    return best


def threshold_auc(values, positives) -> float:
    """AUC of a single scalar feature by exhaustive threshold sweep
    (equivalent to the rank-sum formulation)."""
    pos = sorted(v for v, p in zip(values, positives) if p)
    neg = sorted(v for v, p in zip(values, positives) if not p)
    if not pos or not neg:
        raise ValueError("need both classes")
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))
