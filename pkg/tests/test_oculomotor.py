import math

import numpy as np
import pytest

from conftest import FRAME_MS, binocular_trace, make_recording, make_sample
from oracles import idt_oracle
from verge.oculomotor import (
    Blink,
    Fixation,
    detect_blinks,
    detect_events,
    detect_fixations_idt,
    detect_loss,
    detect_saccades,
    events_to_jsonl,
    normalize_angle_deg,
    pair_fixations,
)


def random_trace(rng, n=600, invalid_prob=0.15):
    """Clustered dwell/jump trace with occasional invalid spans."""
    samples = []
    x, y = rng.uniform(100, 900, size=2)
    i = 0
    while i < n:
        mode = rng.uniform()
        if mode < 0.55:
            hold = int(rng.integers(3, 40))
            for _ in range(min(hold, n - i)):
                samples.append((x + rng.normal(0, 8), y + rng.normal(0, 8), True))
                i += 1
        elif mode < 0.85:
            steps = int(rng.integers(1, 6))
            nx, ny = rng.uniform(100, 900, size=2)
            for k in range(min(steps, n - i)):
                w = (k + 1) / steps
                samples.append((x + w * (nx - x), y + w * (ny - y), True))
                i += 1
            x, y = nx, ny
        else:
            gap = int(rng.integers(1, 10))
            for _ in range(min(gap, n - i)):
                samples.append((np.nan, np.nan, False))
                i += 1
    recs = []
    for k, (sx, sy, v) in enumerate(samples):
        recs.append(
            make_sample(k * FRAME_MS, sx if v else None, sy if v else None,
                        sx if v else None, sy if v else None, lv=v, rv=v)
        )
    return recs


class TestIdt:
    def test_single_point_single_fixation(self):
        rec = binocular_trace([(500.0, 300.0)] * 100)
        fixes = detect_fixations_idt(rec.samples, "cyclopean")
        assert len(fixes) == 1
        f = fixes[0]
        assert f.sample_range == (0, 100)
        assert f.centroid_px == (500.0, 300.0)
        assert abs(f.duration_ms - 100 * FRAME_MS) < 1e-9

    def test_two_clusters_with_ramp(self):
        pts = [(100.0, 100.0)] * 30
        for k in range(3):
            w = (k + 1) / 4
            pts.append((100 + w * 500, 100.0))
        pts += [(600.0, 100.0)] * 30
        rec = binocular_trace(pts)
        fixes = detect_fixations_idt(rec.samples, "cyclopean")
        assert len(fixes) == 2
        assert abs(fixes[0].centroid_px[0] - 100.0) < 1e-6
        assert abs(fixes[1].centroid_px[0] - 600.0) < 1e-6
        # boundaries within one sample of the ramp
        assert 29 <= fixes[0].sample_range[1] <= 31
        assert 32 <= fixes[1].sample_range[0] <= 34
        # matches the brute-force oracle exactly
        t = np.array([s.t_ms for s in rec.samples])
        x = np.array([(s.left_px[0] + s.right_px[0]) / 2 for s in rec.samples])
        y = np.array([(s.left_px[1] + s.right_px[1]) / 2 for s in rec.samples])
        v = [True] * len(pts)
        expect = idt_oracle(t, x, y, v, FRAME_MS, 80.0, 80.0)
        assert [f.sample_range for f in fixes] == expect

    def test_below_duration_threshold(self):
        # 4 samples at 60 Hz span 66.7 ms < 80 ms
        pts = [(100.0, 100.0)] * 4 + [(900.0, 900.0)] * 4
        rec = binocular_trace(pts)
        assert detect_fixations_idt(rec.samples, "cyclopean") == []

    def test_five_samples_meet_threshold(self):
        rec = binocular_trace([(100.0, 100.0)] * 5)
        fixes = detect_fixations_idt(rec.samples, "cyclopean")
        assert len(fixes) == 1
        assert fixes[0].duration_ms >= 80.0

    def test_invalid_samples_break_windows(self):
        samples = [make_sample(i * FRAME_MS, 10, 10, 10, 10) for i in range(10)]
        samples.append(make_sample(10 * FRAME_MS, None, None, None, None, lv=False, rv=False))
        samples += [make_sample((11 + i) * FRAME_MS, 10, 10, 10, 10) for i in range(10)]
        fixes = detect_fixations_idt(samples, "cyclopean")
        assert len(fixes) == 2
        assert fixes[0].sample_range == (0, 10)
        assert fixes[1].sample_range == (11, 21)

    def test_matches_oracle_on_random_traces(self, rng):
        for trial in range(40):
            samples = random_trace(np.random.default_rng(9000 + trial))
            fixes = detect_fixations_idt(samples, "left")
            t = np.array([s.t_ms for s in samples])
            x = np.array([s.left_px[0] if s.left_valid else np.nan for s in samples])
            y = np.array([s.left_px[1] if s.left_valid else np.nan for s in samples])
            v = [s.left_valid for s in samples]
            expect = idt_oracle(t, x, y, v, FRAME_MS, 80.0, 80.0)
            assert [f.sample_range for f in fixes] == expect
            for f in fixes:
                assert f.duration_ms >= 80.0 - 1e-9
                lo, hi = f.sample_range
                disp = (x[lo:hi].max() - x[lo:hi].min()) + (y[lo:hi].max() - y[lo:hi].min())
                assert disp <= 80.0 + 1e-9
            for a, b in zip(fixes, fixes[1:]):
                assert a.end_ms <= b.start_ms + 1e-9


class TestSaccades:
    def _fixation_pair_setup(self, p0, p1):
        """Two hand-built fixations separated by one valid transition sample."""
        mid = ((p0[0] + p1[0]) / 2, (p0[1] + p1[1]) / 2)
        pts = [p0] * 30 + [mid] + [p1] * 30
        rec = binocular_trace(pts)
        dt = FRAME_MS
        fixes = [
            Fixation("left", 0.0, 30 * dt, p0, (0, 30)),
            Fixation("left", 31 * dt, 61 * dt, p1, (31, 61)),
        ]
        return fixes, rec.samples

    def test_horizontal_displacement(self):
        fixes, samples = self._fixation_pair_setup((0.0, 0.0), (100.0, 0.0))
        sacc = detect_saccades(fixes, samples, "left")
        assert len(sacc) == 1
        assert abs(sacc[0].length_px - 100.0) < 1e-6
        assert abs(sacc[0].angle_deg - 0.0) < 1e-6
        assert abs(sacc[0].velocity_px_s - sacc[0].length_px / (sacc[0].duration_ms / 1000)) < 1e-9

    def test_downward_screen_motion_is_negative_angle(self):
        fixes, samples = self._fixation_pair_setup((0.0, 0.0), (0.0, 100.0))
        sacc = detect_saccades(fixes, samples, "left")
        assert len(sacc) == 1
        assert abs(sacc[0].angle_deg - (-90.0)) < 1e-6

    def test_detected_fixations_yield_saccade_over_large_jump(self):
        # a 600 px jump with a 3-sample ramp exceeds dispersion, leaving
        # true transition samples between the detected fixations
        pts = [(0.0, 0.0)] * 30
        for k in range(3):
            pts.append(((k + 1) / 4 * 600.0, 0.0))
        pts += [(600.0, 0.0)] * 30
        rec = binocular_trace(pts)
        fixes = detect_fixations_idt(rec.samples, "left")
        assert len(fixes) == 2
        sacc = detect_saccades(fixes, rec.samples, "left")
        assert len(sacc) == 1
        assert abs(sacc[0].length_px - 600.0) < 1e-6

    def test_single_fixation_no_gaps(self):
        rec = binocular_trace([(50.0, 50.0)] * 60)
        fixes = detect_fixations_idt(rec.samples, "left")
        assert len(fixes) == 1
        assert detect_saccades(fixes, rec.samples, "left") == []

    def test_edge_gap_uses_gap_sample_as_endpoint(self):
        pts = [(500.0, 0.0), (400.0, 0.0), (300.0, 0.0)] + [(0.0, 0.0)] * 30
        rec = binocular_trace(pts)
        fixes = detect_fixations_idt(rec.samples, "left")
        assert len(fixes) == 1
        sacc = detect_saccades(fixes, rec.samples, "left")
        assert len(sacc) == 1
        # leading gap: from the first valid gaze sample to the fixation centroid
        assert abs(sacc[0].length_px - 500.0) < 1e-6
        assert sacc[0].start_ms == 0.0

    def test_blink_overlap_suppresses_saccade(self):
        pts_a = [(0.0, 0.0)] * 30
        pts_b = [(600.0, 0.0)] * 30
        gap = 10  # 166 ms both-invalid: a blink
        samples = [make_sample(i * FRAME_MS, x, y, x, y) for i, (x, y) in enumerate(pts_a)]
        samples += [
            make_sample((30 + i) * FRAME_MS, None, None, None, None, lv=False, rv=False)
            for i in range(gap)
        ]
        samples += [make_sample((40 + i) * FRAME_MS, x, y, x, y) for i, (x, y) in enumerate(pts_b)]
        fixes = detect_fixations_idt(samples, "left")
        assert len(fixes) == 2
        assert detect_saccades(fixes, samples, "left") == []

    def test_saccades_disjoint_from_fixations(self, rng):
        for trial in range(10):
            samples = random_trace(np.random.default_rng(500 + trial))
            fixes = detect_fixations_idt(samples, "left")
            sacc = detect_saccades(fixes, samples, "left")
            for s in sacc:
                for f in fixes:
                    assert min(s.end_ms, f.end_ms) <= max(s.start_ms, f.start_ms) + 1e-9
                assert -180.0 <= s.angle_deg < 180.0


class TestBlinks:
    def _invalid_span(self, n_invalid, lead=30, tail=30):
        samples = [make_sample(i * FRAME_MS, 1, 1, 1, 1) for i in range(lead)]
        samples += [
            make_sample((lead + i) * FRAME_MS, None, None, None, None, lv=False, rv=False)
            for i in range(n_invalid)
        ]
        samples += [make_sample((lead + n_invalid + i) * FRAME_MS, 1, 1, 1, 1) for i in range(tail)]
        return samples

    def test_200ms_dropout_is_a_blink(self):
        blinks = detect_blinks(self._invalid_span(12))
        assert len(blinks) == 1
        assert abs(blinks[0].duration_ms - 200.0) < 1e-6

    def test_50ms_dropout_is_not(self):
        assert detect_blinks(self._invalid_span(3)) == []

    def test_1000ms_dropout_is_loss(self):
        samples = self._invalid_span(60)
        assert detect_blinks(samples) == []
        loss = detect_loss(samples)
        assert len(loss) == 1
        assert abs((loss[0][1] - loss[0][0]) - 1000.0) < 1e-6

    def test_blinks_disjoint_and_in_band(self, rng):
        for trial in range(10):
            samples = random_trace(np.random.default_rng(800 + trial))
            blinks = detect_blinks(samples)
            for b in blinks:
                assert 75.0 <= b.duration_ms <= 400.0
            for a, b in zip(blinks, blinks[1:]):
                assert a.end_ms <= b.start_ms

    def test_one_eye_valid_is_not_a_blink(self):
        samples = [make_sample(i * FRAME_MS, 1, 1, None, None, rv=False) for i in range(12)]
        assert detect_blinks(samples) == []


class TestPairing:
    def _fix(self, eye, start, end):
        return Fixation(eye=eye, start_ms=start, end_ms=end, centroid_px=(0, 0), sample_range=(0, 1))

    def test_identical_intervals(self):
        pairs = pair_fixations([self._fix("left", 0, 500)], [self._fix("right", 0, 500)])
        assert len(pairs) == 1

    def test_insufficient_overlap(self):
        pairs = pair_fixations([self._fix("left", 0, 500)], [self._fix("right", 450, 900)])
        assert pairs == []

    def test_sufficient_overlap(self):
        pairs = pair_fixations([self._fix("left", 0, 500)], [self._fix("right", 200, 600)])
        assert len(pairs) == 1

    def test_each_fixation_used_once(self):
        left = [self._fix("left", 0, 500), self._fix("left", 500, 1000)]
        right = [self._fix("right", 0, 1000)]
        pairs = pair_fixations(left, right)
        assert len(pairs) == 1
        # greedy by overlap: the right fixation pairs with the larger overlap;
        # equal overlaps resolve to the earlier-starting left fixation
        assert pairs[0][0].start_ms == 0


def test_angle_normalization():
    assert normalize_angle_deg(180.0) == -180.0
    assert normalize_angle_deg(-180.0) == -180.0
    assert normalize_angle_deg(350.0) == -10.0
    assert normalize_angle_deg(170.0) == 170.0


def test_events_jsonl_dump():
    rec = binocular_trace([(100.0, 100.0)] * 30 + [(400.0, 400.0)] * 30, disparity=10.0)
    events = detect_events(rec.samples)
    dump = events_to_jsonl(events)
    kinds = [line.split('"')[3] for line in dump.strip().splitlines()]
    assert "fixation" in kinds
