import json
import time
import urllib.error
import urllib.request

import numpy as np
import pytest

from conftest import FRAME_MS, make_sample
from verge.annotate import LABEL_DELIBERATE, LABEL_INTERNAL, label_windows
from verge.features import FEATURE_SUBSETS, FeatureTable, featurize
from verge.forest import train_forest
from verge.gaze import DEFAULT_SCREEN
from verge.realtime import (
    AlertEngine,
    collect_serve,
    replay,
    stream_labels,
)
from verge.synth import SynthSpec, alternating_plan, generate


class ScriptedModel:
    """Stub classifier yielding a scripted label per call."""

    feature_manifest = ()

    def __init__(self, labels):
        self.script = list(labels)
        self.calls = 0

    def predict_rows(self, X):
        lab = self.script[self.calls]
        self.calls += 1
        return [lab], np.array([1.0])


def frames(n, t0=0.0):
    return [make_sample(t0 + i * FRAME_MS, 100.0, 100.0, 110.0, 100.0) for i in range(n)]


POS = LABEL_INTERNAL
NEG = LABEL_DELIBERATE


class TestAlertRule:
    def _run(self, script):
        engine = AlertEngine(model=ScriptedModel(script), screen=DEFAULT_SCREEN)
        alerts = []
        for s in frames(59 + len(script)):
            a = engine.push_frame(s)
            if a is not None:
                alerts.append(a)
        return engine, alerts

    def test_59_positives_then_negative_no_alert(self):
        _, alerts = self._run([POS] * 59 + [NEG])
        assert alerts == []

    def test_60_consecutive_positives_alert_on_60th(self):
        engine = AlertEngine(model=ScriptedModel([POS] * 60), screen=DEFAULT_SCREEN)
        alerts = []
        for i, s in enumerate(frames(119)):
            a = engine.push_frame(s)
            if a is not None:
                alerts.append((i, a))
        assert len(alerts) == 1
        idx, alert = alerts[0]
        assert idx == 118  # 60th label lands on frame index 59 + 60 - 1
        assert alert.alert_duration_ms == 500.0
        assert alert.score == 1.0

    def test_cooldown_suppresses_second_alert(self):
        _, alerts = self._run([POS] * 120)
        assert len(alerts) == 1

    def test_alert_returns_after_cooldown(self):
        # 5 s cooldown = 300 frames; enough positives for a second alert
        n = 60 + 300 + 10
        _, alerts = self._run([POS] * n)
        assert len(alerts) == 2
        assert alerts[1].t_ms - alerts[0].t_ms >= 5000.0

    def test_negative_resets_streak(self):
        script = [POS] * 59 + [NEG] + [POS] * 60
        _, alerts = self._run(script)
        assert len(alerts) == 1

    def test_out_of_order_frames_dropped(self):
        engine = AlertEngine(model=ScriptedModel([POS] * 10), screen=DEFAULT_SCREEN)
        engine.push_frame(make_sample(100.0, 1, 1, 1, 1))
        engine.push_frame(make_sample(50.0, 1, 1, 1, 1))
        engine.push_frame(make_sample(100.0, 1, 1, 1, 1))
        assert engine.dropped_frames == 2

    def test_wrong_manifest_rejected(self):
        class M:
            feature_manifest = ("bogus",)

        with pytest.raises(ValueError):
            AlertEngine(model=M(), screen=DEFAULT_SCREEN)


def trained_vergence_model(seed=5, n_trees=10):
    tables = []
    for i in range(2):
        spec = SynthSpec(
            seed=seed + i, duration_ms=30000.0, episodes=alternating_plan(30000.0, seed=seed + i)
        )
        rec, segments = generate(spec, participant_id=f"p{i}")
        vecs = featurize(rec, 1000.0)
        labels = label_windows([v.window for v in vecs], segments)
        tables.append(FeatureTable.from_vectors(vecs, f"p{i}", labels))
    table = FeatureTable.concat(tables).labeled().subset("vergence")
    return train_forest(
        table.X, list(table.labels), table.feature_names, n_trees=n_trees, max_depth=8, seed=seed
    )


class TestStreamingEquivalence:
    def test_engine_matches_batch_one_frame_step(self):
        model = trained_vergence_model()
        spec = SynthSpec(seed=77, duration_ms=8000.0, episodes=alternating_plan(8000.0, seed=77))
        rec, _ = generate(spec)
        dt = rec.frame_period_ms()

        engine = AlertEngine(model=model, screen=rec.screen)
        stream, _ = stream_labels(engine, replay(rec, speed=0.0))

        vecs = featurize(rec, 1000.0, step_ms=dt)
        idx = [FEATURE_SUBSETS["full"].index(n) for n in FEATURE_SUBSETS["vergence"]]
        X = np.array([v.values[idx] for v in vecs])
        batch, _ = model.predict_rows(X)

        assert all(lab is None for lab in stream[:59])
        aligned = stream[59 : 59 + len(batch)]
        assert aligned == list(batch)
        # the engine may label at most one trailing frame past the batch grid
        assert len(stream) - 59 - len(batch) in (0, 1)

    def test_replay_pacing(self):
        spec = SynthSpec(seed=3, duration_ms=1000.0, episodes=[(LABEL_DELIBERATE, 0.0, 1000.0)])
        rec, _ = generate(spec)
        t0 = time.perf_counter()
        for _ in replay(rec, speed=5.0):
            pass
        elapsed = time.perf_counter() - t0
        assert 0.1 <= elapsed <= 0.6

    def test_replay_speed_zero_is_fast(self):
        spec = SynthSpec(seed=3, duration_ms=2000.0, episodes=[(LABEL_DELIBERATE, 0.0, 2000.0)])
        rec, _ = generate(spec)
        t0 = time.perf_counter()
        assert len(list(replay(rec, speed=0.0))) == len(rec.samples)
        assert time.perf_counter() - t0 < 0.5

    def test_empty_recording_empty_stream(self):
        from conftest import make_recording

        assert list(replay(make_recording([]), speed=0.0)) == []


def test_tcp_line_sink_round_trip():
    import socket
    import threading

    from verge.realtime import tcp_line_sink

    server = socket.socket()
    server.bind(("127.0.0.1", 0))
    server.listen(1)
    received = []

    def accept():
        conn, _ = server.accept()
        with conn, conn.makefile("r") as fh:
            received.extend(ln.strip() for ln in fh)

    t = threading.Thread(target=accept)
    t.start()
    sink = tcp_line_sink(f"127.0.0.1:{server.getsockname()[1]}")
    sink('{"kind":"alert","t_ms":1.0,"score":0.9}')
    sink.close()
    t.join(timeout=5)
    server.close()
    assert received == ['{"kind":"alert","t_ms":1.0,"score":0.9}']


def _get(url):
    with urllib.request.urlopen(url, timeout=5) as r:
        return r.status, r.read()


def _post(url, body):
    req = urllib.request.Request(url, data=body.encode(), method="POST")
    with urllib.request.urlopen(req, timeout=5) as r:
        return r.status, r.read()


@pytest.fixture
def collector(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html>verge</html>")
    c = collect_serve("127.0.0.1:0", str(tmp_path / "data"), ui_dir=str(ui))
    host, port = c.address
    yield c, f"http://{host}:{port}", tmp_path
    c.shutdown()


class TestCollector:
    def test_healthz(self, collector):
        _, base, _ = collector
        status, body = _get(f"{base}/healthz")
        assert status == 200 and body == b"ok\n"

    def test_post_event_appends_one_line(self, collector):
        c, base, tmp = collector
        line = json.dumps({"kind": "deblur", "t_ms": 1.0, "session": "s1"})
        status, _ = _post(f"{base}/api/sessions/s1/events", line)
        assert status == 204
        path = tmp / "data" / "sessions" / "s1" / "events.jsonl"
        assert path.read_text().count("\n") == 1
        _post(f"{base}/api/sessions/s1/events", line)
        assert path.read_text().count("\n") == 2

    def test_malformed_event_leaves_file_unchanged(self, collector):
        c, base, tmp = collector
        _post(f"{base}/api/sessions/s2/events", json.dumps({"kind": "x"}))
        before = (tmp / "data" / "sessions" / "s2" / "events.jsonl").read_text()
        with pytest.raises(urllib.error.HTTPError) as e:
            _post(f"{base}/api/sessions/s2/events", "{not json")
        assert e.value.code == 400
        assert (tmp / "data" / "sessions" / "s2" / "events.jsonl").read_text() == before

    def test_schedule_identical_bytes(self, collector):
        _, base, _ = collector
        url = f"{base}/api/sessions/s3/schedule?alpha=1&duration_ms=60000&seed=5"
        _, a = _get(url)
        _, b = _get(url)
        assert a == b
        doc = json.loads(a)
        assert doc["alpha"] == 1.0 and doc["aperture_px"] == 15

    def test_schedule_param_collision(self, collector):
        _, base, _ = collector
        _get(f"{base}/api/sessions/s4/schedule?alpha=1&duration_ms=60000&seed=5")
        with pytest.raises(urllib.error.HTTPError) as e:
            _get(f"{base}/api/sessions/s4/schedule?alpha=2&duration_ms=60000&seed=5")
        assert e.value.code == 409

    def test_events_read_back(self, collector):
        _, base, _ = collector
        line = json.dumps({"kind": "blur_start", "t_ms": 2.0, "session": "s5", "alpha": 1.0})
        _post(f"{base}/api/sessions/s5/events", line)
        status, body = _get(f"{base}/api/sessions/s5/events")
        assert status == 200
        assert json.loads(body.decode().strip())["kind"] == "blur_start"

    def test_static_assets_served(self, collector):
        _, base, _ = collector
        status, body = _get(f"{base}/")
        assert status == 200 and b"verge" in body

    def test_unknown_api_404(self, collector):
        _, base, _ = collector
        with pytest.raises(urllib.error.HTTPError) as e:
            _get(f"{base}/api/nope")
        assert e.value.code == 404
