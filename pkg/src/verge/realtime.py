"""Streaming mind-alert engine, file replay, and the session-log collector.

The engine keeps a one-second ring buffer of frames (60 at nominal rate),
classifies the buffer with vergence-only features as each frame lands, and
lets the frame inherit that window label. An alert fires once 60
consecutive frame labels are positive, then a 5 s cooldown suppresses
repeats. The collector is a small threaded HTTP service that stores blur
schedules, appends UI event logs, and serves the static frontend.
"""
from __future__ import annotations

import json
import re
import socket
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterator, Optional, Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import annotate
from .features import FEATURE_SUBSETS, GeometryConfig, Window, extract_features
from .forest import POSITIVE_LABEL
from .gaze import GazeSample, Recording, ScreenConfig
from .oculomotor import detect_events

BUFFER_FRAMES = 60
ALERT_DURATION_MS = 500.0
ALERT_COOLDOWN_MS = 5000.0


@dataclass(frozen=True)
class AlertEvent:
    t_ms: float
    window_start_ms: float
    window_end_ms: float
    score: float
    alert_duration_ms: float = ALERT_DURATION_MS

    def to_jsonable(self) -> dict:
        return {"kind": "alert", "t_ms": self.t_ms, "score": self.score}


@dataclass
class AlertEngine:
    """Per-frame classification over a sliding one-second buffer.

    Not safe for concurrent pushes on one instance; run one engine per
    stream.
    """

    model: object  # ForestModel or ZeroRModel over the vergence manifest
    screen: ScreenConfig
    buffer_frames: int = BUFFER_FRAMES
    cooldown_ms: float = ALERT_COOLDOWN_MS
    positive_label: str = POSITIVE_LABEL

    _buffer: list[GazeSample] = field(default_factory=list)
    _labels: list[str] = field(default_factory=list)
    _cooldown_until_ms: float = field(default=-np.inf)
    dropped_frames: int = 0

    def __post_init__(self):
        manifest = tuple(getattr(self.model, "feature_manifest", ()))
        if manifest and manifest != FEATURE_SUBSETS["vergence"]:
            raise ValueError("engine model must be trained on the vergence feature subset")
        self.geom = GeometryConfig(pitch_mm=self.screen.pixel_pitch_mm)
        self._vergence_idx = [
            list(FEATURE_SUBSETS["full"]).index(n) for n in FEATURE_SUBSETS["vergence"]
        ]

    def classify_buffer(self) -> tuple[str, float]:
        samples = self._buffer
        dt = samples[1].t_ms - samples[0].t_ms if len(samples) >= 2 else 1000.0 / 60.0
        start = samples[0].t_ms
        end = samples[-1].t_ms + dt
        ratio = sum(1 for s in samples if s.both_valid) / len(samples)
        rec = Recording(
            participant_id="stream", task_tag="stream", screen=self.screen, samples=list(samples)
        )
        window = Window(start_ms=start, end_ms=end, size_ms=end - start, recording=rec, valid_ratio=ratio)
        events = detect_events(samples)
        vec = extract_features(window, events, self.geom)
        x = vec.values[self._vergence_idx]
        labels, scores = self.model.predict_rows(x[None, :])
        return labels[0], float(scores[0])

    def push_frame(self, sample: GazeSample) -> Optional[AlertEvent]:
        """Feed one frame; may return an alert.

        Late or duplicate frames (t_ms not strictly increasing) are dropped
        and counted.
        """
        if self._buffer and sample.t_ms <= self._buffer[-1].t_ms:
            self.dropped_frames += 1
            return None
        self._buffer.append(sample)
        if len(self._buffer) > self.buffer_frames:
            self._buffer.pop(0)
        if len(self._buffer) < self.buffer_frames:
            return None

        label, score = self.classify_buffer()
        self._labels.append(label)
        if len(self._labels) > self.buffer_frames:
            self._labels.pop(0)

        now = sample.t_ms
        if (
            len(self._labels) == self.buffer_frames
            and all(lab == self.positive_label for lab in self._labels)
            and now >= self._cooldown_until_ms
        ):
            self._cooldown_until_ms = now + self.cooldown_ms
            return AlertEvent(
                t_ms=now,
                window_start_ms=self._buffer[0].t_ms,
                window_end_ms=now,
                score=score,
            )
        return None

    @property
    def last_label(self) -> Optional[str]:
        return self._labels[-1] if self._labels else None


def replay(rec: Recording, speed: float = 0.0) -> Iterator[GazeSample]:
    """Yield the recording's frames, paced at ``speed`` x real time.

    speed=0 streams as fast as possible.
    """
    prev_t: Optional[float] = None
    for s in rec.samples:
        if speed > 0 and prev_t is not None:
            time.sleep((s.t_ms - prev_t) / 1000.0 / speed)
        prev_t = s.t_ms
        yield s


def stream_labels(engine: AlertEngine, frames: Iterator[GazeSample]) -> tuple[list[Optional[str]], list[AlertEvent]]:
    """Run the engine over a frame stream; per-frame labels plus alerts.

    Frames pushed before the buffer first fills carry None.
    """
    labels: list[Optional[str]] = []
    alerts: list[AlertEvent] = []
    for s in frames:
        alert = engine.push_frame(s)
        labels.append(engine.last_label)
        if alert is not None:
            alerts.append(alert)
    return labels, alerts


def tcp_frames(host: str, port: int) -> Iterator[GazeSample]:
    """Read gaze JSONL lines from a TCP connection."""
    from .gaze import _sample_from_dict

    with socket.create_connection((host, port)) as conn:
        with conn.makefile("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield _sample_from_dict(json.loads(line))


class tcp_line_sink:
    """Write newline-delimited strings to a TCP peer ("host:port")."""

    def __init__(self, target: str):
        host, _, port = target.partition(":")
        self._conn = socket.create_connection((host, int(port)))

    def __call__(self, line: str) -> None:
        self._conn.sendall((line + "\n").encode("utf-8"))

    def close(self) -> None:
        self._conn.close()


# ---------------------------------------------------------------------------
# HTTP collector for UI session logs

_SESSION_RE = re.compile(r"^/api/sessions/([A-Za-z0-9_.-]+)/(events|schedule)$")


class _CollectorState:
    def __init__(self, data_dir: Path, ui_dir: Optional[Path], default_alpha: float = 1.0):
        self.data_dir = data_dir
        self.ui_dir = ui_dir
        self.default_alpha = default_alpha
        self.lock = threading.Lock()

    def session_dir(self, session_id: str) -> Path:
        d = self.data_dir / "sessions" / session_id
        d.mkdir(parents=True, exist_ok=True)
        return d


class _CollectorHandler(BaseHTTPRequestHandler):
    state: _CollectorState

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _reply(self, code: int, body: bytes = b"", content_type: str = "text/plain") -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/healthz":
            self._reply(200, b"ok\n")
            return
        m = _SESSION_RE.match(url.path)
        if m and m.group(2) == "schedule":
            self._get_schedule(m.group(1), parse_qs(url.query))
            return
        if m and m.group(2) == "events":
            self._get_events(m.group(1))
            return
        if url.path.startswith("/api/"):
            self._reply(404, b"not found\n")
            return
        self._serve_static(url.path)

    def do_POST(self):
        url = urlparse(self.path)
        m = _SESSION_RE.match(url.path)
        if m and m.group(2) == "events":
            self._post_events(m.group(1))
            return
        self._reply(404, b"not found\n")

    # -- endpoints

    def _get_schedule(self, session_id: str, query: dict) -> None:
        try:
            duration = float(query.get("duration_ms", ["600000"])[0])
            alpha = float(query.get("alpha", [str(self.state.default_alpha)])[0])
            seed = int(query.get("seed", [str(annotate_seed(session_id))])[0])
        except ValueError:
            self._reply(400, b"bad schedule parameters\n")
            return
        path = self.state.session_dir(session_id) / "schedule.json"
        with self.state.lock:
            if path.exists():
                existing = path.read_bytes()
                sched = annotate.BlurSchedule.from_json(existing.decode("utf-8"))
                if (
                    sched.rng_seed != seed
                    or sched.alpha != alpha
                    or sched.video_duration_ms != duration
                ):
                    self._reply(409, b"session already has a schedule with different parameters\n")
                    return
                self._reply(200, existing, "application/json")
                return
            try:
                sched = annotate.make_schedule(duration, alpha, seed, session_id=session_id)
            except ValueError as e:
                self._reply(400, f"{e}\n".encode())
                return
            body = (sched.to_json() + "\n").encode("utf-8")
            path.write_bytes(body)
        self._reply(200, body, "application/json")

    def _post_events(self, session_id: str) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length).decode("utf-8", errors="replace")
        lines = [ln for ln in body.split("\n") if ln.strip()]
        if not lines:
            self._reply(400, b"empty body\n")
            return
        for ln in lines:
            try:
                doc = json.loads(ln)
            except json.JSONDecodeError:
                self._reply(400, b"malformed event line\n")
                return
            if not isinstance(doc, dict) or "kind" not in doc:
                self._reply(400, b"event must be an object with a kind\n")
                return
        path = self.state.session_dir(session_id) / "events.jsonl"
        with self.state.lock:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
                fh.flush()
        self._reply(204)

    def _get_events(self, session_id: str) -> None:
        path = self.state.data_dir / "sessions" / session_id / "events.jsonl"
        if not path.exists():
            self._reply(404, b"no events\n")
            return
        self._reply(200, path.read_bytes(), "application/x-ndjson")

    def _serve_static(self, path: str) -> None:
        root = self.state.ui_dir
        if root is None or not root.is_dir():
            self._reply(404, b"no ui assets configured\n")
            return
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._reply(404, b"not found\n")
            return
        ctype = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".css": "text/css",
            ".json": "application/json",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self._reply(200, target.read_bytes(), ctype)


def annotate_seed(session_id: str) -> int:
    """Stable fallback schedule seed derived from the session id."""
    import zlib

    return zlib.crc32(session_id.encode("utf-8"))


@dataclass
class Collector:
    server: ThreadingHTTPServer
    thread: threading.Thread

    @property
    def address(self) -> tuple[str, int]:
        return self.server.server_address[:2]

    def shutdown(self) -> None:
        self.server.shutdown()
        self.thread.join(timeout=5)
        self.server.server_close()


def collect_serve(
    bind: str, data_dir: str, ui_dir: Optional[str] = None, default_alpha: float = 1.0
) -> Collector:
    """Start the collector on ``bind`` ("host:port"); returns a handle.

    Appends to one session's event file are serialized under a lock; the
    schedule for a session is generated once and then served byte-identical.
    """
    host, _, port_s = bind.partition(":")
    state = _CollectorState(Path(data_dir), Path(ui_dir) if ui_dir else None, default_alpha)
    handler = type("BoundHandler", (_CollectorHandler,), {"state": state})
    server = ThreadingHTTPServer((host or "127.0.0.1", int(port_s or "0")), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return Collector(server=server, thread=thread)
