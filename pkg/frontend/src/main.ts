/** Participant app entry point: experimenter panel, video playback with
 * gradual blur, deblur input, and event delivery. */
import { blurCanvas } from "./blur.js";
import { EventLog, postToCollector } from "./events.js";
import { fetchSchedule } from "./schedule.js";
import { BlurSession } from "./session.js";

const RENDER_WIDTH = 640; // downscale for the per-frame separable blur
const FLUSH_INTERVAL_MS = 1000;

function qs<T extends Element>(sel: string): T {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
}

function setupExperimenterPanel(): void {
  const form = qs<HTMLFormElement>("#setup");
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    const data = new FormData(form);
    const params = new URLSearchParams({
      session: String(data.get("session") || "demo"),
      alpha: String(data.get("alpha") || "1"),
      video: String(data.get("video") || ""),
    });
    const seed = String(data.get("seed") || "");
    if (seed) params.set("seed", seed);
    window.location.search = params.toString();
  });
}

async function runParticipantView(params: URLSearchParams): Promise<void> {
  const sessionId = params.get("session")!;
  const alpha = Number(params.get("alpha") || "1");
  const videoUrl = params.get("video") || "";
  const seedParam = params.get("seed");
  const base = params.get("collector") || "";

  qs<HTMLElement>("#panel").hidden = true;
  qs<HTMLElement>("#experiment").hidden = false;
  const video = qs<HTMLVideoElement>("#stimulus");
  const canvas = qs<HTMLCanvasElement>("#frame");
  const status = qs<HTMLElement>("#status");
  const ctx = canvas.getContext("2d", { willReadFrequently: true })!;

  video.src = videoUrl;
  await new Promise<void>((resolve, reject) => {
    video.addEventListener("loadedmetadata", () => resolve(), { once: true });
    video.addEventListener("error", () => reject(new Error("video failed to load")), { once: true });
  });
  const durationMs = video.duration * 1000;
  canvas.width = Math.min(RENDER_WIDTH, video.videoWidth || RENDER_WIDTH);
  canvas.height = Math.round(canvas.width * ((video.videoHeight || 9 * RENDER_WIDTH / 16) / (video.videoWidth || RENDER_WIDTH)));

  const schedule = await fetchSchedule(base, sessionId, {
    alpha,
    durationMs,
    seed: seedParam !== null ? Number(seedParam) : undefined,
  });
  const log = new EventLog(postToCollector(base, sessionId));
  const session = new BlurSession(schedule, log);

  const clock = () => video.currentTime * 1000;
  const deblur = () => session.pointer(clock());
  canvas.addEventListener("pointerdown", deblur);
  window.addEventListener("keydown", (e) => {
    if (e.code === "Space") {
      e.preventDefault();
      deblur();
    }
  });

  const flushTimer = window.setInterval(() => void log.flush(), FLUSH_INTERVAL_MS);

  video.addEventListener("ended", async () => {
    session.finish(clock());
    window.clearInterval(flushTimer);
    const delivered = await log.flush();
    if (!delivered) offerDownload(log, sessionId, status);
    else status.textContent = "session complete; events delivered";
  });

  const render = () => {
    const now = clock();
    session.tick(now);
    ctx.drawImage(video, 0, 0, canvas.width, canvas.height);
    const sigma = session.sigmaAt(now);
    if (sigma > 0) {
      // scale the stimulus-space sigma into the downscaled render target
      blurCanvas(ctx, sigma * (canvas.width / (video.videoWidth || canvas.width)));
    }
    video.requestVideoFrameCallback ? video.requestVideoFrameCallback(render) : requestAnimationFrame(render);
  };
  render();
  await video.play();
  status.textContent = "click or press space when the video looks blurry";
}

function offerDownload(log: EventLog, sessionId: string, status: HTMLElement): void {
  const blob = new Blob([log.toJsonl()], { type: "application/x-ndjson" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `${sessionId}.events.jsonl`;
  a.textContent = "collector unreachable: download the event log";
  status.textContent = "";
  status.appendChild(a);
}

const query = new URLSearchParams(window.location.search);
if (query.has("session")) {
  runParticipantView(query).catch((err) => {
    qs<HTMLElement>("#status").textContent = String(err);
  });
} else {
  setupExperimenterPanel();
}
