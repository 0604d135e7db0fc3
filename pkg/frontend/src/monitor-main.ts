/** Alert monitor page: polls an alert feed URL and plays the 0.5 s tone. */
import { AlertMonitor, playTone } from "./monitor.js";

const POLL_INTERVAL_MS = 1000;

const params = new URLSearchParams(window.location.search);
const feed = params.get("feed") || "/api/sessions/alerts/events";
const list = document.querySelector<HTMLElement>("#alerts")!;
const status = document.querySelector<HTMLElement>("#status")!;

let audio: AudioContext | null = null;
document.addEventListener(
  "pointerdown",
  () => {
    audio = new AudioContext();
    status.textContent = `listening on ${feed}`;
  },
  { once: true },
);

const monitor = new AlertMonitor(
  async () => {
    const res = await fetch(feed);
    if (!res.ok) throw new Error(String(res.status));
    return res.text();
  },
  (alert) => {
    const li = document.createElement("li");
    li.textContent = `alert at ${(alert.t_ms / 1000).toFixed(2)} s (score ${alert.score.toFixed(2)})`;
    list.prepend(li);
    if (audio) playTone(audio);
  },
);

status.textContent = "click anywhere to enable audio";
window.setInterval(() => void monitor.poll(), POLL_INTERVAL_MS);
