/** Live alert monitor: polls an alert JSONL feed and fires a callback for
 * each new alert (the page plays the 0.5 s tone). */

export interface AlertRecord {
  kind: "alert";
  t_ms: number;
  score: number;
}

/** Tolerant JSONL parse keeping only well-formed alert records. */
export function parseAlertLines(text: string): AlertRecord[] {
  const out: AlertRecord[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    try {
      const doc = JSON.parse(trimmed);
      if (doc && doc.kind === "alert" && Number.isFinite(doc.t_ms)) {
        out.push({ kind: "alert", t_ms: doc.t_ms, score: Number(doc.score ?? 0) });
      }
    } catch {
      // skip malformed lines; the feed may be mid-write
    }
  }
  return out;
}

export class AlertMonitor {
  private seenUpTo = -Infinity;

  constructor(
    private fetchText: () => Promise<string>,
    private onAlert: (a: AlertRecord) => void,
  ) {}

  /** One poll cycle: fetch the feed, emit alerts newer than any seen. */
  async poll(): Promise<number> {
    let text: string;
    try {
      text = await this.fetchText();
    } catch {
      return 0; // feed unreachable; try again next cycle
    }
    let emitted = 0;
    for (const alert of parseAlertLines(text)) {
      if (alert.t_ms > this.seenUpTo) {
        this.seenUpTo = alert.t_ms;
        this.onAlert(alert);
        emitted++;
      }
    }
    return emitted;
  }
}

export const TONE_DURATION_MS = 500;

/** Play the alert tone; separate from AlertMonitor so tests can stub it. */
export function playTone(audio: AudioContext, durationMs: number = TONE_DURATION_MS): void {
  const osc = audio.createOscillator();
  const gain = audio.createGain();
  osc.frequency.value = 880;
  gain.gain.value = 0.2;
  osc.connect(gain).connect(audio.destination);
  osc.start();
  osc.stop(audio.currentTime + durationMs / 1000);
}
