/**
 * Blur-session state machine, driven entirely by the playback clock so
 * pauses and buffering never corrupt timing. The rendering loop calls
 * tick(now) every frame; input handlers call pointer(now).
 *
 * Each scheduled onset starts a gradual Gaussian blur whose sigma grows as
 * alpha * seconds-since-onset. A pointer/key press while blurred clears it
 * instantly, logs the deblur, and re-anchors the next onset gap on that
 * moment. Input while clear is ignored.
 */
import { Schedule, gapsFromOnsets } from "./schedule.js";
import { EventLog } from "./events.js";

export type Phase = { kind: "clear" } | { kind: "blurring"; sinceMs: number };

export class BlurSession {
  readonly alpha: number;
  private gaps: number[];
  private gapIndex = 0;
  private nextOnsetMs: number | null;
  private phase_: Phase = { kind: "clear" };
  private finished = false;

  constructor(
    private schedule: Schedule,
    private log: EventLog,
  ) {
    this.alpha = schedule.alpha;
    this.gaps = gapsFromOnsets(schedule.onsets_ms);
    this.nextOnsetMs = this.gaps.length > 0 ? this.gaps[0] : null;
  }

  get phase(): Phase {
    return this.phase_;
  }

  /** Analytic blur sigma at the given playback time. */
  sigmaAt(nowMs: number): number {
    if (this.phase_.kind !== "blurring") return 0;
    return (this.alpha * (nowMs - this.phase_.sinceMs)) / 1000;
  }

  /** Advance the machine to the current playback time. */
  tick(nowMs: number): void {
    if (this.finished || this.phase_.kind === "blurring") return;
    if (
      this.nextOnsetMs !== null &&
      nowMs >= this.nextOnsetMs &&
      nowMs < this.schedule.video_duration_ms
    ) {
      this.phase_ = { kind: "blurring", sinceMs: nowMs };
      this.log.push({
        kind: "blur_start",
        t_ms: nowMs,
        session: this.schedule.session_id,
        alpha: this.alpha,
      });
    }
  }

  /** Participant input: deblur when blurred, otherwise a no-op. */
  pointer(nowMs: number): void {
    if (this.finished || this.phase_.kind !== "blurring") return;
    this.log.push({
      kind: "deblur",
      t_ms: nowMs,
      session: this.schedule.session_id,
      sigma: this.sigmaAt(nowMs),
    });
    this.phase_ = { kind: "clear" };
    this.gapIndex += 1;
    this.nextOnsetMs =
      this.gapIndex < this.gaps.length ? nowMs + this.gaps[this.gapIndex] : null;
  }

  /** Playback reached the end: emit the session-end marker once. */
  finish(nowMs: number): void {
    if (this.finished) return;
    this.finished = true;
    this.phase_ = { kind: "clear" };
    this.log.push({ kind: "session_end", t_ms: nowMs, session: this.schedule.session_id });
  }
}
