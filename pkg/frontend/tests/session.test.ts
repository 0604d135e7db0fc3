import { describe, expect, it } from "vitest";
import { EventLog } from "../src/events.js";
import { Schedule, gapsFromOnsets } from "../src/schedule.js";
import { BlurSession } from "../src/session.js";

const FRAME_MS = 1000 / 60;

function schedule(overrides: Partial<Schedule> = {}): Schedule {
  return {
    session_id: "t1",
    alpha: 1,
    aperture_px: 15,
    onsets_ms: [12000, 26000],
    rng_seed: 1,
    video_duration_ms: 40000,
    ...overrides,
  };
}

/** Drive a session on a synthetic 60 Hz clock with an auto-clicker that
 * fires a fixed delay after each blur onset. */
function runWithAutoClicker(sched: Schedule, clickDelays: number[]) {
  const log = new EventLog(async () => {});
  const session = new BlurSession(sched, log);
  let clickAt: number | null = null;
  let blurIdx = 0;
  for (let i = 0; i * FRAME_MS <= sched.video_duration_ms; i++) {
    const t = i * FRAME_MS;
    if (clickAt !== null && t >= clickAt) {
      session.pointer(t);
      clickAt = null;
    }
    const wasClear = session.phase.kind === "clear";
    session.tick(t);
    if (wasClear && session.phase.kind === "blurring") {
      clickAt = session.phase.sinceMs + (clickDelays[blurIdx] ?? 1000);
      blurIdx++;
    }
  }
  session.finish(sched.video_duration_ms);
  return { log, events: log.lines().map((l) => JSON.parse(l)) };
}

describe("gapsFromOnsets", () => {
  it("derives re-anchorable gaps", () => {
    expect(gapsFromOnsets([12000, 26000, 38000])).toEqual([12000, 14000, 12000]);
    expect(gapsFromOnsets([])).toEqual([]);
  });
});

describe("BlurSession", () => {
  it("logs T_deblur within one frame of the scripted +1000 ms click", () => {
    const { events } = runWithAutoClicker(schedule(), [1000, 1000]);
    const blurs = events.filter((e) => e.kind === "blur_start");
    const deblurs = events.filter((e) => e.kind === "deblur");
    expect(blurs.length).toBe(2);
    expect(deblurs.length).toBe(2);
    for (let i = 0; i < 2; i++) {
      const tDeblur = deblurs[i].t_ms - blurs[i].t_ms;
      expect(Math.abs(tDeblur - 1000)).toBeLessThanOrEqual(17);
    }
  });

  it("reports the analytic sigma = alpha * t at every tick", () => {
    const sched = schedule({ alpha: 2 });
    const log = new EventLog(async () => {});
    const session = new BlurSession(sched, log);
    const sigmas: Array<[number, number]> = [];
    for (let i = 0; i * FRAME_MS <= 16000; i++) {
      const t = i * FRAME_MS;
      session.tick(t);
      if (session.phase.kind === "blurring") sigmas.push([t - session.phase.sinceMs, session.sigmaAt(t)]);
    }
    expect(sigmas.length).toBeGreaterThan(0);
    for (const [elapsed, sigma] of sigmas) {
      expect(sigma).toBe((2 * elapsed) / 1000); // exact, not approximate
    }
  });

  it("logs the analytic sigma on the deblur event", () => {
    const { events } = runWithAutoClicker(schedule({ alpha: 0.5 }), [2000]);
    const blur = events.find((e) => e.kind === "blur_start");
    const deblur = events.find((e) => e.kind === "deblur");
    expect(deblur.sigma).toBe((0.5 * (deblur.t_ms - blur.t_ms)) / 1000);
  });

  it("ignores input while clear", () => {
    const log = new EventLog(async () => {});
    const session = new BlurSession(schedule(), log);
    session.tick(0);
    session.pointer(100);
    session.pointer(5000);
    expect(log.lines()).toEqual([]);
  });

  it("re-anchors the next onset on the deblur moment", () => {
    const { events } = runWithAutoClicker(schedule(), [3000, 1000]);
    const blurs = events.filter((e) => e.kind === "blur_start");
    const deblurs = events.filter((e) => e.kind === "deblur");
    const gap = gapsFromOnsets(schedule().onsets_ms)[1];
    // second onset = first deblur + schedule gap, up to one frame of tick lag
    expect(blurs[1].t_ms - (deblurs[0].t_ms + gap)).toBeGreaterThanOrEqual(0);
    expect(blurs[1].t_ms - (deblurs[0].t_ms + gap)).toBeLessThanOrEqual(FRAME_MS + 1e-9);
  });

  it("keeps event timestamps monotone and playback-clock based", () => {
    const { events } = runWithAutoClicker(schedule(), [2500, 900]);
    const times = events.map((e) => e.t_ms);
    for (let i = 1; i < times.length; i++) expect(times[i]).toBeGreaterThanOrEqual(times[i - 1]);
    expect(events.at(-1).kind).toBe("session_end");
  });

  it("never starts a blur after the video ends", () => {
    const sched = schedule({ onsets_ms: [12000], video_duration_ms: 13000 });
    const log = new EventLog(async () => {});
    const session = new BlurSession(sched, log);
    for (let i = 0; i * FRAME_MS <= 20000; i++) session.tick(i * FRAME_MS);
    const events = log.lines().map((l) => JSON.parse(l));
    // onset at 12000 fires (before the end), but never re-fires past duration
    expect(events.filter((e) => e.kind === "blur_start").length).toBe(1);
  });

  it("emits session_end exactly once", () => {
    const log = new EventLog(async () => {});
    const session = new BlurSession(schedule(), log);
    session.finish(40000);
    session.finish(40001);
    const ends = log.lines().filter((l) => l.includes("session_end"));
    expect(ends.length).toBe(1);
  });
});
