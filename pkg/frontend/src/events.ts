/** Session event buffering and ordered delivery to the collector. */

export interface SessionEvent {
  kind: string;
  t_ms: number;
  session: string;
  [extra: string]: unknown;
}

export type PostFn = (jsonlBody: string) => Promise<void>;

/**
 * Buffers events in order and posts them opportunistically. Failed posts
 * keep the lines queued for the next flush, so delivery is at-least-once
 * and always in order; everything stays available for a local download
 * fallback when the collector is unreachable.
 */
export class EventLog {
  private pending: string[] = [];
  private delivered: string[] = [];
  private flushing = false;
  private lastT = -Infinity;

  constructor(private post: PostFn) {}

  push(ev: SessionEvent): void {
    if (!Number.isFinite(ev.t_ms)) throw new Error("event t_ms must be finite");
    if (ev.t_ms < this.lastT) throw new Error(`event timestamps must be monotone (${ev.t_ms} < ${this.lastT})`);
    this.lastT = ev.t_ms;
    this.pending.push(JSON.stringify(ev));
  }

  /** Try to deliver everything buffered; returns true when drained. */
  async flush(): Promise<boolean> {
    if (this.flushing) return false;
    if (this.pending.length === 0) return true;
    this.flushing = true;
    const batch = this.pending.slice();
    try {
      await this.post(batch.join("\n") + "\n");
      this.delivered.push(...batch);
      this.pending.splice(0, batch.length);
      return this.pending.length === 0;
    } catch {
      return false; // keep everything queued, order preserved
    } finally {
      this.flushing = false;
    }
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  /** Full JSONL transcript (delivered + pending) for download fallback. */
  lines(): string[] {
    return [...this.delivered, ...this.pending];
  }

  toJsonl(): string {
    const ls = this.lines();
    return ls.length ? ls.join("\n") + "\n" : "";
  }
}

export function postToCollector(baseUrl: string, sessionId: string, fetchFn: typeof fetch = fetch): PostFn {
  const url = `${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/events`;
  return async (body: string) => {
    const res = await fetchFn(url, { method: "POST", body });
    if (!res.ok && res.status !== 204) throw new Error(`post failed: ${res.status}`);
  };
}
