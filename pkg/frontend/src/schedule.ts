/** Blur schedule as served by the collector. */
export interface Schedule {
  session_id: string;
  alpha: number;
  aperture_px: number;
  onsets_ms: number[];
  rng_seed: number;
  video_duration_ms: number;
}

/**
 * Inter-onset gaps. The schedule assumes each blur clears at its onset, so
 * at runtime every gap is re-anchored on the actual deblur moment.
 */
export function gapsFromOnsets(onsets: number[]): number[] {
  if (onsets.length === 0) return [];
  const gaps = [onsets[0]];
  for (let i = 1; i < onsets.length; i++) gaps.push(onsets[i] - onsets[i - 1]);
  return gaps;
}

export async function fetchSchedule(
  baseUrl: string,
  sessionId: string,
  params: { alpha?: number; durationMs?: number; seed?: number },
  fetchFn: typeof fetch = fetch,
): Promise<Schedule> {
  const q = new URLSearchParams();
  if (params.alpha !== undefined) q.set("alpha", String(params.alpha));
  if (params.durationMs !== undefined) q.set("duration_ms", String(params.durationMs));
  if (params.seed !== undefined) q.set("seed", String(params.seed));
  const url = `${baseUrl}/api/sessions/${encodeURIComponent(sessionId)}/schedule?${q}`;
  const res = await fetchFn(url);
  if (!res.ok) throw new Error(`schedule fetch failed: ${res.status}`);
  return (await res.json()) as Schedule;
}
