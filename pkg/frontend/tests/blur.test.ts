import { describe, expect, it } from "vitest";
import { blurRgba, gaussianKernel } from "../src/blur.js";

function image(w: number, h: number, fill: (x: number, y: number) => number): Uint8ClampedArray {
  const data = new Uint8ClampedArray(w * h * 4);
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      const v = fill(x, y);
      const o = (y * w + x) * 4;
      data[o] = data[o + 1] = data[o + 2] = v;
      data[o + 3] = 255;
    }
  }
  return data;
}

describe("gaussianKernel", () => {
  it("is a delta at sigma zero", () => {
    expect(Array.from(gaussianKernel(0))).toEqual([1]);
  });

  it("is normalized and capped by the aperture", () => {
    for (const sigma of [0.3, 1, 2.5, 10, 50]) {
      const k = gaussianKernel(sigma, 15);
      expect(k.length).toBeLessThanOrEqual(15);
      expect(k.length % 2).toBe(1);
      const sum = Array.from(k).reduce((a, b) => a + b, 0);
      expect(Math.abs(sum - 1)).toBeLessThan(1e-6);
    }
  });

  it("widens with sigma", () => {
    expect(gaussianKernel(0.5).length).toBeLessThan(gaussianKernel(3).length);
  });
});

describe("blurRgba", () => {
  it("returns an untouched copy at sigma zero", () => {
    const src = image(8, 8, (x, y) => (x * 31 + y * 7) % 256);
    const out = blurRgba(src, 8, 8, 0);
    expect(Array.from(out)).toEqual(Array.from(src));
    expect(out).not.toBe(src);
  });

  it("preserves constant images", () => {
    const src = image(16, 12, () => 77);
    const out = blurRgba(src, 16, 12, 2.0);
    for (let i = 0; i < out.length; i += 4) expect(Math.abs(out[i] - 77)).toBeLessThanOrEqual(1);
  });

  it("reduces contrast of a step edge", () => {
    const w = 32;
    const src = image(w, 8, (x) => (x < w / 2 ? 0 : 255));
    const out = blurRgba(src, w, 8, 3.0);
    const mid = (3 * w + w / 2) * 4;
    expect(out[mid]).toBeGreaterThan(40);
    expect(out[mid]).toBeLessThan(215);
  });

  it("rejects mismatched buffers", () => {
    expect(() => blurRgba(new Uint8ClampedArray(10), 4, 4, 1)).toThrow();
  });
});
