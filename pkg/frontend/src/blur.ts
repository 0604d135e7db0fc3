/**
 * Separable Gaussian blur over RGBA pixel data. The kernel is capped at the
 * experiment's fixed aperture; sigma varies per frame while the logged
 * sigma stays the analytic alpha*t value, so the kernel here is purely a
 * rendering concern.
 */

export const DEFAULT_APERTURE_PX = 15;

/** Normalized 1-D Gaussian taps, length <= aperture (odd). */
export function gaussianKernel(sigma: number, aperturePx: number = DEFAULT_APERTURE_PX): Float32Array {
  const maxRadius = Math.max(0, Math.floor((aperturePx - 1) / 2));
  if (sigma <= 0) return Float32Array.of(1);
  const radius = Math.min(maxRadius, Math.max(1, Math.ceil(3 * sigma)));
  const k = new Float32Array(2 * radius + 1);
  const inv = 1 / (2 * sigma * sigma);
  let sum = 0;
  for (let i = -radius; i <= radius; i++) {
    const w = Math.exp(-i * i * inv);
    k[i + radius] = w;
    sum += w;
  }
  for (let i = 0; i < k.length; i++) k[i] /= sum;
  return k;
}

function convolveAxis(
  src: Uint8ClampedArray,
  dst: Uint8ClampedArray,
  w: number,
  h: number,
  kernel: Float32Array,
  horizontal: boolean,
): void {
  const radius = (kernel.length - 1) / 2;
  const limit = horizontal ? w : h;
  for (let y = 0; y < h; y++) {
    for (let x = 0; x < w; x++) {
      let r = 0, g = 0, b = 0, a = 0;
      const along = horizontal ? x : y;
      for (let i = -radius; i <= radius; i++) {
        let p = along + i;
        if (p < 0) p = 0;
        else if (p >= limit) p = limit - 1;
        const idx = horizontal ? (y * w + p) * 4 : (p * w + x) * 4;
        const wk = kernel[i + radius];
        r += src[idx] * wk;
        g += src[idx + 1] * wk;
        b += src[idx + 2] * wk;
        a += src[idx + 3] * wk;
      }
      const o = (y * w + x) * 4;
      dst[o] = r;
      dst[o + 1] = g;
      dst[o + 2] = b;
      dst[o + 3] = a;
    }
  }
}

/** Blur RGBA pixels; sigma <= 0 returns an untouched copy. */
export function blurRgba(
  src: Uint8ClampedArray,
  w: number,
  h: number,
  sigma: number,
  aperturePx: number = DEFAULT_APERTURE_PX,
): Uint8ClampedArray {
  if (src.length !== w * h * 4) throw new Error("pixel buffer does not match dimensions");
  if (sigma <= 0) return src.slice();
  const kernel = gaussianKernel(sigma, aperturePx);
  const tmp = new Uint8ClampedArray(src.length);
  const out = new Uint8ClampedArray(src.length);
  convolveAxis(src, tmp, w, h, kernel, true);
  convolveAxis(tmp, out, w, h, kernel, false);
  return out;
}

/** Blur a canvas 2D context in place. */
export function blurCanvas(ctx: CanvasRenderingContext2D, sigma: number, aperturePx = DEFAULT_APERTURE_PX): void {
  if (sigma <= 0) return;
  const { width, height } = ctx.canvas;
  const img = ctx.getImageData(0, 0, width, height);
  const out = blurRgba(img.data, width, height, sigma, aperturePx);
  img.data.set(out);
  ctx.putImageData(img, 0, 0);
}
