/**
 * Run-length mask codec matching the service wire format: alternating run
 * lengths, the first run counting `start_value` pixels, row-major.
 */

export interface Rle {
  counts: number[];
  order: "row-major";
  start_value: 0 | 1;
}

export function decodeRle(rle: Rle, height: number, width: number): Uint8Array {
  const total = rle.counts.reduce((a, b) => a + b, 0);
  if (total !== height * width) {
    throw new Error(`rle counts sum to ${total}, expected ${height * width}`);
  }
  const mask = new Uint8Array(height * width);
  let pos = 0;
  let value = rle.start_value;
  for (const count of rle.counts) {
    if (count < 0) throw new Error("rle counts must be non-negative");
    if (value === 1) mask.fill(1, pos, pos + count);
    pos += count;
    value = value === 0 ? 1 : 0;
  }
  return mask;
}

/** RGBA overlay buffer for one mask (premultiplied color, alpha where set). */
export function maskToRgba(
  mask: Uint8Array,
  color: [number, number, number],
  alpha: number
): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(4 * mask.length);
  const a = Math.round(alpha * 255);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i] !== 0) {
      rgba[4 * i] = color[0];
      rgba[4 * i + 1] = color[1];
      rgba[4 * i + 2] = color[2];
      rgba[4 * i + 3] = a;
    }
  }
  return rgba;
}

/** Throws if any two masks claim the same pixel. */
export function assertDisjoint(masks: Map<number, Uint8Array>): void {
  let claimed: Uint8Array | null = null;
  for (const [id, mask] of masks) {
    if (claimed === null) {
      claimed = mask.slice();
      continue;
    }
    for (let i = 0; i < mask.length; i++) {
      if (mask[i] !== 0) {
        if (claimed[i] !== 0) {
          throw new Error(`instance ${id} overlaps another region at pixel ${i}`);
        }
        claimed[i] = 1;
      }
    }
  }
}
