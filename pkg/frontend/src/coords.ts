/**
 * Display <-> image coordinate conversion.
 *
 * The wire protocol is always in original-image pixels; the client owns the
 * display scale. Conversion must round-trip within half a pixel for any
 * scale we render at.
 */

export interface Point {
  x: number;
  y: number;
}

/** Convert a click position on the scaled canvas to original-image pixels. */
export function displayToImage(cx: number, cy: number, scale: number): Point {
  if (!(scale > 0)) {
    throw new RangeError(`display scale must be positive, got ${scale}`);
  }
  return { x: Math.round(cx / scale), y: Math.round(cy / scale) };
}

/** Convert original-image pixels to the scaled canvas position. */
export function imageToDisplay(x: number, y: number, scale: number): Point {
  if (!(scale > 0)) {
    throw new RangeError(`display scale must be positive, got ${scale}`);
  }
  return { x: x * scale, y: y * scale };
}

/** Clamp an image-space point into frame bounds (edge clicks stay valid). */
export function clampToFrame(p: Point, width: number, height: number): Point {
  return {
    x: Math.min(Math.max(p.x, 0), width - 1),
    y: Math.min(Math.max(p.y, 0), height - 1),
  };
}
