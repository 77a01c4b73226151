/**
 * Thin canvas rendering over the controller state.
 *
 * Everything here draws onto a 2D context passed in by the page; no state
 * is kept, so render(state) after any server response repaints the truth.
 */

import { SessionState } from "./api.js";
import { imageToDisplay } from "./coords.js";

export const CLICK_MARKER_RADIUS = 4;
export const CLICK_MARKER_COLOR = "#e02020";

/** Minimal slice of CanvasRenderingContext2D we actually use (testable). */
export interface Context2DLike {
  drawImage(image: CanvasImageSource, dx: number, dy: number, dw: number, dh: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
}

export function drawFrame(
  ctx: Context2DLike,
  image: CanvasImageSource,
  state: SessionState,
  scale: number,
): void {
  ctx.drawImage(image, 0, 0, state.width * scale, state.height * scale);
}

/** Red dots at every recorded click, in display coordinates. */
export function drawClickMarkers(
  ctx: Context2DLike,
  state: SessionState,
  scale: number,
): void {
  ctx.fillStyle = CLICK_MARKER_COLOR;
  for (const [x, y] of state.clicks) {
    const p = imageToDisplay(x, y, scale);
    ctx.beginPath();
    ctx.arc(p.x, p.y, CLICK_MARKER_RADIUS, 0, 2 * Math.PI);
    ctx.fill();
  }
}

export interface GalleryTile {
  proposalId: number;
  votes: number;
  thumbnailUrl: string;
  selected: boolean;
}

/** 3x3 gallery model for the top-k overlay grid (k = 9 fills the screen). */
export function galleryTiles(
  state: SessionState,
  selectedId: number | null,
): GalleryTile[] {
  return state.topk.map((t) => ({
    proposalId: t.id,
    votes: t.votes,
    thumbnailUrl: t.thumbnail_url,
    selected: t.id === selectedId,
  }));
}

/** Heat-map image URL with a cache-buster so each click repaints it. */
export function heatmapUrl(state: SessionState): string {
  return `${state.heatmap_url}?v=${state.clicks_used}`;
}
