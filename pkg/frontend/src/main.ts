/**
 * Page wiring: frame canvas + click capture, 3x3 proposal gallery,
 * heat-map toggle, undo / accept / next-object controls.
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import {
  drawClickMarkers,
  drawFrame,
  galleryTiles,
  heatmapUrl,
} from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function loadImage(url: string): Promise<HTMLImageElement> {
  const img = new Image();
  img.src = url;
  await img.decode();
  return img;
}

export async function boot(baseUrl: string, scale = 1): Promise<void> {
  const api = new ApiClient(baseUrl);
  const ui = new SessionController(api, scale);

  const canvas = el<HTMLCanvasElement>("frame");
  const gallery = el<HTMLDivElement>("gallery");
  const status = el<HTMLDivElement>("status");
  const heatToggle = el<HTMLInputElement>("heatmap-toggle");

  let frameImage: HTMLImageElement | null = null;
  let heatImage: HTMLImageElement | null = null;
  let selectedId: number | null = null;

  async function repaint() {
    const s = ui.state;
    if (!s || !frameImage) return;
    canvas.width = s.width * ui.scale;
    canvas.height = s.height * ui.scale;
    const ctx = canvas.getContext("2d")!;
    drawFrame(ctx, frameImage, s, ui.scale);
    if (heatToggle.checked) {
      heatImage = await loadImage(baseUrl + heatmapUrl(s));
      ctx.globalAlpha = 0.6;
      drawFrame(ctx, heatImage, s, ui.scale);
      ctx.globalAlpha = 1.0;
    }
    drawClickMarkers(ctx, s, ui.scale);

    gallery.replaceChildren(
      ...galleryTiles(s, selectedId).map((tile) => {
        const img = document.createElement("img");
        img.src = baseUrl + tile.thumbnailUrl;
        img.title = `#${tile.proposalId} — ${tile.votes} votes`;
        img.className = tile.selected ? "tile selected" : "tile";
        img.onclick = () => {
          selectedId = tile.proposalId;
          void repaint();
        };
        return img;
      }),
    );
    status.textContent = ui.active
      ? `${s.clicks_used}/${s.budget} clicks`
      : "accepted — start the next object";
  }

  canvas.addEventListener("click", async (ev) => {
    if (!ui.active) return;
    const rect = canvas.getBoundingClientRect();
    try {
      await ui.clickAtDisplay(ev.clientX - rect.left, ev.clientY - rect.top);
    } catch (e) {
      status.textContent = String(e);
      return;
    }
    await repaint();
  });

  el<HTMLButtonElement>("undo").onclick = async () => {
    try {
      await ui.undo();
      await repaint();
    } catch (e) {
      status.textContent = String(e);
    }
  };

  el<HTMLButtonElement>("accept").onclick = async () => {
    if (selectedId === null) {
      status.textContent = "pick a tile first";
      return;
    }
    try {
      const result = await ui.accept(selectedId);
      status.textContent = `accepted proposal ${result.proposal_id}`;
    } catch (e) {
      status.textContent = String(e);
    }
  };

  el<HTMLButtonElement>("start").onclick = async () => {
    const video = el<HTMLInputElement>("video").value;
    const frame = Number(el<HTMLInputElement>("frame-number").value);
    selectedId = null;
    await ui.start(video, frame);
    frameImage = await loadImage(api.frameUrl(video, frame));
    await repaint();
  };

  heatToggle.onchange = () => void repaint();
}
