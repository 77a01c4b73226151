"""Proposal pools: ingestion, validation, synthesis, and the pixel->proposal index.

A pool holds every candidate mask for one frame together with a sparse
inverted index mapping each pixel to the proposals whose dilated contour
covers it.  A click therefore costs one index lookup instead of a scan over
the full pixel x proposal membership table.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .masks import (
    BinaryMask,
    ContourMask,
    MaskError,
    contour_mask,
    dilate,
    erode,
    iou,
    rle_decode,
    rle_encode,
)

SOURCES = ("static", "motion", "synthetic")

DEFAULT_DILATION_RADIUS = 5


class PoolError(ValueError):
    """Invalid manifest, proposal, or pool input."""


@dataclass(frozen=True, eq=False)
class Proposal:
    """One segmentation hypothesis: mask, click-tolerance contour band,
    objectness score, and a vote counter (always 0 at construction; live
    counts are kept per interactive session)."""

    id: int
    mask: BinaryMask
    contour: ContourMask
    objectness: float
    source: str
    votes: int = 0
    iou_to_gt: float | None = None  # set by synthesize_pool for test assertions


class InvertedIndex:
    """Sparse pixel -> sorted proposal-id lists, stored CSR-style.

    Entries are sorted by (flat pixel index, proposal id); lookups use binary
    search, so concurrent readers are safe.
    """

    def __init__(self, pixels: np.ndarray, ids: np.ndarray, n_pixels: int):
        order = np.lexsort((ids, pixels))
        self._pixels = np.ascontiguousarray(pixels[order])
        self._ids = np.ascontiguousarray(ids[order])
        self.n_pixels = n_pixels

    def ids_at_flat(self, i: int) -> np.ndarray:
        lo = np.searchsorted(self._pixels, i, side="left")
        hi = np.searchsorted(self._pixels, i, side="right")
        return self._ids[lo:hi]

    def ids_at(self, x: int, y: int, width: int) -> np.ndarray:
        return self.ids_at_flat(y * width + x)

    def __len__(self):
        return len(self._ids)


@dataclass(eq=False)
class ProposalPool:
    """All proposals for one frame plus the inverted click index."""

    frame_id: str
    width: int
    height: int
    proposals: list[Proposal]
    dilation_radius: int = DEFAULT_DILATION_RADIUS
    index: InvertedIndex = field(init=False)

    def __post_init__(self):
        if not self.proposals:
            raise PoolError("pool must contain at least one proposal")
        seen = set()
        for p in self.proposals:
            if p.mask.width != self.width or p.mask.height != self.height:
                raise PoolError(
                    f"proposal {p.id}: mask {p.mask.width}x{p.mask.height} "
                    f"does not match pool {self.width}x{self.height}"
                )
            if p.id in seen:
                raise PoolError(f"duplicate proposal id {p.id}")
            seen.add(p.id)
        self.index = build_index(self)

    def __len__(self):
        return len(self.proposals)

    def by_id(self, pid: int) -> Proposal:
        for p in self.proposals:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def ids_at_click(self, x: int, y: int) -> np.ndarray:
        return self.index.ids_at(x, y, self.width)


def build_index(pool: ProposalPool) -> InvertedIndex:
    """Index pixel i -> ids of proposals whose dilated contour covers i."""
    pixel_chunks = []
    id_chunks = []
    for p in pool.proposals:
        flat = np.flatnonzero(p.contour.base.pixels)
        pixel_chunks.append(flat)
        id_chunks.append(np.full(len(flat), p.id, dtype=np.int64))
    pixels = np.concatenate(pixel_chunks) if pixel_chunks else np.empty(0, np.int64)
    ids = np.concatenate(id_chunks) if id_chunks else np.empty(0, np.int64)
    return InvertedIndex(pixels, ids, pool.width * pool.height)


# ---------------------------------------------------------------------------
# Manifest ingestion. One JSON document per frame; schema in docs/formats.md.
# ---------------------------------------------------------------------------


def _decode_entry(entry: dict, width: int, height: int, radius: int) -> Proposal:
    pid = entry["id"]
    try:
        raw = base64.b64decode(entry["rle"])
        mask = rle_decode(raw, width, height)
    except (MaskError, ValueError, KeyError) as exc:
        raise PoolError(f"proposal {pid}: malformed RLE ({exc})") from exc
    source = entry.get("source", "static")
    if source not in SOURCES:
        raise PoolError(f"proposal {pid}: unknown source {source!r}")
    return Proposal(
        id=int(pid),
        mask=mask,
        contour=contour_mask(mask, radius),
        objectness=float(entry["objectness"]),
        source=source,
    )


def ingest_pool(manifest_path: str | Path) -> ProposalPool:
    """Load and validate a frame manifest into a pool with its index built.

    Proposals are ordered static first, then motion, then synthetic, keeping
    manifest order within each source.  Duplicate masks across sources are
    kept: the pool is a multiset union.  Objectness scores falling outside
    [0,1] are min-max normalized over the pool.
    """
    path = Path(manifest_path)
    doc = json.loads(path.read_text())
    return pool_from_manifest(doc, frame_id=doc.get("frame_id", path.stem))


def pool_from_manifest(doc: dict, frame_id: str | None = None) -> ProposalPool:
    width, height = int(doc["width"]), int(doc["height"])
    radius = int(doc.get("dilation_radius", DEFAULT_DILATION_RADIUS))
    entries = doc["proposals"]
    if not entries:
        raise PoolError("manifest contains no proposals")

    scores = [float(e["objectness"]) for e in entries]
    lo, hi = min(scores), max(scores)
    normalize = lo < 0.0 or hi > 1.0

    order = {src: i for i, src in enumerate(SOURCES)}
    ranked = sorted(
        range(len(entries)), key=lambda i: (order.get(entries[i].get("source", "static"), 0), i)
    )
    proposals = []
    for i in ranked:
        entry = dict(entries[i])
        if normalize:
            s = float(entry["objectness"])
            entry["objectness"] = (s - lo) / (hi - lo) if hi > lo else 0.5
        proposals.append(_decode_entry(entry, width, height, radius))
    return ProposalPool(
        frame_id=frame_id or str(doc.get("frame_id", "frame")),
        width=width,
        height=height,
        proposals=proposals,
        dilation_radius=radius,
    )


def pool_to_manifest(pool: ProposalPool, image: str | None = None) -> dict:
    doc = {
        "frame_id": pool.frame_id,
        "width": pool.width,
        "height": pool.height,
        "dilation_radius": pool.dilation_radius,
        "proposals": [
            {
                "id": p.id,
                "rle": base64.b64encode(rle_encode(p.mask)).decode("ascii"),
                "objectness": round(p.objectness, 9),
                "source": p.source,
            }
            for p in pool.proposals
        ],
    }
    if image is not None:
        doc["image"] = image
    return doc


# ---------------------------------------------------------------------------
# Synthetic pools: deterministic generator used by tests, benchmarks, demos.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    near: int = 5  # morphological perturbations of the ground truth
    partial: int = 5  # ground truth minus a random blob
    distractor: int = 90  # random blobs elsewhere in the frame
    perturb_radius: int = 2  # max dilate/erode radius for near-duplicates
    # objectness = iou_weight * iou_to_gt + (1 - iou_weight) * uniform noise,
    # deliberately NOT perfectly correlated with quality
    iou_weight: float = 0.15


def _random_blob(rng, width, height, r_lo, r_hi) -> BinaryMask:
    cx = rng.uniform(0, width)
    cy = rng.uniform(0, height)
    rx = rng.uniform(r_lo, r_hi)
    ry = rng.uniform(r_lo, r_hi)
    theta = rng.uniform(0, np.pi)
    ys, xs = np.mgrid[0:height, 0:width]
    u = (xs - cx) * np.cos(theta) + (ys - cy) * np.sin(theta)
    v = -(xs - cx) * np.sin(theta) + (ys - cy) * np.cos(theta)
    return BinaryMask((u / rx) ** 2 + (v / ry) ** 2 <= 1.0)


def synthesize_pool(
    gt: BinaryMask,
    config: SynthConfig,
    seed: int,
    frame_id: str = "synthetic",
    dilation_radius: int = DEFAULT_DILATION_RADIUS,
) -> ProposalPool:
    """Deterministic test pool built around a ground-truth mask.

    Proposals are ordered near-duplicates, partials, distractors with ids
    0..m-1; each carries its IoU to the ground truth.  Distractors are
    re-drawn until their IoU to the ground truth stays below 0.45 so
    distractor-only pools never contain an accidental good hypothesis.
    """
    if gt.is_empty:
        raise PoolError("ground truth mask is empty")
    if config.near + config.partial + config.distractor <= 0:
        raise PoolError("synth config must request at least one proposal")

    rng = np.random.default_rng(seed)
    w, h = gt.width, gt.height
    ys, xs = np.nonzero(gt.pixels)
    extent = max(xs.max() - xs.min() + 1, ys.max() - ys.min() + 1)

    masks: list[BinaryMask] = []
    for i in range(config.near):
        r = int(rng.integers(0, config.perturb_radius + 1))
        op = rng.integers(0, 2)
        m = dilate(gt, r) if op == 0 else erode(gt, r)
        if m.is_empty:  # erosion wiped a thin shape; fall back to the gt
            m = gt
        masks.append(m)
    for i in range(config.partial):
        for _ in range(50):
            j = rng.integers(0, len(xs))
            blob_r = rng.uniform(extent / 6, extent / 3)
            ygrid, xgrid = np.mgrid[0:h, 0:w]
            blob = np.maximum(np.abs(xgrid - xs[j]), np.abs(ygrid - ys[j])) <= blob_r
            m = BinaryMask(gt.pixels & ~blob)
            if not m.is_empty and m != gt:
                break
        else:
            m = gt
        masks.append(m)
    for i in range(config.distractor):
        for _ in range(100):
            m = _random_blob(rng, w, h, max(2.0, extent / 8), max(3.0, extent * 0.7))
            if not m.is_empty and iou(m, gt) < 0.45:
                break
        else:
            raise PoolError("could not place a distractor below the IoU cap")
        masks.append(m)

    proposals = []
    for pid, m in enumerate(masks):
        q = iou(m, gt)
        score = config.iou_weight * q + (1 - config.iou_weight) * rng.uniform()
        proposals.append(
            Proposal(
                id=pid,
                mask=m,
                contour=contour_mask(m, dilation_radius),
                objectness=float(np.clip(score, 0.0, 1.0)),
                source="synthetic",
                iou_to_gt=q,
            )
        )
    return ProposalPool(
        frame_id=frame_id,
        width=w,
        height=h,
        proposals=proposals,
        dilation_radius=dilation_radius,
    )


def mabo(pools: dict, gts: dict) -> float:
    """Mean over frames of the best proposal-to-ground-truth IoU (pool recall ceiling)."""
    if not gts:
        raise PoolError("no ground-truth frames given")
    best = []
    for frame, gt in gts.items():
        if frame not in pools:
            raise PoolError(f"missing pool for ground-truth frame {frame!r}")
        pool = pools[frame]
        best.append(max(iou(p.mask, gt) for p in pool.proposals))
    return float(np.mean(best))
