"""Dataset catalog over the on-disk layout.

    data_root/
      <video>/
        frames/<NNNNN>.png       rendered frame images (PNG or JPEG)
        proposals/<NNNNN>.json   one pool manifest per frame
        gt/<NNNNN>.png           binary ground-truth masks (nonzero = fg)

Frame numbers are zero-padded to five digits.  Ground truth may be sparse;
frames and proposals must cover the same frame set per video.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .masks import BinaryMask
from .proposals import ProposalPool, ingest_pool

FRAME_DIGITS = 5


class CatalogError(ValueError):
    pass


def frame_name(frame: int) -> str:
    return f"{frame:0{FRAME_DIGITS}d}"


def load_mask_png(path: Path) -> BinaryMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return BinaryMask(arr > 0)


def save_mask_png(mask: BinaryMask, path: Path) -> None:
    Image.fromarray(mask.pixels.astype(np.uint8) * 255).save(path)


@dataclass
class VideoEntry:
    name: str
    path: Path
    frames: list[int]
    gt_frames: list[int]


@dataclass
class Catalog:
    root: Path
    videos: dict[str, VideoEntry] = field(default_factory=dict)
    _pool_cache: dict[tuple[str, int], ProposalPool] = field(default_factory=dict)

    def video(self, name: str) -> VideoEntry:
        try:
            return self.videos[name]
        except KeyError:
            raise CatalogError(f"unknown video {name!r}") from None

    def frame_path(self, video: str, frame: int) -> Path:
        v = self.video(video)
        if frame not in v.frames:
            raise CatalogError(f"video {video!r} has no frame {frame}")
        for ext in ("png", "jpg", "jpeg"):
            p = v.path / "frames" / f"{frame_name(frame)}.{ext}"
            if p.exists():
                return p
        raise CatalogError(f"frame image missing for {video!r}:{frame}")

    def load_pool(self, video: str, frame: int) -> ProposalPool:
        key = (video, frame)
        if key not in self._pool_cache:
            v = self.video(video)
            if frame not in v.frames:
                raise CatalogError(f"video {video!r} has no frame {frame}")
            self._pool_cache[key] = ingest_pool(
                v.path / "proposals" / f"{frame_name(frame)}.json"
            )
        return self._pool_cache[key]

    def load_gt(self, video: str, frame: int) -> BinaryMask:
        v = self.video(video)
        p = v.path / "gt" / f"{frame_name(frame)}.png"
        if not p.exists():
            raise CatalogError(f"no ground truth for {video!r}:{frame}")
        return load_mask_png(p)

    def pools_for(self, video: str) -> dict[int, ProposalPool]:
        return {f: self.load_pool(video, f) for f in self.video(video).frames}


def _frame_numbers(directory: Path, suffixes) -> list[int]:
    out = set()
    if directory.is_dir():
        for p in directory.iterdir():
            if p.suffix.lower() in suffixes and p.stem.isdigit():
                out.add(int(p.stem))
    return sorted(out)


def load_catalog(root: Path | str) -> Catalog:
    """Scan and validate a data root; raises on structural problems."""
    root = Path(root)
    if not root.is_dir():
        raise CatalogError(f"data root {root} is not a directory")
    cat = Catalog(root=root)
    for vdir in sorted(p for p in root.iterdir() if p.is_dir()):
        frames = _frame_numbers(vdir / "proposals", {".json"})
        if not frames:
            continue
        images = _frame_numbers(vdir / "frames", {".png", ".jpg", ".jpeg"})
        if images and set(images) != set(frames):
            raise CatalogError(
                f"video {vdir.name!r}: frame images {images} do not match "
                f"proposal manifests {frames}"
            )
        gt = _frame_numbers(vdir / "gt", {".png"})
        extra_gt = set(gt) - set(frames)
        if extra_gt:
            raise CatalogError(
                f"video {vdir.name!r}: ground truth for unknown frames {sorted(extra_gt)}"
            )
        cat.videos[vdir.name] = VideoEntry(
            name=vdir.name, path=vdir, frames=frames, gt_frames=gt
        )
    if not cat.videos:
        raise CatalogError(f"no videos found under {root}")
    return cat
