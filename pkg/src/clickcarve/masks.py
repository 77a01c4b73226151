"""Binary mask primitives: IoU, boundaries, dilation, contour tracing, shape PCA, RLE.

Everything downstream (proposal pools, the carving engine, simulated users,
propagation) is built on the types and pure functions in this module.  Masks
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


class MaskError(ValueError):
    """Invalid mask construction or mask-operation input."""


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Rectangular bit grid; ``pixels`` is a read-only bool array of shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.pixels, dtype=bool))
        if p.ndim != 2:
            raise MaskError(f"mask must be 2-D, got shape {p.shape}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise MaskError(f"mask dimensions must be >= 1, got {p.shape}")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def area(self) -> int:
        return int(self.pixels.sum())

    @property
    def is_empty(self) -> bool:
        return not self.pixels.any()

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    def contains(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.pixels[y, x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, area={self.area})"


@dataclass(frozen=True, eq=False)
class ContourMask:
    """Dilated boundary of a source mask; the vote-eligibility region for clicks."""

    base: BinaryMask
    radius: int = 5


@dataclass(frozen=True)
class TracedContour:
    """Closed 8-connected boundary walk, clockwise, as ordered (x, y) points."""

    points: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class PrincipalAxis:
    centroid: tuple[float, float]
    direction: tuple[float, float]
    isotropic: bool = False


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection-over-union of two same-sized masks.

    Two empty masks agree perfectly and score 1.0 (keeps dataset-wide averages
    well defined on frames where the object is absent).
    """
    if a.pixels.shape != b.pixels.shape:
        raise MaskError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = np.count_nonzero(a.pixels & b.pixels)
    union = np.count_nonzero(a.pixels | b.pixels)
    if union == 0:
        return 1.0
    return inter / union


def boundary_pixels(m: BinaryMask) -> BinaryMask:
    """Foreground pixels with at least one 4-neighbor that is background or off-image."""
    p = m.pixels
    padded = np.zeros((m.height + 2, m.width + 2), dtype=bool)
    padded[1:-1, 1:-1] = p
    interior = (
        padded[:-2, 1:-1]  # north
        & padded[2:, 1:-1]  # south
        & padded[1:-1, :-2]  # west
        & padded[1:-1, 2:]  # east
    )
    return BinaryMask(p & ~interior)


def dilate(m: BinaryMask, radius: int) -> BinaryMask:
    """Dilate by Chebyshev radius: pixel set iff a set pixel lies within `radius` (square SE)."""
    if radius < 0:
        raise MaskError("dilation radius must be >= 0")
    if radius == 0:
        return m
    size = 2 * radius + 1
    out = ndimage.maximum_filter(m.pixels, size=size, mode="constant", cval=False)
    return BinaryMask(out)


def erode(m: BinaryMask, radius: int) -> BinaryMask:
    """Chebyshev erosion; image border counts as background."""
    if radius < 0:
        raise MaskError("erosion radius must be >= 0")
    if radius == 0:
        return m
    size = 2 * radius + 1
    out = ndimage.minimum_filter(m.pixels, size=size, mode="constant", cval=False)
    return BinaryMask(out)


def contour_mask(m: BinaryMask, radius: int = 5) -> ContourMask:
    """Boundary pixels of `m` dilated by `radius` (the click-tolerance band)."""
    return ContourMask(base=dilate(boundary_pixels(m), radius), radius=radius)


_EIGHT_CONN = np.ones((3, 3), dtype=bool)

# Clockwise Moore neighborhood (x right, y down), starting west.
_MOORE = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]


def largest_component(m: BinaryMask) -> BinaryMask:
    """Largest 8-connected component; size ties go to the one whose first pixel
    comes earliest in row-major order."""
    if m.is_empty:
        raise MaskError("mask has no foreground")
    labels, n = ndimage.label(m.pixels, structure=_EIGHT_CONN)
    if n == 1:
        return m
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    best = counts.max()
    # first label reaching the max size in raster order of first occurrence
    candidates = np.flatnonzero(counts == best)
    flat = labels.ravel()
    first_idx = {lab: np.argmax(flat == lab) for lab in candidates}
    chosen = min(candidates, key=lambda lab: first_idx[lab])
    return BinaryMask(labels == chosen)


def trace_contour(m: BinaryMask) -> TracedContour:
    """Clockwise Moore trace of the outer boundary of the largest component.

    The cycle is rotated so it starts at the lexicographically smallest (x, y)
    boundary point; consecutive points are 8-adjacent.
    """
    comp = largest_component(m)
    p = comp.pixels
    h, w = p.shape
    ys, xs = np.nonzero(p)
    # topmost-leftmost pixel, guaranteed on the outer boundary
    i0 = np.lexsort((xs, ys))[0]
    start = (int(xs[i0]), int(ys[i0]))

    def fg(pt):
        x, y = pt
        return 0 <= x < w and 0 <= y < h and p[y, x]

    points = [start]
    # backtrack starts west of the start pixel (background by construction)
    cur = start
    back = (start[0] - 1, start[1])
    first_move = None
    while True:
        bx, by = back[0] - cur[0], back[1] - cur[1]
        k0 = _MOORE.index((bx, by))
        nxt = None
        for step in range(1, 9):
            dx, dy = _MOORE[(k0 + step) % 8]
            cand = (cur[0] + dx, cur[1] + dy)
            if fg(cand):
                nxt = cand
                back = (cur[0] + _MOORE[(k0 + step - 1) % 8][0],
                        cur[1] + _MOORE[(k0 + step - 1) % 8][1])
                break
        if nxt is None:
            break  # isolated pixel
        move = (cur, nxt)
        if first_move is None:
            first_move = move
        elif move == first_move:
            break
        cur = nxt
        points.append(cur)
        if len(points) > 4 * w * h:  # safety net, never expected
            raise MaskError("contour trace failed to close")

    # drop the duplicated closing point if present
    if len(points) > 1 and points[-1] == points[0]:
        points = points[:-1]
    # rotate to canonical start: lexicographically smallest (x, y)
    pivot = min(range(len(points)), key=lambda i: points[i])
    points = points[pivot:] + points[:pivot]
    return TracedContour(points=tuple(points))


def shape_principal_axis(m: BinaryMask, tie_rtol: float = 1e-9) -> PrincipalAxis:
    """Centroid and axis of maximum shape variation over all foreground pixels.

    The direction is the leading eigenvector of the 2x2 coordinate covariance,
    sign-normalized so x >= 0 (tie: y >= 0).  Isotropic shapes (equal
    eigenvalues) return (1, 0) with the tie flagged.
    """
    ys, xs = np.nonzero(m.pixels)
    if len(xs) < 2:
        raise MaskError("principal axis requires >= 2 foreground pixels")
    coords = np.stack([xs, ys]).astype(float)
    centroid = coords.mean(axis=1)
    cov = np.cov(coords)
    evals, evecs = np.linalg.eigh(cov)  # ascending
    spread = max(abs(evals[0]), abs(evals[1]), 1.0)
    if abs(evals[1] - evals[0]) <= tie_rtol * spread:
        return PrincipalAxis(centroid=(centroid[0], centroid[1]),
                             direction=(1.0, 0.0), isotropic=True)
    v = evecs[:, 1]
    if v[0] < 0 or (abs(v[0]) < 1e-12 and v[1] < 0):
        v = -v
    return PrincipalAxis(centroid=(centroid[0], centroid[1]),
                         direction=(float(v[0]), float(v[1])), isotropic=False)


# ---------------------------------------------------------------------------
# Run-length encoding: column-major unsigned-varint runs, background first.
# Documented in docs/formats.md; external tools can produce pools directly.
# ---------------------------------------------------------------------------


def _write_varint(value: int, out: bytearray) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise MaskError("truncated varint in RLE stream")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7


def rle_encode(m: BinaryMask) -> bytes:
    """Encode column-major runs; the first run counts background pixels (may be 0)."""
    flat = m.pixels.flatten(order="F")
    out = bytearray()
    if flat.size == 0:
        return bytes(out)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds)
    if flat[0]:  # must start with a background run
        _write_varint(0, out)
    for r in runs:
        _write_varint(int(r), out)
    return bytes(out)


def rle_decode(data: bytes, width: int, height: int) -> BinaryMask:
    """Decode the column-major varint RLE; run lengths must sum to width*height."""
    total = width * height
    runs = []
    pos = 0
    while pos < len(data):
        run, pos = _read_varint(data, pos)
        runs.append(run)
    if sum(runs) != total:
        raise MaskError(
            f"RLE run sum {sum(runs)} does not match {width}x{height}={total}"
        )
    flat = np.zeros(total, dtype=bool)
    offset = 0
    value = False
    for run in runs:
        if value:
            flat[offset : offset + run] = True
        offset += run
        value = not value
    return BinaryMask(flat.reshape((height, width), order="F"))
