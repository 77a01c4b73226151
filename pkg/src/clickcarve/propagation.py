"""Greedy proposal-chaining propagation with keyframe re-initialization.

Each step picks the pool proposal that best overlaps the previous frame's
mask.  The chain is transparent and deterministic, which isolates the
initialization quality being measured; frames whose pools contain nothing
similar are flagged as drifted and carry the previous mask forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .masks import BinaryMask, iou
from .proposals import ProposalPool

DRIFT_FLOOR = 0.05


class PropagationError(ValueError):
    pass


@dataclass(frozen=True)
class TrackFrame:
    frame: int
    mask: BinaryMask
    proposal_id: int | None  # None when the mask was carried forward
    drifted: bool = False
    keyframe: bool = False


@dataclass
class VideoTrack:
    frames: dict[int, TrackFrame] = field(default_factory=dict)

    @property
    def keyframes(self) -> set[int]:
        return {f for f, tf in self.frames.items() if tf.keyframe}

    def mask_at(self, frame: int) -> BinaryMask:
        return self.frames[frame].mask


def _best_match(pool: ProposalPool, prev: BinaryMask):
    """Proposal maximizing IoU to `prev`; ties by objectness desc then id asc."""
    best = None
    for p in pool.proposals:
        key = (iou(p.mask, prev), p.objectness, -p.id)
        if best is None or key > best[0]:
            best = (key, p)
    return best[0][0], best[1]


def propagate_chain(
    pools: dict[int, ProposalPool],
    init: tuple[int, BinaryMask],
    direction: int = 1,
    floor: float = DRIFT_FLOOR,
    stop_at: int | None = None,
) -> list[TrackFrame]:
    """Chain the init mask frame by frame in `direction` (+1 or -1).

    Returns track frames for every frame strictly after the init frame up to
    the end of the pool range (or `stop_at`, exclusive).  A frame whose best
    pool match falls below `floor` IoU keeps the previous mask and is flagged
    drifted.
    """
    if direction not in (1, -1):
        raise PropagationError("direction must be +1 or -1")
    frame0, mask = init
    if frame0 in pools:
        p = pools[frame0]
        if p.width != mask.width or p.height != mask.height:
            raise PropagationError("init mask does not match pool dimensions")
    lo, hi = min(pools), max(pools)
    out = []
    t = frame0 + direction
    while lo <= t <= hi and (stop_at is None or t != stop_at):
        if t not in pools:
            raise PropagationError(f"missing pool for frame {t}")
        best_iou, best = _best_match(pools[t], mask)
        if best_iou < floor:
            out.append(TrackFrame(frame=t, mask=mask, proposal_id=None, drifted=True))
        else:
            mask = best.mask
            out.append(TrackFrame(frame=t, mask=mask, proposal_id=best.id))
        t += direction
    return out


def propagate_keyframed(
    pools: dict[int, ProposalPool],
    inits: list[tuple[int, BinaryMask]],
    floor: float = DRIFT_FLOOR,
) -> VideoTrack:
    """Fill the whole video from keyframe inits.

    Each span between consecutive keyframes is chained forward from the left
    keyframe; frames before the first keyframe are chained backward from it.
    Keyframe masks are never overwritten.
    """
    if not inits:
        raise PropagationError("at least one keyframe init is required")
    inits = sorted(inits, key=lambda fm: fm[0])
    track = VideoTrack()
    for frame, mask in inits:
        track.frames[frame] = TrackFrame(frame=frame, mask=mask, proposal_id=None, keyframe=True)

    first_frame = inits[0][0]
    for tf in propagate_chain(pools, inits[0], direction=-1, floor=floor):
        track.frames[tf.frame] = tf
    for i, (frame, mask) in enumerate(inits):
        stop = inits[i + 1][0] if i + 1 < len(inits) else None
        for tf in propagate_chain(pools, (frame, mask), direction=1, floor=floor, stop_at=stop):
            track.frames[tf.frame] = tf
    return track


def select_keyframes(frames: list[int], cadence: int) -> list[int]:
    """Every `cadence`-th frame starting from the first (the fixed
    pre-selection protocol; no human judgement involved)."""
    if cadence < 1:
        raise PropagationError("cadence must be >= 1")
    frames = sorted(frames)
    return frames[::cadence]
