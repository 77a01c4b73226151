"""Tests for greedy proposal-chaining propagation."""

import numpy as np
import pytest

from clickcarve.masks import BinaryMask, contour_mask, iou
from clickcarve.propagation import (
    DRIFT_FLOOR,
    PropagationError,
    TrackFrame,
    VideoTrack,
    propagate_chain,
    propagate_keyframed,
    select_keyframes,
)
from clickcarve.proposals import Proposal, ProposalPool

from .test_masks import rect_mask

W, H = 64, 48


def make_pool(frame_id, masks, objectness=None, width=W, height=H, radius=2):
    if objectness is None:
        objectness = [0.5] * len(masks)
    props = [
        Proposal(
            id=i,
            mask=m,
            contour=contour_mask(m, radius=radius),
            objectness=o,
            source="synthetic",
        )
        for i, (m, o) in enumerate(zip(masks, objectness))
    ]
    return ProposalPool(frame_id=frame_id, width=width, height=height,
                        proposals=props, dilation_radius=radius)


def moving_square(frame, x0=4, y0=10, size=12, dx=1):
    return rect_mask(W, H, x0 + dx * frame, y0, size, size)


def moving_pools(n_frames, distractor=True):
    pools = {}
    for t in range(n_frames):
        masks = [moving_square(t)]
        obj = [0.6]
        if distractor:
            masks.append(rect_mask(W, H, 50, 36, 8, 8))
            obj.append(0.9)
        pools[t] = make_pool(f"f{t}", masks, obj)
    return pools


class TestChain:
    def test_identity_chain(self):
        # Every pool contains the init mask exactly -> IoU 1.0 all the way.
        m = rect_mask(W, H, 10, 10, 16, 16)
        pools = {t: make_pool(f"f{t}", [m, rect_mask(W, H, 40, 30, 6, 6)],
                              [0.2, 0.9]) for t in range(5)}
        out = propagate_chain(pools, (0, m))
        assert [tf.frame for tf in out] == [1, 2, 3, 4]
        for tf in out:
            assert iou(tf.mask, m) == 1.0
            assert tf.proposal_id == 0
            assert not tf.drifted

    def test_translating_square(self):
        pools = moving_pools(20)
        out = propagate_chain(pools, (0, moving_square(0)))
        for tf in out:
            assert iou(tf.mask, moving_square(tf.frame)) == 1.0

    def test_backward_direction(self):
        pools = moving_pools(10)
        out = propagate_chain(pools, (9, moving_square(9)), direction=-1)
        assert [tf.frame for tf in out] == list(range(8, -1, -1))
        for tf in out:
            assert iou(tf.mask, moving_square(tf.frame)) == 1.0

    def test_tie_broken_by_objectness_then_id(self):
        m = rect_mask(W, H, 10, 10, 16, 16)
        pools = {
            0: make_pool("f0", [m], [0.5]),
            1: make_pool("f1", [m, m, m], [0.3, 0.8, 0.8]),
        }
        out = propagate_chain(pools, (0, m))
        assert out[0].proposal_id == 1  # highest objectness, lowest id on tie

    def test_drift_carries_mask(self):
        m = rect_mask(W, H, 10, 10, 16, 16)
        far = rect_mask(W, H, 50, 36, 6, 6)
        pools = {
            0: make_pool("f0", [m]),
            1: make_pool("f1", [far]),  # nothing overlaps -> drift
            2: make_pool("f2", [m, far], [0.5, 0.5]),
        }
        out = propagate_chain(pools, (0, m))
        assert out[0].drifted and out[0].proposal_id is None
        assert iou(out[0].mask, m) == 1.0  # carried forward
        assert not out[1].drifted and out[1].proposal_id == 0

    def test_floor_boundary(self):
        # Overlap exactly at the floor is accepted; just below is not.
        prev = rect_mask(W, H, 0, 0, 10, 10)
        # 20-pixel candidate sharing 1 pixel: IoU = 1/119
        cand = rect_mask(W, H, 9, 9, 20, 1)
        pools = {0: make_pool("f0", [prev]), 1: make_pool("f1", [cand])}
        val = iou(cand, prev)
        accepted = propagate_chain(pools, (0, prev), floor=val)
        assert accepted[0].proposal_id == 0
        rejected = propagate_chain(pools, (0, prev), floor=val + 1e-9)
        assert rejected[0].drifted

    def test_missing_pool_raises(self):
        m = rect_mask(W, H, 10, 10, 16, 16)
        pools = {0: make_pool("f0", [m]), 2: make_pool("f2", [m])}
        with pytest.raises(PropagationError):
            propagate_chain(pools, (0, m))

    def test_dimension_mismatch_raises(self):
        m = rect_mask(W, H, 10, 10, 16, 16)
        pools = {0: make_pool("f0", [m]), 1: make_pool("f1", [m])}
        bad = rect_mask(W + 2, H, 10, 10, 16, 16)
        with pytest.raises(PropagationError):
            propagate_chain(pools, (0, bad))

    def test_stop_at_exclusive(self):
        pools = moving_pools(10)
        out = propagate_chain(pools, (0, moving_square(0)), stop_at=5)
        assert [tf.frame for tf in out] == [1, 2, 3, 4]


class TestKeyframed:
    def test_spans_and_backfill(self):
        pools = moving_pools(12)
        inits = [(3, moving_square(3)), (8, moving_square(8))]
        track = propagate_keyframed(pools, inits)
        assert set(track.frames) == set(range(12))
        assert track.keyframes == {3, 8}
        for t in range(12):
            assert iou(track.mask_at(t), moving_square(t)) == 1.0

    def test_keyframes_never_overwritten(self):
        m = rect_mask(W, H, 10, 10, 16, 16)
        other = rect_mask(W, H, 12, 10, 16, 16)
        pools = {t: make_pool(f"f{t}", [other]) for t in range(4)}
        track = propagate_keyframed(pools, [(0, m), (2, m)])
        assert iou(track.mask_at(2), m) == 1.0
        assert track.frames[2].keyframe
        assert iou(track.mask_at(1), other) == 1.0

    def test_single_init_matches_forward_chain(self):
        pools = moving_pools(8)
        init = (0, moving_square(0))
        track = propagate_keyframed(pools, [init])
        chain = propagate_chain(pools, init)
        for tf in chain:
            assert iou(track.mask_at(tf.frame), tf.mask) == 1.0
            assert track.frames[tf.frame].proposal_id == tf.proposal_id

    def test_drift_recovery_at_keyframe(self):
        # Frames 4-6 offer nothing useful; the frame-7 keyframe re-anchors.
        pools = moving_pools(12)
        far = rect_mask(W, H, 50, 36, 6, 6)
        for t in (4, 5, 6):
            pools[t] = make_pool(f"f{t}", [far])
        track = propagate_keyframed(pools, [(0, moving_square(0)),
                                            (7, moving_square(7))])
        assert track.frames[4].drifted
        for t in range(7, 12):
            assert iou(track.mask_at(t), moving_square(t)) == 1.0

    def test_empty_inits_raise(self):
        with pytest.raises(PropagationError):
            propagate_keyframed({}, [])


class TestSelectKeyframes:
    def test_cadence(self):
        assert select_keyframes(list(range(150)), 100) == [0, 100]
        assert select_keyframes(list(range(10)), 3) == [0, 3, 6, 9]
        assert select_keyframes([5, 1, 9], 2) == [1, 9]

    def test_bad_cadence(self):
        with pytest.raises(PropagationError):
            select_keyframes([0, 1], 0)


def test_track_mask_at_missing_frame():
    track = VideoTrack()
    m = rect_mask(W, H, 0, 0, 4, 4)
    track.frames[0] = TrackFrame(frame=0, mask=m, proposal_id=None)
    assert track.mask_at(0) is m
    with pytest.raises(KeyError):
        track.mask_at(1)


def test_drift_floor_constant():
    assert DRIFT_FLOOR == 0.05
