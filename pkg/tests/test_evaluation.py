"""Tests for evaluation rows, summaries, CSV round-trip, and figures."""

import numpy as np
import pytest

from clickcarve.evaluation import (
    SECONDS_PER_CLICK,
    EvalError,
    EvalRow,
    cost_accuracy_points,
    frame_eval,
    render_clicks_histogram,
    render_cost_accuracy,
    rows_from_csv,
    rows_to_csv,
    summarize,
    summary_table,
    track_eval,
)
from clickcarve.masks import contour_mask, iou
from clickcarve.propagation import propagate_keyframed
from clickcarve.proposals import Proposal, ProposalPool
from clickcarve.simusers import SimTrace
from .test_masks import rect_mask

W, H = 48, 48


def pool_of(masks, objectness=None):
    if objectness is None:
        objectness = [0.5] * len(masks)
    props = [
        Proposal(id=i, mask=m, contour=contour_mask(m, radius=2),
                 objectness=o, source="synthetic")
        for i, (m, o) in enumerate(zip(masks, objectness))
    ]
    return ProposalPool(frame_id="f", width=W, height=H, proposals=props,
                        dilation_radius=2)


def trace(clicks_used=4, selected=0, stopped_by="margin_reached"):
    return SimTrace(clicks=[(1, 1)] * clicks_used, clicks_used=clicks_used,
                    selected=selected, achieved_iou=1.0, stopped_by=stopped_by)


class TestFrameEval:
    def test_modeled_time_is_constant_times_clicks(self):
        gt = rect_mask(W, H, 8, 8, 16, 16)
        pool = pool_of([gt])
        for n in range(11):
            row = frame_eval(trace(clicks_used=n), gt, pool,
                             video="v", object_label="o", policy="active")
            assert row.modeled_time_s == 2.4 * n
        assert SECONDS_PER_CLICK == 2.4

    def test_selected_iou_against_gt(self):
        gt = rect_mask(W, H, 8, 8, 16, 16)
        half = rect_mask(W, H, 8, 8, 8, 16)
        pool = pool_of([gt, half])
        row = frame_eval(trace(selected=1), gt, pool,
                         video="v", object_label="o", policy="uniform")
        assert row.selected_iou == pytest.approx(iou(half, gt))
        assert row.policy == "uniform"
        assert row.wall_time_s is None


class TestTrackEval:
    def test_only_gt_frames_counted(self):
        m = rect_mask(W, H, 8, 8, 16, 16)
        off = rect_mask(W, H, 10, 8, 16, 16)
        pools = {t: pool_of([m if t < 3 else off]) for t in range(5)}
        track = propagate_keyframed(pools, [(0, m)])
        # GT only on frames 1 and 3.
        gts = {1: m, 3: m}
        expected = (1.0 + iou(off, m)) / 2
        assert track_eval(track, gts) == pytest.approx(expected)

    def test_empty_gt_raises(self):
        with pytest.raises(EvalError):
            track_eval(None, {})

    def test_missing_frame_raises(self):
        m = rect_mask(W, H, 8, 8, 16, 16)
        pools = {0: pool_of([m]), 1: pool_of([m])}
        track = propagate_keyframed(pools, [(0, m)])
        with pytest.raises(EvalError):
            track_eval(track, {7: m})


def sample_rows():
    return [
        EvalRow("v1", "o1", "active", 3, 7.2, 0.9, "margin_reached"),
        EvalRow("v1", "o1", "active", 5, 12.0, 0.8, "budget_exhausted",
                track_iou=0.7),
        EvalRow("v1", "o1", "interior", 10, 24.0, 0.5, "budget_exhausted"),
        EvalRow("v2", "o2", "interior", 8, 19.2, 0.6, "margin_reached",
                wall_time_s=31.5, external=True),
    ]


class TestSummaries:
    def test_grouped_means(self):
        s = summarize(sample_rows())
        by_pol = {d["policy"]: d for d in s}
        assert set(by_pol) == {"active", "interior"}
        assert by_pol["active"]["mean_clicks"] == 4.0
        assert by_pol["active"]["mean_time_s"] == pytest.approx(9.6)
        assert by_pol["active"]["mean_iou"] == pytest.approx(0.85)
        assert by_pol["active"]["mean_track_iou"] == pytest.approx(0.7)
        assert by_pol["interior"]["mean_track_iou"] is None
        assert by_pol["interior"]["median_clicks"] == 9.0

    def test_empty_rows_raise(self):
        with pytest.raises(EvalError):
            summarize([])

    def test_cost_accuracy_points(self):
        pts = cost_accuracy_points(sample_rows())
        assert pts[0] == ("active", 7.2, 0.9)
        assert len(pts) == 4

    def test_summary_table_renders(self):
        text = summary_table(summarize(sample_rows()))
        assert "active" in text and "interior" in text
        assert text.endswith("\n")


class TestCsvRoundTrip:
    def test_lossless(self):
        rows = sample_rows()
        again = rows_from_csv(rows_to_csv(rows))
        assert again == rows

    def test_none_and_bool_fields_survive(self):
        rows = rows_from_csv(rows_to_csv(sample_rows()))
        assert rows[0].track_iou is None and rows[0].wall_time_s is None
        assert rows[3].external is True and rows[0].external is False

    def test_float_precision_preserved(self):
        r = EvalRow("v", "o", "submod", 7, 2.4 * 7, 1 / 3, "margin_reached")
        back = rows_from_csv(rows_to_csv([r]))[0]
        assert back.selected_iou == r.selected_iou
        assert back.modeled_time_s == r.modeled_time_s


class TestFigures:
    def test_cost_accuracy_figure_written(self, tmp_path):
        out = tmp_path / "cost_accuracy.png"
        render_cost_accuracy(sample_rows(), out)
        data = out.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n"
        assert len(data) > 1000

    def test_clicks_histogram_written(self, tmp_path):
        out = tmp_path / "clicks.png"
        render_clicks_histogram(sample_rows(), out)
        assert out.stat().st_size > 1000
