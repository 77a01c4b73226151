"""Simulated annotators: boundary clickers (uniform, submod, active) and an
interior clicker, plus the shared start point and stopping rule.

All policies are deterministic functions of (ground truth, pool, config); the
interior clicker additionally depends on its seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .engine import CarvingSession
from .masks import BinaryMask, MaskError, boundary_pixels, iou, shape_principal_axis, trace_contour
from .proposals import ProposalPool

POLICIES = ("uniform", "submod", "active", "interior")

RAY_STEP = 0.5  # px; ray-march discretization for the start point
RAY_HIT_TOL = 0.75  # px; boundary pixel counts as hit within this distance

STOP_MARGIN_REACHED = "margin_reached"
STOP_BUDGET_EXHAUSTED = "budget_exhausted"
STOP_CONTOUR_COVERED = "contour_covered"  # boundary candidates ran out


@dataclass(frozen=True)
class SimConfig:
    budget: int = 10
    k: int = 9
    stop_margin: float = 0.05  # absolute IoU points
    seed: int = 0  # interior sampling only
    policy: str = "active"

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0.0 <= self.stop_margin <= 1.0:
            raise ValueError("stop_margin must be in [0, 1]")


@dataclass(frozen=True)
class SimTrace:
    clicks: tuple[tuple[int, int], ...]
    clicks_used: int
    selected: int
    achieved_iou: float
    stopped_by: str


def start_point(gt: BinaryMask) -> tuple[int, int]:
    """Boundary pixel where the principal-axis ray leaves the shape.

    March the ray from the centroid in both directions in 0.5 px steps and
    collect boundary pixels within 0.75 px of a sample; return the hit
    farthest from the centroid, preferring the +axis direction on ties.
    """
    if gt.is_empty:
        raise MaskError("ground truth mask is empty")
    if gt.area == 1:
        y, x = map(int, np.argwhere(gt.pixels)[0])
        return (x, y)
    ax = shape_principal_axis(gt)
    cx, cy = ax.centroid
    v = np.array(ax.direction)
    b = boundary_pixels(gt)
    ys, xs = np.nonzero(b.pixels)
    pts = np.stack([xs, ys], axis=1).astype(float)
    tree = cKDTree(pts)

    max_t = float(np.hypot(gt.width, gt.height))
    ts = np.arange(0.0, max_t + RAY_STEP, RAY_STEP)
    best = None  # (dist, sign_pref, -x, -y) maximized
    for sign in (1.0, -1.0):
        samples = np.array([cx, cy]) + np.outer(ts, sign * v)
        for hit_list in tree.query_ball_point(samples, RAY_HIT_TOL):
            for idx in hit_list:
                px, py = pts[idx]
                d = float(np.hypot(px - cx, py - cy))
                key = (d, 1.0 if sign > 0 else 0.0, -px, -py)
                if best is None or key > best[0]:
                    best = (key, (int(px), int(py)))
    if best is None:
        # ray missed every boundary pixel (degenerate raster); fall back to
        # the boundary pixel farthest from the centroid
        d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        px, py = pts[int(np.argmax(d))]
        return (int(px), int(py))
    return best[1]


def stopping_rule(
    session: CarvingSession,
    gt: BinaryMask,
    pool: ProposalPool,
    margin: float,
    ious: np.ndarray | None = None,
) -> bool:
    """True when the best top-k proposal is within `margin` IoU of the best in
    the whole pool (simulation-only: requires ground truth)."""
    if ious is None:
        ious = _pool_ious(pool, gt)
    by_id = {p.id: ious[i] for i, p in enumerate(pool.proposals)}
    best_all = float(ious.max())
    best_topk = max(by_id[pid] for pid in session.top_k())
    return best_topk >= best_all - margin


def _pool_ious(pool: ProposalPool, gt: BinaryMask) -> np.ndarray:
    return np.array([iou(p.mask, gt) for p in pool.proposals])


def _finish(session: CarvingSession, ious: np.ndarray, stopped_by: str) -> SimTrace:
    by_id = {p.id: ious[i] for i, p in enumerate(pool_of(session).proposals)}
    topk = session.top_k()
    selected = max(topk, key=lambda pid: (by_id[pid], -pid))
    return SimTrace(
        clicks=tuple(session.clicks),
        clicks_used=len(session.clicks),
        selected=int(selected),
        achieved_iou=float(by_id[selected]),
        stopped_by=stopped_by,
    )


def pool_of(session: CarvingSession) -> ProposalPool:
    return session.pool


def _run_boundary(gt, session, config, next_click):
    """Shared loop: click, test the stopping rule, ask `next_click` for more.

    `next_click(step)` returns the next (x, y) or None when candidates ran out.
    """
    pool = session.pool
    ious = _pool_ious(pool, gt)
    stopped = None
    for step in range(config.budget):
        c = next_click(step)
        if c is None:
            stopped = STOP_CONTOUR_COVERED
            break
        session.click(*c)
        if stopping_rule(session, gt, pool, config.stop_margin, ious):
            stopped = STOP_MARGIN_REACHED
            break
    if stopped is None:
        stopped = STOP_BUDGET_EXHAUSTED
    return _finish(session, ious, stopped)


def uniform_clicker(gt: BinaryMask, session: CarvingSession, config: SimConfig) -> SimTrace:
    """Clicks spaced every floor(N / budget) traced points, starting at the
    traced index nearest the shared start point, walking once around."""
    contour = trace_contour(gt).points
    n = len(contour)
    d = max(1, n // config.budget)
    sp = start_point(gt)
    start = min(
        range(n),
        key=lambda i: ((contour[i][0] - sp[0]) ** 2 + (contour[i][1] - sp[1]) ** 2, i),
    )

    def next_click(step):
        if step * d >= n:  # a full cycle has been walked
            return None
        return contour[(start + step * d) % n]

    return _run_boundary(gt, session, config, next_click)


def _unique_points(contour):
    seen = {}
    for i, pt in enumerate(contour):
        if pt not in seen:
            seen[pt] = i
    return list(seen.items())  # (point, first traced index)


def _farthest_candidate(candidates, clicks):
    """Candidate maximizing distance to its nearest click; ties go to the
    smaller traced index.  Returns None when every candidate is a click."""
    clicks_arr = np.array(clicks, dtype=float)
    best = None
    for pt, idx in candidates:
        d = float(np.min(np.hypot(clicks_arr[:, 0] - pt[0], clicks_arr[:, 1] - pt[1])))
        key = (d, -idx)
        if best is None or key > best[0]:
            best = (key, pt)
    if best is None or best[0][0] == 0.0:
        return None
    return best[1]


def submod_clicker(gt: BinaryMask, session: CarvingSession, config: SimConfig) -> SimTrace:
    """Greedy farthest-point coverage of the traced contour."""
    candidates = _unique_points(trace_contour(gt).points)
    sp = start_point(gt)

    def next_click(step):
        if step == 0:
            return sp
        return _farthest_candidate(candidates, session.clicks)

    return _run_boundary(gt, session, config, next_click)


def active_clicker(gt: BinaryMask, session: CarvingSession, config: SimConfig) -> SimTrace:
    """Submod variant that skips contour points the current top-1 proposal
    already explains (within the pool's dilation radius of its boundary)."""
    candidates = _unique_points(trace_contour(gt).points)
    sp = start_point(gt)
    pool = session.pool

    def next_click(step):
        if step == 0:
            return sp
        top1 = pool.by_id(session.ranking[0])
        covered = top1.contour.base.pixels  # dilated boundary band of top-1
        remaining = [(pt, i) for pt, i in candidates if not covered[pt[1], pt[0]]]
        if not remaining:
            return None
        return _farthest_candidate(remaining, session.clicks)

    return _run_boundary(gt, session, config, next_click)


def interior_clicker(gt: BinaryMask, session: CarvingSession, config: SimConfig) -> SimTrace:
    """Uniform samples from the ground-truth foreground, clicked sequentially."""
    rng = np.random.default_rng(config.seed)
    ys, xs = np.nonzero(gt.pixels)
    n = len(xs)
    if n >= config.budget:
        picks = rng.choice(n, size=config.budget, replace=False)
    else:
        picks = np.concatenate(
            [rng.permutation(n), rng.choice(n, size=config.budget - n, replace=True)]
        )
    points = [(int(xs[i]), int(ys[i])) for i in picks]

    def next_click(step):
        return points[step]

    return _run_boundary(gt, session, config, next_click)


CLICKERS = {
    "uniform": uniform_clicker,
    "submod": submod_clicker,
    "active": active_clicker,
    "interior": interior_clicker,
}


def run_policy(policy: str, gt: BinaryMask, pool: ProposalPool, config: SimConfig) -> SimTrace:
    """Run one simulated annotation session from a fresh engine session."""
    session = CarvingSession(pool, k=config.k, budget=config.budget)
    return CLICKERS[policy](gt, session, config)
