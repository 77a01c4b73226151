"""Evaluation rows, summaries, serialization, and report figures.

Modeled annotation time is clicks x a per-click constant (default 2.4 s);
interactive sessions may additionally record wall time.  The two columns are
never mixed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .masks import BinaryMask, iou
from .propagation import VideoTrack
from .simusers import SimTrace

SECONDS_PER_CLICK = 2.4


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class EvalRow:
    video: str
    object_label: str
    policy: str
    clicks: int
    modeled_time_s: float
    selected_iou: float
    stopped_by: str
    wall_time_s: float | None = None  # interactive sessions only
    track_iou: float | None = None
    external: bool = False  # static reference row, not produced by this run


def frame_eval(
    trace: SimTrace,
    gt: BinaryMask,
    pool,
    *,
    video: str,
    object_label: str,
    policy: str,
    seconds_per_click: float = SECONDS_PER_CLICK,
) -> EvalRow:
    """Score one simulated (or replayed) annotation session against GT."""
    selected_mask = pool.by_id(trace.selected).mask
    return EvalRow(
        video=video,
        object_label=object_label,
        policy=policy,
        clicks=trace.clicks_used,
        modeled_time_s=seconds_per_click * trace.clicks_used,
        selected_iou=iou(selected_mask, gt),
        stopped_by=trace.stopped_by,
    )


def track_eval(track: VideoTrack, gts: dict[int, BinaryMask]) -> float:
    """Mean IoU over the GT-annotated frames only (sparse GT is the norm)."""
    if not gts:
        raise EvalError("no ground-truth frames to evaluate against")
    vals = []
    for frame, gt in gts.items():
        if frame not in track.frames:
            raise EvalError(f"track has no mask for ground-truth frame {frame}")
        vals.append(iou(track.mask_at(frame), gt))
    return float(np.mean(vals))


def summarize(rows: list[EvalRow]) -> list[dict]:
    """Per-policy means of clicks, modeled time, and IoU."""
    if not rows:
        raise EvalError("no rows to summarize")
    policies = sorted({r.policy for r in rows})
    out = []
    for pol in policies:
        group = [r for r in rows if r.policy == pol]
        track_vals = [r.track_iou for r in group if r.track_iou is not None]
        out.append(
            {
                "policy": pol,
                "n": len(group),
                "mean_clicks": float(np.mean([r.clicks for r in group])),
                "median_clicks": float(np.median([r.clicks for r in group])),
                "mean_time_s": float(np.mean([r.modeled_time_s for r in group])),
                "mean_iou": float(np.mean([r.selected_iou for r in group])),
                "mean_track_iou": float(np.mean(track_vals)) if track_vals else None,
            }
        )
    return out


def cost_accuracy_points(rows: list[EvalRow]) -> list[tuple[str, float, float]]:
    """(policy, modeled time, IoU) points for external plotting."""
    return [(r.policy, r.modeled_time_s, r.selected_iou) for r in rows]


# ---------------------------------------------------------------------------
# Serialization: delimiter-separated rows, lossless round-trip.
# ---------------------------------------------------------------------------

_FIELDS = [f.name for f in fields(EvalRow)]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(v) if isinstance(v, float) else str(v)


def rows_to_csv(rows: list[EvalRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(_FIELDS)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in _FIELDS])
    return buf.getvalue()


def rows_from_csv(text: str) -> list[EvalRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        out.append(
            EvalRow(
                video=rec["video"],
                object_label=rec["object_label"],
                policy=rec["policy"],
                clicks=int(rec["clicks"]),
                modeled_time_s=float(rec["modeled_time_s"]),
                selected_iou=float(rec["selected_iou"]),
                stopped_by=rec["stopped_by"],
                wall_time_s=float(rec["wall_time_s"]) if rec["wall_time_s"] else None,
                track_iou=float(rec["track_iou"]) if rec["track_iou"] else None,
                external=rec["external"] == "1",
            )
        )
    return out


def summary_table(summary: list[dict]) -> str:
    header = f"{'policy':<10} {'n':>5} {'clicks':>8} {'time(s)':>8} {'IoU':>7} {'trackIoU':>9}"
    lines = [header, "-" * len(header)]
    for s in summary:
        t = f"{s['mean_track_iou']:.3f}" if s["mean_track_iou"] is not None else "-"
        lines.append(
            f"{s['policy']:<10} {s['n']:>5} {s['mean_clicks']:>8.2f} "
            f"{s['mean_time_s']:>8.2f} {s['mean_iou']:>7.3f} {t:>9}"
        )
    return "\n".join(lines) + "\n"


def render_cost_accuracy(rows: list[EvalRow], path) -> None:
    """Scatter of modeled annotation time vs achieved IoU, one color per policy."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for pol in sorted({r.policy for r in rows}):
        pts = [(r.modeled_time_s, r.selected_iou) for r in rows if r.policy == pol]
        xs, ys = zip(*pts)
        ax.scatter(xs, ys, s=18, alpha=0.6, label=pol)
    ax.set_xlabel("modeled annotation time (s)")
    ax.set_ylabel("selected-frame IoU")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_clicks_histogram(rows: list[EvalRow], path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    policies = sorted({r.policy for r in rows})
    data = [[r.clicks for r in rows if r.policy == p] for p in policies]
    ax.boxplot(data, tick_labels=policies)
    ax.set_ylabel("clicks used")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
