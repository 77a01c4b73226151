"""Batch entry points: ingest, synth, simulate, propagate, eval, serve.

Every run is reproducible from the recorded config + seed; outputs carry a
config fingerprint (sha256 of the canonical config JSON).  Errors exit
nonzero with a machine-readable category on stderr.
"""

from __future__ import annotations

import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import catalog as cat
from .catalog import CatalogError, frame_name, load_catalog, save_mask_png
from .evaluation import (
    SECONDS_PER_CLICK,
    EvalRow,
    render_clicks_histogram,
    render_cost_accuracy,
    rows_to_csv,
    summarize,
    summary_table,
    track_eval,
)
from .masks import BinaryMask, iou, rle_decode, rle_encode
from .proposals import (
    DEFAULT_DILATION_RADIUS,
    PoolError,
    SynthConfig,
    pool_to_manifest,
    synthesize_pool,
)
from .propagation import (
    DRIFT_FLOOR,
    PropagationError,
    propagate_keyframed,
    select_keyframes,
)
from .simusers import CLICKERS, SimConfig, run_policy

import base64


def fingerprint(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()[:16]


def fail(category: str, message: str) -> None:
    click.echo(f"error_category={category}: {message}", err=True)
    sys.exit(2)


@click.group()
def main():
    """Interactive video-object-segmentation toolkit."""


# -- ingest -------------------------------------------------------------------


@main.command()
@click.argument("data_root", type=click.Path(exists=True, file_okay=False))
def ingest(data_root):
    """Validate a data root and print its catalog."""
    try:
        c = load_catalog(data_root)
        for v in c.videos.values():
            for f in v.frames:
                c.load_pool(v.name, f)
    except (CatalogError, PoolError, OSError, ValueError) as e:
        fail("invalid_data", str(e))
    for v in c.videos.values():
        click.echo(f"{v.name}: {len(v.frames)} frames, {len(v.gt_frames)} gt frames")
    click.echo("ok")


# -- synth --------------------------------------------------------------------


def _demo_gt(rng, width, height, n_frames, dx):
    """Translating-rectangle ground truth; size drawn once per video."""
    w = int(rng.integers(width // 5, width // 3))
    h = int(rng.integers(height // 5, height // 3))
    y0 = int(rng.integers(2, height - h - 2))
    x0 = 2
    out = {}
    for t in range(n_frames):
        px = np.zeros((height, width), dtype=bool)
        x = min(x0 + dx * t, width - w - 2)
        px[y0:y0 + h, x:x + w] = True
        out[t] = BinaryMask(px)
    return out


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--gt-dir", type=click.Path(exists=True, file_okay=False),
              help="Existing GT masks laid out as <video>/<NNNNN>.png; "
                   "omit to generate demo translating-object videos.")
@click.option("--seed", default=0, show_default=True)
@click.option("--videos", default=2, show_default=True)
@click.option("--frames", default=8, show_default=True)
@click.option("--width", default=160, show_default=True)
@click.option("--height", default=120, show_default=True)
@click.option("--dx", default=2, show_default=True,
              help="Per-frame horizontal motion of demo objects.")
@click.option("--near", default=5, show_default=True)
@click.option("--partial", default=5, show_default=True)
@click.option("--distractor", default=30, show_default=True)
@click.option("--dilation-radius", default=DEFAULT_DILATION_RADIUS,
              show_default=True)
def synth(out_dir, gt_dir, seed, videos, frames, width, height, dx,
          near, partial, distractor, dilation_radius):
    """Build a synthetic data root: frames, proposal manifests, GT masks."""
    out = Path(out_dir)
    config = {
        "seed": seed, "videos": videos, "frames": frames, "width": width,
        "height": height, "dx": dx, "near": near, "partial": partial,
        "distractor": distractor, "dilation_radius": dilation_radius,
        "gt_dir": str(gt_dir) if gt_dir else None,
    }
    scfg = SynthConfig(near=near, partial=partial, distractor=distractor)

    gts: dict[str, dict[int, BinaryMask]] = {}
    if gt_dir:
        for vdir in sorted(Path(gt_dir).iterdir()):
            if vdir.is_dir():
                gts[vdir.name] = {
                    int(p.stem): cat.load_mask_png(p)
                    for p in sorted(vdir.glob("*.png")) if p.stem.isdigit()
                }
        if not gts:
            fail("invalid_data", f"no ground-truth videos under {gt_dir}")
    else:
        for vi in range(videos):
            rng = np.random.default_rng(seed * 1000 + vi)
            gts[f"demo{vi}"] = _demo_gt(rng, width, height, frames, dx)

    for vname, frames_gt in gts.items():
        vdir = out / vname
        for sub in ("frames", "proposals", "gt"):
            (vdir / sub).mkdir(parents=True, exist_ok=True)
        for f, gt in sorted(frames_gt.items()):
            h, w = gt.pixels.shape
            # flat gray frame with the object faintly brighter, purely cosmetic
            img = np.full((h, w, 3), 64, dtype=np.uint8)
            img[gt.pixels] = (110, 110, 110)
            from PIL import Image
            Image.fromarray(img).save(vdir / "frames" / f"{frame_name(f)}.png")
            save_mask_png(gt, vdir / "gt" / f"{frame_name(f)}.png")
            pool = synthesize_pool(
                gt, scfg,
                seed=hash_seed(seed, vname, f),
                frame_id=frame_name(f),
                dilation_radius=dilation_radius,
            )
            (vdir / "proposals" / f"{frame_name(f)}.json").write_text(
                json.dumps(pool_to_manifest(pool), sort_keys=True)
            )
    (out / "fingerprint.json").write_text(
        json.dumps({"config": config, "fingerprint": fingerprint(config)},
                   sort_keys=True, indent=2)
    )
    click.echo(f"wrote {len(gts)} videos to {out} (fingerprint {fingerprint(config)})")


def hash_seed(seed: int, video: str, frame: int) -> int:
    h = hashlib.sha256(f"{seed}/{video}/{frame}".encode()).digest()
    return int.from_bytes(h[:4], "big")


# -- simulate -----------------------------------------------------------------


def _simulate_one(args):
    data_root, video, frame, policy, seed, budget, k, stop_margin = args
    c = load_catalog(data_root)
    pool = c.load_pool(video, frame)
    gt = c.load_gt(video, frame)
    cfg = SimConfig(budget=budget, k=k, stop_margin=stop_margin,
                    seed=seed, policy=policy)
    trace = run_policy(policy, gt, pool, cfg)
    sel = pool.by_id(trace.selected)
    return {
        "video": video,
        "frame": frame,
        "policy": policy,
        "seed": seed,
        "clicks": [list(cl) for cl in trace.clicks],
        "clicks_used": trace.clicks_used,
        "selected": trace.selected,
        "selected_iou": iou(sel.mask, gt),
        "stopped_by": trace.stopped_by,
    }


@main.command()
@click.argument("data_root", type=click.Path(exists=True, file_okay=False))
@click.option("--policies", default=",".join(sorted(CLICKERS)),
              show_default=True)
@click.option("--seeds", default="0", show_default=True,
              help="Comma list and/or a-b ranges, e.g. 0,1,5-9.")
@click.option("--budget", default=10, show_default=True)
@click.option("--k", default=9, show_default=True)
@click.option("--stop-margin", default=0.05, show_default=True)
@click.option("--workers", default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(data_root, policies, seeds, budget, k, stop_margin, workers, out):
    """Run simulated annotators over every GT frame; write JSONL traces."""
    policy_list = [p.strip() for p in policies.split(",") if p.strip()]
    for p in policy_list:
        if p not in CLICKERS:
            fail("bad_argument", f"unknown policy {p!r} (have {sorted(CLICKERS)})")
    seed_list = parse_seeds(seeds)
    try:
        c = load_catalog(data_root)
    except CatalogError as e:
        fail("invalid_data", str(e))
    jobs = [
        (data_root, v.name, f, policy, seed, budget, k, stop_margin)
        for v in c.videos.values()
        for f in v.gt_frames
        for policy in policy_list
        for seed in seed_list
    ]
    if not jobs:
        fail("invalid_data", "no ground-truth frames to simulate on")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_simulate_one, jobs))
    else:
        records = [_simulate_one(j) for j in jobs]
    config = {
        "policies": policy_list, "seeds": seed_list, "budget": budget,
        "k": k, "stop_margin": stop_margin,
    }
    with open(out, "w") as fh:
        fh.write(json.dumps(
            {"record": "header", "config": config,
             "fingerprint": fingerprint(config)}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    click.echo(f"wrote {len(records)} traces to {out}")


def parse_seeds(expr: str) -> list[int]:
    out = []
    for part in expr.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


# -- propagate ----------------------------------------------------------------


@main.command()
@click.argument("data_root", type=click.Path(exists=True, file_okay=False))
@click.option("--video", required=True)
@click.option("--cadence", default=100, show_default=True,
              help="Re-initialize from GT every Nth frame.")
@click.option("--drift-floor", default=DRIFT_FLOOR, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def propagate(data_root, video, cadence, drift_floor, out):
    """Chain masks across a video from GT keyframes taken at a fixed cadence."""
    try:
        c = load_catalog(data_root)
        v = c.video(video)
        keys = select_keyframes(v.frames, cadence)
        missing = [f for f in keys if f not in v.gt_frames]
        if missing:
            fail("invalid_data",
                 f"keyframes {missing} have no ground truth to initialize from")
        inits = [(f, c.load_gt(video, f)) for f in keys]
        track = propagate_keyframed(c.pools_for(video), inits,
                                    floor=drift_floor)
    except (CatalogError, PoolError, PropagationError) as e:
        fail("invalid_data", str(e))
    config = {"video": video, "cadence": cadence, "drift_floor": drift_floor}
    doc = {
        "video": video,
        "config": config,
        "fingerprint": fingerprint(config),
        "frames": [
            {
                "frame": f,
                "rle": base64.b64encode(rle_encode(tf.mask)).decode("ascii"),
                "proposal_id": tf.proposal_id,
                "drifted": tf.drifted,
                "keyframe": tf.keyframe,
            }
            for f, tf in sorted(track.frames.items())
        ],
    }
    Path(out).write_text(json.dumps(doc, sort_keys=True, indent=1))
    click.echo(f"wrote track with {len(doc['frames'])} frames to {out}")


# -- eval ---------------------------------------------------------------------


@main.command("eval")
@click.option("--traces", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--tracks", "track_files", type=click.Path(exists=True, dir_okay=False),
              multiple=True)
@click.option("--data-root", type=click.Path(exists=True, file_okay=False),
              help="Needed to score --tracks against ground truth.")
@click.option("--seconds-per-click", default=SECONDS_PER_CLICK,
              show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
def eval_cmd(traces, track_files, data_root, seconds_per_click, out_dir):
    """Summarize traces (and optional tracks) into a report + figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    track_iou_by_video: dict[str, float] = {}
    if track_files:
        if not data_root:
            fail("bad_argument", "--tracks requires --data-root for ground truth")
        c = load_catalog(data_root)
        from .propagation import TrackFrame, VideoTrack
        for tf_path in track_files:
            doc = json.loads(Path(tf_path).read_text())
            video = doc["video"]
            v = c.video(video)
            pool0 = c.load_pool(video, v.frames[0])
            track = VideoTrack()
            for rec in doc["frames"]:
                mask = rle_decode(base64.b64decode(rec["rle"]),
                                  pool0.width, pool0.height)
                track.frames[rec["frame"]] = TrackFrame(
                    frame=rec["frame"], mask=mask,
                    proposal_id=rec["proposal_id"],
                    drifted=rec["drifted"], keyframe=rec["keyframe"])
            gts = {f: c.load_gt(video, f) for f in v.gt_frames}
            track_iou_by_video[video] = track_eval(track, gts)

    rows = []
    with open(traces) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("record") == "header":
                continue
            rows.append(EvalRow(
                video=rec["video"],
                object_label=str(rec["frame"]),
                policy=rec["policy"],
                clicks=rec["clicks_used"],
                modeled_time_s=seconds_per_click * rec["clicks_used"],
                selected_iou=rec["selected_iou"],
                stopped_by=rec["stopped_by"],
                track_iou=track_iou_by_video.get(rec["video"]),
            ))
    if not rows:
        fail("invalid_data", f"no trace records in {traces}")
    (out / "report.csv").write_text(rows_to_csv(rows))
    table = summary_table(summarize(rows))
    (out / "summary.txt").write_text(table)
    render_cost_accuracy(rows, out / "cost_accuracy.png")
    render_clicks_histogram(rows, out / "clicks.png")
    click.echo(table, nl=False)
    for video, t in sorted(track_iou_by_video.items()):
        click.echo(f"track {video}: mean IoU {t:.3f}")
    click.echo(f"report written to {out}")


# -- serve --------------------------------------------------------------------


@main.command()
@click.argument("data_root", type=click.Path(exists=True, file_okay=False),
                envvar="CLICKCARVE_DATA_ROOT")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True,
              envvar="CLICKCARVE_PORT")
@click.option("--k", default=9, show_default=True, envvar="CLICKCARVE_K")
@click.option("--budget", default=10, show_default=True,
              envvar="CLICKCARVE_BUDGET")
def serve(data_root, host, port, k, budget):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(data_root, k=k, budget=budget)
    except CatalogError as e:
        fail("invalid_data", str(e))
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
