"""HTTP façade over the carving engine and the propagator.

State model: immutable pools are shared across sessions; each session is
guarded by its own lock, so requests for one session serialize while
different sessions proceed concurrently.  Propagation runs as a background
job polled by id.  All wire coordinates are original-image pixels; error
bodies carry a machine-readable ``code``.
"""

from __future__ import annotations

import base64
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image
from pydantic import BaseModel

from .catalog import Catalog, CatalogError, load_catalog
from .engine import (
    DEFAULT_BUDGET,
    DEFAULT_K,
    AcceptRejected,
    BudgetExhausted,
    CarvingSession,
    OutOfBoundsClick,
    SessionFrozen,
    UndoUnderflow,
)
from .masks import BinaryMask, rle_decode, rle_encode
from .propagation import DRIFT_FLOOR, propagate_keyframed

THUMBNAIL_MAX_EDGE = 256
OVERLAY_COLOR = (220, 50, 50)
OVERLAY_ALPHA = 0.55


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _not_found(code, msg):
    return ApiError(404, code, msg)


@dataclass
class SessionEntry:
    id: str
    video: str
    frame: int
    object_label: str
    session: CarvingSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    wall_time_s: float | None = None
    overlay_cache: dict = field(default_factory=dict)


@dataclass
class TrackJob:
    id: str
    video: str
    status: str = "running"  # running | done | error
    error: str | None = None
    frames: dict[int, dict] = field(default_factory=dict)


class Registry:
    """Sessions + track jobs; ids are sequential for reproducible logs."""

    def __init__(self, catalog: Catalog, k: int, budget: int):
        self.catalog = catalog
        self.k = k
        self.budget = budget
        self.sessions: dict[str, SessionEntry] = {}
        self.tracks: dict[str, TrackJob] = {}
        self._counter = 0
        self._lock = threading.Lock()

    def next_id(self, prefix: str) -> str:
        with self._lock:
            self._counter += 1
            return f"{prefix}{self._counter}"

    def session(self, sid: str) -> SessionEntry:
        try:
            return self.sessions[sid]
        except KeyError:
            raise _not_found("unknown_session", f"no session {sid!r}") from None

    def track(self, tid: str) -> TrackJob:
        try:
            return self.tracks[tid]
        except KeyError:
            raise _not_found("unknown_track", f"no track {tid!r}") from None


# -- wire schemas -----------------------------------------------------------


class CreateSessionRequest(BaseModel):
    video: str
    frame: int
    object_label: str = ""
    k: int | None = None


class ClickRequest(BaseModel):
    x: int
    y: int


class AcceptRequest(BaseModel):
    proposal_id: int
    wall_time_s: float | None = None


class KeyframeInit(BaseModel):
    frame: int
    rle: str  # base64 run-length payload


class TrackRequest(BaseModel):
    video: str
    inits: list[KeyframeInit]
    drift_floor: float = DRIFT_FLOOR


def b64_mask(mask: BinaryMask) -> str:
    return base64.b64encode(rle_encode(mask)).decode("ascii")


def mask_from_b64(data: str, width: int, height: int) -> BinaryMask:
    return rle_decode(base64.b64decode(data), width, height)


def _session_state(entry: SessionEntry, matched: int | None = None) -> dict:
    s = entry.session
    out = {
        "session_id": entry.id,
        "video": entry.video,
        "frame": entry.frame,
        "width": s.pool.width,
        "height": s.pool.height,
        "clicks_used": len(s.clicks),
        "budget": s.budget,
        "clicks": [list(c) for c in s.clicks],
        "accepted": s.accepted,
        "topk": [
            {
                "id": pid,
                "objectness": s.pool.by_id(pid).objectness,
                "votes": s.votes_for(pid),
                "thumbnail_url": f"/sessions/{entry.id}/thumbnails/{pid}",
                "overlay_url": f"/sessions/{entry.id}/overlays/{pid}",
            }
            for pid in s.top_k()
        ],
        "heatmap_url": f"/sessions/{entry.id}/heatmap",
    }
    if matched is not None:
        out["matched"] = matched
    return out


# -- rendering ----------------------------------------------------------------


def _frame_rgb(catalog: Catalog, video: str, frame: int) -> np.ndarray:
    path = catalog.frame_path(video, frame)
    return np.asarray(Image.open(path).convert("RGB")).copy()


def render_overlay(base: np.ndarray, mask: BinaryMask, color=OVERLAY_COLOR,
                   alpha=OVERLAY_ALPHA) -> bytes:
    img = base.astype(np.float64)
    sel = mask.pixels
    img[sel] = (1 - alpha) * img[sel] + alpha * np.array(color, dtype=np.float64)
    buf = io.BytesIO()
    Image.fromarray(img.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def render_heatmap(base: np.ndarray, counts: np.ndarray, depth: int = 5) -> bytes:
    """Blend a blue->red ramp over the frame, intensity = contour agreement."""
    img = base.astype(np.float64)
    level = np.clip(counts / depth, 0, 1)
    color = np.zeros(img.shape)
    color[..., 0] = 255 * level
    color[..., 2] = 255 * (1 - level)
    sel = counts > 0
    img[sel] = 0.45 * img[sel] + 0.55 * color[sel]
    buf = io.BytesIO()
    Image.fromarray(img.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def _thumbnail(png: bytes, max_edge: int = THUMBNAIL_MAX_EDGE) -> bytes:
    img = Image.open(io.BytesIO(png))
    if max(img.size) > max_edge:
        img.thumbnail((max_edge, max_edge), Image.LANCZOS)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# -- app factory --------------------------------------------------------------


def create_app(
    data_root: Path | str,
    k: int = DEFAULT_K,
    budget: int = DEFAULT_BUDGET,
    synchronous_tracks: bool = False,
) -> FastAPI:
    catalog = load_catalog(data_root)
    registry = Registry(catalog, k=k, budget=budget)
    app = FastAPI(title="click-carving service")
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def _api_error(request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"code": exc.code, "message": exc.message}},
        )

    def guard(fn):
        """Map engine/catalog errors to HTTP statuses."""
        try:
            return fn()
        except OutOfBoundsClick as e:
            raise ApiError(400, "out_of_bounds", str(e))
        except UndoUnderflow as e:
            raise ApiError(400, "nothing_to_undo", str(e))
        except BudgetExhausted as e:
            raise ApiError(409, "budget_exhausted", str(e))
        except SessionFrozen as e:
            raise ApiError(409, "session_frozen", str(e))
        except AcceptRejected as e:
            raise ApiError(400, "accept_rejected", str(e))
        except CatalogError as e:
            raise ApiError(404, "not_found", str(e))

    @app.get("/videos")
    def list_videos():
        return {
            "videos": [
                {"name": v.name, "frames": v.frames, "gt_frames": v.gt_frames}
                for v in catalog.videos.values()
            ]
        }

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        pool = guard(lambda: catalog.load_pool(req.video, req.frame))
        sid = registry.next_id("s")
        entry = SessionEntry(
            id=sid,
            video=req.video,
            frame=req.frame,
            object_label=req.object_label,
            session=CarvingSession(pool, k=req.k or registry.k,
                                   budget=registry.budget),
        )
        registry.sessions[sid] = entry
        return _session_state(entry)

    @app.post("/sessions/{sid}/clicks")
    def post_click(sid: str, req: ClickRequest):
        entry = registry.session(sid)
        with entry.lock:
            result = guard(lambda: entry.session.click(req.x, req.y))
            return _session_state(entry, matched=result.matched)

    @app.post("/sessions/{sid}/undo")
    def undo_click(sid: str):
        entry = registry.session(sid)
        with entry.lock:
            guard(entry.session.undo)
            return _session_state(entry, matched=0)

    @app.post("/sessions/{sid}/accept")
    def accept_proposal(sid: str, req: AcceptRequest):
        entry = registry.session(sid)
        with entry.lock:
            mask = guard(lambda: entry.session.accept(req.proposal_id))
            entry.wall_time_s = req.wall_time_s
            return {
                "session_id": sid,
                "proposal_id": req.proposal_id,
                "rle": b64_mask(mask),
                "mask_url": f"/sessions/{sid}/overlays/{req.proposal_id}",
            }

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        entry = registry.session(sid)
        with entry.lock:
            return _session_state(entry)

    @app.get("/videos/{video}/frames/{frame}")
    def get_frame(video: str, frame: int):
        path = guard(lambda: catalog.frame_path(video, frame))
        return FileResponse(path)

    def _overlay_png(entry: SessionEntry, pid: int) -> bytes:
        if pid not in entry.overlay_cache:
            try:
                prop = entry.session.pool.by_id(pid)
            except KeyError:
                raise _not_found("unknown_proposal", f"no proposal {pid}")
            base = _frame_rgb(catalog, entry.video, entry.frame)
            entry.overlay_cache[pid] = render_overlay(base, prop.mask)
        return entry.overlay_cache[pid]

    @app.get("/sessions/{sid}/overlays/{pid}")
    def get_overlay(sid: str, pid: int):
        entry = registry.session(sid)
        with entry.lock:
            png = guard(lambda: _overlay_png(entry, pid))
        return Response(content=png, media_type="image/png")

    @app.get("/sessions/{sid}/thumbnails/{pid}")
    def get_thumbnail(sid: str, pid: int):
        entry = registry.session(sid)
        with entry.lock:
            png = guard(lambda: _overlay_png(entry, pid))
        return Response(content=_thumbnail(png), media_type="image/png")

    @app.get("/sessions/{sid}/heatmap")
    def get_heatmap(sid: str):
        entry = registry.session(sid)
        with entry.lock:
            counts = entry.session.heatmap()
            base = guard(lambda: _frame_rgb(catalog, entry.video, entry.frame))
            png = render_heatmap(base, counts)
        return Response(content=png, media_type="image/png")

    def _run_track(job: TrackJob, pools, inits, floor):
        try:
            track = propagate_keyframed(pools, inits, floor=floor)
            for f, tf in sorted(track.frames.items()):
                job.frames[f] = {
                    "frame": f,
                    "rle": b64_mask(tf.mask),
                    "proposal_id": tf.proposal_id,
                    "drifted": tf.drifted,
                    "keyframe": tf.keyframe,
                    "overlay_url": f"/tracks/{job.id}/overlays/{f}",
                }
            job.status = "done"
        except Exception as e:  # surfaced via status polling
            job.status = "error"
            job.error = str(e)

    @app.post("/tracks")
    def launch_propagation(req: TrackRequest):
        if not req.inits:
            raise ApiError(400, "no_keyframes", "at least one keyframe init required")
        pools = guard(lambda: catalog.pools_for(req.video))
        first = pools[next(iter(pools))]
        inits = [
            (i.frame, mask_from_b64(i.rle, first.width, first.height))
            for i in req.inits
        ]
        for f, _ in inits:
            if f not in pools:
                raise ApiError(400, "bad_keyframe", f"video has no frame {f}")
        tid = registry.next_id("t")
        job = TrackJob(id=tid, video=req.video)
        registry.tracks[tid] = job
        if synchronous_tracks:
            _run_track(job, pools, inits, req.drift_floor)
        else:
            threading.Thread(
                target=_run_track, args=(job, pools, inits, req.drift_floor),
                daemon=True,
            ).start()
        return {"track_id": tid, "status": job.status}

    @app.get("/tracks/{tid}")
    def get_track(tid: str):
        job = registry.track(tid)
        return {
            "track_id": tid,
            "status": job.status,
            "error": job.error,
            "frames": [job.frames[f] for f in sorted(job.frames)],
        }

    @app.get("/tracks/{tid}/overlays/{frame}")
    def get_track_overlay(tid: str, frame: int):
        job = registry.track(tid)
        if job.status != "done" or frame not in job.frames:
            raise _not_found("unknown_track_frame", f"track {tid} has no frame {frame}")
        pool = catalog.load_pool(job.video, frame)
        mask = mask_from_b64(job.frames[frame]["rle"], pool.width, pool.height)
        base = _frame_rgb(catalog, job.video, frame)
        return Response(content=render_overlay(base, mask), media_type="image/png")

    return app
