/**
 * Typed client for the carving service HTTP API.
 *
 * The UI never computes votes or rankings locally; every state change goes
 * through these endpoints and the response is the new truth.
 */

export interface TopkEntry {
  id: number;
  objectness: number;
  votes: number;
  thumbnail_url: string;
  overlay_url: string;
}

export interface SessionState {
  session_id: string;
  video: string;
  frame: number;
  width: number;
  height: number;
  clicks_used: number;
  budget: number;
  clicks: [number, number][];
  accepted: number | null;
  matched?: number;
  topk: TopkEntry[];
  heatmap_url: string;
}

export interface AcceptResult {
  session_id: string;
  proposal_id: number;
  rle: string;
  mask_url: string;
}

export interface TrackFrameRecord {
  frame: number;
  rle: string;
  proposal_id: number | null;
  drifted: boolean;
  keyframe: boolean;
  overlay_url: string;
}

export interface TrackStatus {
  track_id: string;
  status: "running" | "done" | "error";
  error: string | null;
  frames: TrackFrameRecord[];
}

export interface VideoEntry {
  name: string;
  frames: number[];
  gt_frames: number[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) {
      let code = "http_error";
      let message = `${method} ${path} -> ${resp.status}`;
      try {
        const payload = await resp.json();
        if (payload?.error) {
          code = payload.error.code ?? code;
          message = payload.error.message ?? message;
        }
      } catch {
        /* non-JSON error body; keep defaults */
      }
      throw new ApiError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  listVideos(): Promise<{ videos: VideoEntry[] }> {
    return this.request("GET", "/videos");
  }

  createSession(
    video: string,
    frame: number,
    objectLabel = "",
    k?: number,
  ): Promise<SessionState> {
    return this.request("POST", "/sessions", {
      video,
      frame,
      object_label: objectLabel,
      ...(k !== undefined ? { k } : {}),
    });
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  postClick(sessionId: string, x: number, y: number): Promise<SessionState> {
    return this.request("POST", `/sessions/${sessionId}/clicks`, { x, y });
  }

  undoClick(sessionId: string): Promise<SessionState> {
    return this.request("POST", `/sessions/${sessionId}/undo`);
  }

  acceptProposal(
    sessionId: string,
    proposalId: number,
    wallTimeS?: number,
  ): Promise<AcceptResult> {
    return this.request("POST", `/sessions/${sessionId}/accept`, {
      proposal_id: proposalId,
      ...(wallTimeS !== undefined ? { wall_time_s: wallTimeS } : {}),
    });
  }

  launchPropagation(
    video: string,
    inits: { frame: number; rle: string }[],
  ): Promise<{ track_id: string; status: string }> {
    return this.request("POST", "/tracks", { video, inits });
  }

  getTrack(trackId: string): Promise<TrackStatus> {
    return this.request("GET", `/tracks/${trackId}`);
  }

  frameUrl(video: string, frame: number): string {
    return `${this.baseUrl}/videos/${video}/frames/${frame}`;
  }
}
