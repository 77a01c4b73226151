/**
 * Headless UI session controller.
 *
 * Holds the mirror of the server session plus the display scale, converts
 * click coordinates, and applies every server response as the new state
 * (no optimistic updates). Rendering is a pure function of this state, so
 * the controller is testable without a browser.
 */

import { AcceptResult, ApiClient, SessionState } from "./api.js";
import { clampToFrame, displayToImage } from "./coords.js";

export type Clock = () => number;

export class SessionController {
  state: SessionState | null = null;
  acceptResult: AcceptResult | null = null;
  scale: number;
  /** wall time is measured from the first click to the accept call */
  private firstClickAt: number | null = null;

  constructor(
    private api: ApiClient,
    scale = 1,
    private now: Clock = () => Date.now(),
  ) {
    this.scale = scale;
  }

  get active(): boolean {
    return this.state !== null && this.acceptResult === null;
  }

  async start(video: string, frame: number, objectLabel = "", k?: number) {
    this.state = await this.api.createSession(video, frame, objectLabel, k);
    this.acceptResult = null;
    this.firstClickAt = null;
    return this.state;
  }

  private session(): SessionState {
    if (!this.state) throw new Error("no active session");
    if (this.acceptResult) throw new Error("session already accepted");
    return this.state;
  }

  /** Click at canvas coordinates; posts original-image pixels. */
  async clickAtDisplay(cx: number, cy: number): Promise<SessionState> {
    const s = this.session();
    const p = clampToFrame(
      displayToImage(cx, cy, this.scale),
      s.width,
      s.height,
    );
    if (this.firstClickAt === null) this.firstClickAt = this.now();
    this.state = await this.api.postClick(s.session_id, p.x, p.y);
    return this.state;
  }

  async undo(): Promise<SessionState> {
    const s = this.session();
    this.state = await this.api.undoClick(s.session_id);
    return this.state;
  }

  async accept(proposalId: number): Promise<AcceptResult> {
    const s = this.session();
    const wall =
      this.firstClickAt === null
        ? undefined
        : (this.now() - this.firstClickAt) / 1000;
    this.acceptResult = await this.api.acceptProposal(
      s.session_id,
      proposalId,
      wall,
    );
    return this.acceptResult;
  }

  /** Accept the current top-ranked proposal. */
  acceptTop(): Promise<AcceptResult> {
    const s = this.session();
    if (s.topk.length === 0) throw new Error("empty proposal gallery");
    return this.accept(s.topk[0].id);
  }

  get clicksRemaining(): number {
    const s = this.state;
    return s ? s.budget - s.clicks_used : 0;
  }
}
