// Voting client: shows the server's current adjacent pair side by side,
// records one preference click, and polls until the session completes.
// The server is the source of truth for everything displayed here.

import { ApiError, castVote, getPair, getResult, type Choice, type PairView } from "./api.js";

export interface AppOptions {
  sessionId: string;
  voterId: string;
  baseUrl?: string;
  pollMs?: number;
}

type Phase = "loading" | "voting" | "waiting" | "complete" | "error";

export class AnnotationApp {
  readonly root: HTMLElement;
  private readonly sessionId: string;
  private readonly voterId: string;
  private readonly baseUrl: string;
  private readonly pollMs: number;

  private pair: PairView | null = null;
  private phase: Phase = "loading";
  private ranking: string[] | null = null;
  private voteInFlight = false;
  private votedLocally = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(root: HTMLElement, opts: AppOptions) {
    this.root = root;
    this.sessionId = opts.sessionId;
    this.voterId = opts.voterId;
    this.baseUrl = opts.baseUrl ?? "";
    this.pollMs = opts.pollMs ?? 1000;
  }

  async start(): Promise<void> {
    await this.refresh();
    this.schedule();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get currentPair(): PairView | null {
    return this.pair;
  }

  get finalRanking(): string[] | null {
    return this.ranking;
  }

  private schedule(): void {
    if (this.stopped || this.phase === "complete") return;
    this.timer = setTimeout(() => {
      void this.refresh().finally(() => this.schedule());
    }, this.pollMs);
  }

  async refresh(): Promise<void> {
    try {
      const pair = await getPair(this.baseUrl, this.sessionId);
      const changed =
        this.pair === null ||
        this.pair.left !== pair.left ||
        this.pair.right !== pair.right ||
        this.pair.cursor !== pair.cursor ||
        this.pair.pass_no !== pair.pass_no;
      if (changed) this.votedLocally = false;
      this.pair = pair;
      const mine = pair.voters_remaining.includes(this.voterId) && !this.votedLocally;
      this.phase = mine ? "voting" : "waiting";
    } catch (err) {
      if (err instanceof ApiError && err.code === "session_complete") {
        const result = await getResult(this.baseUrl, this.sessionId);
        this.ranking = result.ranking;
        this.phase = "complete";
        this.stop();
      } else if (err instanceof ApiError && err.code === "unknown_session") {
        this.phase = "error";
        this.renderError(`unknown session ${this.sessionId}`);
        this.stop();
        return;
      }
      // transient network errors: keep the last view and retry on the next poll
    }
    this.render();
  }

  async castVote(choice: Choice): Promise<void> {
    // idempotence guard: double clicks and repeat votes never double-submit
    if (this.voteInFlight || this.votedLocally || this.pair === null) return;
    if (!this.pair.voters_remaining.includes(this.voterId)) return;
    const seen = { left: this.pair.left, right: this.pair.right };
    this.voteInFlight = true;
    this.render();
    try {
      await castVote(this.baseUrl, this.sessionId, this.voterId, choice, seen);
      this.votedLocally = true;
    } catch (err) {
      if (err instanceof ApiError && (err.code === "stale_pair" || err.code === "session_complete")) {
        // the pair moved on under us: silently re-sync and re-prompt
        this.voteInFlight = false;
        await this.refresh();
        return;
      }
      if (err instanceof ApiError && err.code === "duplicate_vote") {
        this.votedLocally = true; // server already has our vote
      }
      // other errors: leave the buttons enabled so the voter can retry
    } finally {
      this.voteInFlight = false;
    }
    await this.refresh();
  }

  private renderError(message: string): void {
    this.root.innerHTML = "";
    const div = document.createElement("div");
    div.className = "error";
    div.textContent = message;
    this.root.appendChild(div);
  }

  private render(): void {
    if (this.phase === "error") return;
    this.root.innerHTML = "";
    if (this.phase === "complete" && this.ranking !== null) {
      this.renderRanking(this.ranking);
      return;
    }
    if (this.pair === null) {
      const div = document.createElement("div");
      div.className = "status";
      div.textContent = "loading…";
      this.root.appendChild(div);
      return;
    }
    this.renderPair(this.pair);
  }

  private renderPair(pair: PairView): void {
    const status = document.createElement("div");
    status.className = "status";
    status.dataset.passNo = String(pair.pass_no);
    status.dataset.cursor = String(pair.cursor);
    status.textContent =
      `pass ${pair.pass_no + 1}, comparison ${pair.cursor + 1} — ` +
      (this.phase === "waiting"
        ? `waiting for ${pair.voters_remaining.length} other vote(s)…`
        : "which image looks better?");
    this.root.appendChild(status);

    const panel = document.createElement("div");
    panel.className = "pair";
    const canVote = this.phase === "voting" && !this.voteInFlight;
    for (const side of ["left", "right"] as const) {
      const cell = document.createElement("div");
      cell.className = "side";
      const img = document.createElement("img");
      img.src = this.baseUrl + (side === "left" ? pair.left_url : pair.right_url);
      img.dataset.imageId = side === "left" ? pair.left : pair.right;
      img.alt = `${side} image`;
      const button = document.createElement("button");
      button.textContent = side === "left" ? "left is better" : "right is better";
      button.dataset.choice = side;
      button.disabled = !canVote;
      button.addEventListener("click", () => void this.castVote(side));
      cell.appendChild(img);
      cell.appendChild(button);
      panel.appendChild(cell);
    }
    this.root.appendChild(panel);
  }

  private renderRanking(ranking: string[]): void {
    const heading = document.createElement("div");
    heading.className = "status";
    heading.textContent = "session complete — final ranking (best first)";
    this.root.appendChild(heading);

    const strip = document.createElement("ol");
    strip.className = "ranking";
    strip.dataset.ranking = JSON.stringify(ranking);
    for (const imageId of ranking) {
      const item = document.createElement("li");
      const img = document.createElement("img");
      img.src = `${this.baseUrl}/images/${imageId}`;
      img.dataset.imageId = imageId;
      img.alt = imageId;
      item.appendChild(img);
      strip.appendChild(item);
    }
    this.root.appendChild(strip);
  }
}
