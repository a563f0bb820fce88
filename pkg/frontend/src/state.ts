/** Client-side session state.
 *
 * The server is the source of truth for dialog history: after every
 * settled request the transcript is rebuilt from the returned session
 * document. The client adds only presentation state on top (optimistic
 * pending bubble, failed-send markers, error banner). At most one post is
 * in flight per session; sends issued while one is pending are queued and
 * dispatched in order.
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { PredictResponse, SessionTurn, TaskInfo } from "./types.js";

export type BubbleStatus = "ok" | "pending" | "failed";

export interface Bubble {
  speaker: "user" | "system" | "db";
  text: string;
  status: BubbleStatus;
  action?: string;
}

export interface UiSessionState {
  task: string | null;
  sessionId: string | null;
  transcript: Bubble[];
  lastResponse: PredictResponse | null;
  pending: boolean;
  queued: string[];
  banner: string | null;
  tasks: TaskInfo[];
}

export function initialState(): UiSessionState {
  return {
    task: null,
    sessionId: null,
    transcript: [],
    lastResponse: null,
    pending: false,
    queued: [],
    banner: null,
    tasks: [],
  };
}

function historyToBubbles(history: SessionTurn[]): Bubble[] {
  const bubbles: Bubble[] = [];
  for (const turn of history) {
    bubbles.push({
      speaker: turn.speaker,
      text: turn.text,
      status: "ok",
      action: turn.action,
    });
    if (turn.db_result) {
      bubbles.push({ speaker: "db", text: turn.db_result, status: "ok" });
    }
  }
  return bubbles;
}

export function groupByDomain(tasks: TaskInfo[]): Map<string, TaskInfo[]> {
  const groups = new Map<string, TaskInfo[]>();
  for (const t of tasks) {
    const list = groups.get(t.domain) ?? [];
    list.push(t);
    groups.set(t.domain, list);
  }
  return groups;
}

export class ChatStore {
  state: UiSessionState = initialState();
  private listeners: Array<(s: UiSessionState) => void> = [];
  private failedTexts: Bubble[] = [];

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: (s: UiSessionState) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const l of this.listeners) l(this.state);
  }

  async loadTasks(): Promise<void> {
    try {
      const resp = await this.api.listTasks();
      this.state = { ...this.state, tasks: resp.tasks, banner: null };
    } catch (err) {
      this.state = {
        ...this.state,
        banner: `could not load tasks: ${(err as Error).message}`,
      };
    }
    this.notify();
  }

  async selectTask(task: string): Promise<void> {
    try {
      const session = await this.api.createSession(task);
      this.state = {
        ...this.state,
        task,
        sessionId: session.session_id,
        transcript: historyToBubbles(session.history),
        lastResponse: null,
        pending: false,
        queued: [],
        banner: null,
      };
      this.failedTexts = [];
    } catch (err) {
      this.state = {
        ...this.state,
        banner: `could not create session: ${(err as Error).message}`,
      };
    }
    this.notify();
  }

  get canSend(): boolean {
    return this.state.sessionId !== null;
  }

  /** Queue-or-send; empty input is a no-op (the send control is disabled). */
  async send(text: string): Promise<void> {
    if (!text.trim() || !this.state.sessionId) return;
    if (this.state.pending) {
      this.state = { ...this.state, queued: [...this.state.queued, text] };
      this.notify();
      return;
    }
    await this.dispatch(text);
    while (this.state.queued.length > 0 && !this.state.pending) {
      const [next, ...rest] = this.state.queued;
      this.state = { ...this.state, queued: rest };
      await this.dispatch(next);
    }
  }

  async retryFailed(): Promise<void> {
    const failed = this.state.transcript.filter((b) => b.status === "failed");
    this.failedTexts = [];
    for (const bubble of failed) {
      await this.send(bubble.text);
    }
  }

  private rebuildTranscript(): Bubble[] {
    const base =
      this.state.lastResponse?.session !== undefined
        ? historyToBubbles(this.state.lastResponse.session.history)
        : this.state.transcript.filter((b) => b.status === "ok");
    return [...base, ...this.failedTexts];
  }

  private async dispatch(text: string): Promise<void> {
    const optimistic: Bubble = { speaker: "user", text, status: "pending" };
    this.state = {
      ...this.state,
      pending: true,
      transcript: [...this.rebuildTranscript(), optimistic],
    };
    this.notify();
    try {
      const resp = await this.api.postUtterance(this.state.sessionId as string, text);
      this.state = {
        ...this.state,
        pending: false,
        lastResponse: resp,
        banner: null,
        transcript: resp.session
          ? [...historyToBubbles(resp.session.history), ...this.failedTexts]
          : this.state.transcript,
      };
    } catch (err) {
      const failedBubble: Bubble = { speaker: "user", text, status: "failed" };
      this.failedTexts = [...this.failedTexts, failedBubble];
      const reason =
        err instanceof ApiRequestError ? `${err.code}: ${err.message}` : `${err}`;
      this.state = {
        ...this.state,
        pending: false,
        banner: `send failed (${reason})`,
        transcript: [
          ...this.state.transcript.filter((b) => b.status !== "pending"),
          failedBubble,
        ],
      };
    }
    this.notify();
  }
}
