/** Client-side session state.
 *
 * The server is the source of truth for dialog history: after every
 * settled request the transcript is rebuilt from the returned session
 * document. The client adds only presentation state on top (optimistic
 * pending bubble, failed-send markers, error banner). At most one post is
 * in flight per session; sends issued while one is pending are queued and
 * dispatched in order.
 */
import { ApiRequestError } from "./api.js";
export function initialState() {
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
function historyToBubbles(history) {
    const bubbles = [];
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
export function groupByDomain(tasks) {
    const groups = new Map();
    for (const t of tasks) {
        const list = groups.get(t.domain) ?? [];
        list.push(t);
        groups.set(t.domain, list);
    }
    return groups;
}
export class ChatStore {
    constructor(api) {
        this.api = api;
        this.state = initialState();
        this.listeners = [];
        this.failedTexts = [];
    }
    subscribe(listener) {
        this.listeners.push(listener);
    }
    notify() {
        for (const l of this.listeners)
            l(this.state);
    }
    async loadTasks() {
        try {
            const resp = await this.api.listTasks();
            this.state = { ...this.state, tasks: resp.tasks, banner: null };
        }
        catch (err) {
            this.state = {
                ...this.state,
                banner: `could not load tasks: ${err.message}`,
            };
        }
        this.notify();
    }
    async selectTask(task) {
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
        }
        catch (err) {
            this.state = {
                ...this.state,
                banner: `could not create session: ${err.message}`,
            };
        }
        this.notify();
    }
    get canSend() {
        return this.state.sessionId !== null;
    }
    /** Queue-or-send; empty input is a no-op (the send control is disabled). */
    async send(text) {
        if (!text.trim() || !this.state.sessionId)
            return;
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
    async retryFailed() {
        const failed = this.state.transcript.filter((b) => b.status === "failed");
        this.failedTexts = [];
        for (const bubble of failed) {
            await this.send(bubble.text);
        }
    }
    rebuildTranscript() {
        const base = this.state.lastResponse?.session !== undefined
            ? historyToBubbles(this.state.lastResponse.session.history)
            : this.state.transcript.filter((b) => b.status === "ok");
        return [...base, ...this.failedTexts];
    }
    async dispatch(text) {
        const optimistic = { speaker: "user", text, status: "pending" };
        this.state = {
            ...this.state,
            pending: true,
            transcript: [...this.rebuildTranscript(), optimistic],
        };
        this.notify();
        try {
            const resp = await this.api.postUtterance(this.state.sessionId, text);
            this.state = {
                ...this.state,
                pending: false,
                lastResponse: resp,
                banner: null,
                transcript: resp.session
                    ? [...historyToBubbles(resp.session.history), ...this.failedTexts]
                    : this.state.transcript,
            };
        }
        catch (err) {
            const failedBubble = { speaker: "user", text, status: "failed" };
            this.failedTexts = [...this.failedTexts, failedBubble];
            const reason = err instanceof ApiRequestError ? `${err.code}: ${err.message}` : `${err}`;
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
