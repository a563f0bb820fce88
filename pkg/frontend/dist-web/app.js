/** Browser bootstrap: wires DOM events to the store and re-renders.
 *
 * All logic lives in state.ts / render.ts; this file only touches the DOM,
 * so the contract tests can run without a browser.
 */
import { ApiClient } from "./api.js";
import { ChatStore } from "./state.js";
import { renderApp } from "./render.js";
export function startApp(root, apiBase) {
    const base = apiBase ?? ((typeof window !== "undefined" && window.SDE_API_BASE) || "");
    const fetcher = (url, init) => fetch(url, init);
    const api = new ApiClient(base, fetcher);
    const store = new ChatStore(api);
    let schema = null;
    const redraw = () => {
        root.innerHTML = renderApp(store.state, schema);
        const input = document.getElementById("utterance");
        const sendBtn = document.getElementById("send");
        if (sendBtn && input) {
            sendBtn.disabled = !store.canSend || !input.value.trim();
        }
    };
    store.subscribe(redraw);
    root.addEventListener("click", (ev) => {
        const target = ev.target;
        if (target.matches("button.task-option")) {
            const task = target.dataset.task;
            void store.selectTask(task).then(async () => {
                try {
                    schema = await api.getSchema(task);
                }
                catch {
                    schema = null;
                }
                redraw();
            });
        }
        if (target.matches("button.retry, button.retry-send")) {
            void store.retryFailed();
        }
    });
    const form = document.getElementById("composer");
    form?.addEventListener("submit", (ev) => {
        ev.preventDefault();
        const input = document.getElementById("utterance");
        const text = input.value;
        if (!text.trim())
            return;
        input.value = "";
        void store.send(text);
    });
    document.getElementById("utterance")?.addEventListener("input", (ev) => {
        const input = ev.target;
        const sendBtn = document.getElementById("send");
        if (sendBtn)
            sendBtn.disabled = !store.canSend || !input.value.trim();
    });
    void store.loadTasks();
    return store;
}
if (typeof document !== "undefined") {
    const root = document.getElementById("app");
    if (root)
        startApp(root);
}
