/** Thin typed client over the service HTTP API.
 *
 * The fetch implementation is injected so tests can point the client at a
 * mock server (or simulate network failure) without touching globals.
 */
export class ApiRequestError extends Error {
    constructor(status, code, message) {
        super(message);
        this.status = status;
        this.code = code;
    }
}
export class ApiClient {
    constructor(baseUrl, fetcher) {
        this.baseUrl = baseUrl;
        this.fetcher = fetcher;
    }
    async request(path, init) {
        let resp;
        try {
            resp = await this.fetcher(this.baseUrl + path, init);
        }
        catch (err) {
            throw new ApiRequestError(0, "unreachable", `server unreachable: ${err}`);
        }
        const body = (await resp.json());
        if (resp.status >= 400) {
            const apiErr = body;
            const code = apiErr?.error?.code ?? "http_error";
            const message = apiErr?.error?.message ?? `HTTP ${resp.status}`;
            throw new ApiRequestError(resp.status, code, message);
        }
        return body;
    }
    post(path, payload) {
        return this.request(path, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: JSON.stringify(payload),
        });
    }
    listTasks() {
        return this.request("/api/tasks");
    }
    getSchema(task) {
        return this.request(`/api/schema/${encodeURIComponent(task)}`);
    }
    createSession(task) {
        return this.post("/api/session", { task });
    }
    getSession(sessionId) {
        return this.request(`/api/session/${encodeURIComponent(sessionId)}`);
    }
    postUtterance(sessionId, text) {
        return this.post(`/api/session/${encodeURIComponent(sessionId)}/utterance`, { text });
    }
}
