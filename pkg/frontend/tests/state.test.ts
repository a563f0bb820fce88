import assert from "node:assert/strict";
import { after, before, describe, it } from "node:test";

import { ApiClient, Fetcher } from "../src/api.js";
import { ChatStore, groupByDomain, initialState } from "../src/state.js";
import { MockServer, startMockServer, FIXTURE_TASKS } from "./mock_server.js";

const nodeFetch: Fetcher = (url, init) => fetch(url, init);

describe("chat store against the mock server", () => {
  let server: MockServer;

  before(async () => {
    server = await startMockServer();
  });

  after(async () => {
    await server.close();
  });

  function freshStore(): ChatStore {
    return new ChatStore(new ApiClient(server.baseUrl, nodeFetch));
  }

  it("loads and groups tasks by domain", async () => {
    const store = freshStore();
    await store.loadTasks();
    assert.equal(store.state.tasks.length, FIXTURE_TASKS.length);
    const groups = groupByDomain(store.state.tasks);
    assert.deepEqual([...groups.keys()].sort(), ["accounts", "services"]);
    assert.equal(groups.get("services")?.length, 2);
  });

  it("task selection creates a session with the greeting", async () => {
    const store = freshStore();
    await store.selectTask("booking");
    assert.ok(store.state.sessionId);
    assert.equal(store.state.task, "booking");
    assert.equal(store.state.transcript.length, 1);
    assert.equal(store.state.transcript[0].speaker, "system");
    assert.equal(store.state.banner, null);
  });

  it("unknown task sets an error banner without crashing", async () => {
    const store = freshStore();
    await store.selectTask("nope");
    assert.equal(store.state.sessionId, null);
    assert.match(store.state.banner ?? "", /unknown task/);
  });

  it("three send/receive rounds keep the transcript invariant", async () => {
    const store = freshStore();
    await store.selectTask("booking");
    const initial = store.state.transcript.length;
    for (const text of ["round one", "round two", "round three"]) {
      await store.send(text);
    }
    assert.equal(store.state.transcript.length, initial + 2 * 3);
    assert.equal(store.state.pending, false);
    // transcript mirrors server history exactly
    const serverHistory = server.state.sessions.get(
      store.state.sessionId as string,
    )?.history;
    assert.equal(serverHistory?.length, initial + 2 * 3);
    assert.deepEqual(
      store.state.transcript.map((b) => b.text),
      serverHistory?.map((t) => t.text),
    );
    assert.ok(store.state.lastResponse);
  });

  it("rapid double-send queues the second until the first settles", async () => {
    const store = freshStore();
    await store.selectTask("booking");
    const initial = store.state.transcript.length;
    const first = store.send("first message");
    const second = store.send("second message");
    // while the first is in flight the second sits in the queue
    assert.equal(store.state.pending, true);
    assert.deepEqual(store.state.queued, ["second message"]);
    await Promise.all([first, second]);
    assert.equal(store.state.queued.length, 0);
    assert.equal(store.state.transcript.length, initial + 4);
    const texts = store.state.transcript.map((b) => b.text);
    assert.ok(texts.indexOf("first message") < texts.indexOf("second message"));
  });

  it("empty input is a no-op", async () => {
    const store = freshStore();
    await store.selectTask("booking");
    const before_len = store.state.transcript.length;
    await store.send("   ");
    assert.equal(store.state.transcript.length, before_len);
  });

  it("failed sends mark the bubble and surface a banner; retry recovers", async () => {
    const store = freshStore();
    await store.selectTask("booking");
    const initial = store.state.transcript.length;
    await store.send("FAIL");
    assert.match(store.state.banner ?? "", /send failed/);
    const failed = store.state.transcript.filter((b) => b.status === "failed");
    assert.equal(failed.length, 1);
    assert.equal(failed[0].text, "FAIL");
    // server history unchanged by the failed post
    const serverHistory = server.state.sessions.get(
      store.state.sessionId as string,
    )?.history;
    assert.equal(serverHistory?.length, initial);
    // a later successful send clears the pending path and keeps ordering
    await store.send("recovered");
    assert.equal(store.state.banner, null);
    assert.equal(
      store.state.transcript.filter((b) => b.status === "ok").length,
      initial + 2,
    );
  });

  it("server unreachable surfaces a banner instead of throwing", async () => {
    const store = new ChatStore(
      new ApiClient("http://127.0.0.1:9", nodeFetch),
    );
    await store.loadTasks();
    assert.match(store.state.banner ?? "", /could not load tasks/);
    assert.deepEqual(store.state.tasks, []);
  });

  it("initial state is inert", () => {
    const state = initialState();
    assert.equal(state.sessionId, null);
    assert.equal(state.pending, false);
    assert.deepEqual(state.transcript, []);
  });
});
