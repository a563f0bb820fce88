/** In-process mock of the prediction service API.
 *
 * Implements the published JSON contracts (tasks, schema, session,
 * utterance, errors) with canned fixtures so the UI can be exercised with
 * no engine build. Special utterance "FAIL" returns a 500 to drive the
 * failure-banner paths.
 */

import * as http from "node:http";
import { AddressInfo } from "node:net";
import {
  PredictResponse,
  SchemaDoc,
  SessionDoc,
  SessionTurn,
  TaskInfo,
} from "../src/types.js";

export const FIXTURE_TASKS: TaskInfo[] = [
  { task: "booking", domain: "services" },
  { task: "repair", domain: "services" },
  { task: "balance", domain: "accounts" },
  { task: "audit", domain: "accounts" },
];

export const FIXTURE_SCHEMA: SchemaDoc = {
  task: "booking",
  domain: "services",
  variant: "user_aware",
  start: "sys_hello",
  nodes: [
    { id: "sys_hello", kind: "system", text: "welcome !", action: "hello" },
    { id: "u_open", kind: "user", text: "i need a booking" },
    { id: "sys_ask_date", kind: "system", text: "what date ?", action: "ask_date" },
    { id: "u_date", kind: "user", text: "the date is [DATE]" },
    { id: "sys_query", kind: "system", text: "let me check", action: "query" },
    { id: "db_result", kind: "db", text: "RESULT: [DATA]" },
    { id: "sys_inform", kind: "system", text: "here you go", action: "inform" },
  ],
  edges: [
    ["sys_hello", "u_open"],
    ["u_open", "sys_ask_date"],
    ["sys_ask_date", "u_date"],
    ["u_date", "sys_query"],
    ["sys_query", "db_result"],
    ["db_result", "sys_inform"],
  ],
};

export const FIXTURE_PREDICTION: Omit<PredictResponse, "session"> = {
  ranked: [
    { action: "ask_date", probability: 0.62, template: "what date ?" },
    { action: "query", probability: 0.21, template: "let me check" },
    { action: "inform", probability: 0.09, template: "here you go" },
    { action: "hello", probability: 0.05, template: "welcome !" },
    { action: "goodbye", probability: 0.02, template: "bye !" },
    { action: "anything_else", probability: 0.01, template: "anything else ?" },
  ],
  alignments: [
    { node_id: "u_open", node_text: "[USER] i need a booking", mass: 0.55 },
    { node_id: "u_date", node_text: "[SYSTEM] what date ? [USER] the date is [DATE]", mass: 0.3 },
    { node_id: "db_result", node_text: "[SYSTEM] let me check [DB] RESULT: [DATA]", mass: 0.1 },
  ],
  model_id: "mock-model",
  latency: 0.001,
};

interface MockState {
  sessions: Map<string, SessionDoc>;
  sessionCounter: number;
  requestLog: string[];
}

function sendJson(res: http.ServerResponse, status: number, body: unknown): void {
  const payload = JSON.stringify(body);
  res.writeHead(status, {
    "content-type": "application/json",
    "access-control-allow-origin": "*",
  });
  res.end(payload);
}

function sendError(
  res: http.ServerResponse,
  status: number,
  code: string,
  message: string,
): void {
  sendJson(res, status, { error: { code, message } });
}

async function readBody(req: http.IncomingMessage): Promise<Record<string, unknown>> {
  const chunks: Buffer[] = [];
  for await (const chunk of req) chunks.push(chunk as Buffer);
  const raw = Buffer.concat(chunks).toString("utf-8");
  return raw ? JSON.parse(raw) : {};
}

export interface MockServer {
  baseUrl: string;
  state: MockState;
  close(): Promise<void>;
}

export async function startMockServer(): Promise<MockServer> {
  const state: MockState = { sessions: new Map(), sessionCounter: 0, requestLog: [] };

  const server = http.createServer(async (req, res) => {
    const url = req.url ?? "/";
    state.requestLog.push(`${req.method} ${url}`);
    try {
      if (req.method === "GET" && url === "/api/tasks") {
        return sendJson(res, 200, { tasks: FIXTURE_TASKS });
      }
      const schemaMatch = url.match(/^\/api\/schema\/([^/]+)$/);
      if (req.method === "GET" && schemaMatch) {
        const task = decodeURIComponent(schemaMatch[1]);
        if (!FIXTURE_TASKS.some((t) => t.task === task)) {
          return sendError(res, 404, "unknown_task", `unknown task '${task}'`);
        }
        return sendJson(res, 200, { ...FIXTURE_SCHEMA, task });
      }
      if (req.method === "POST" && url === "/api/session") {
        const body = await readBody(req);
        const task = body.task as string | undefined;
        if (!task) return sendError(res, 400, "validation", "body must include 'task'");
        if (!FIXTURE_TASKS.some((t) => t.task === task)) {
          return sendError(res, 404, "unknown_task", `unknown task '${task}'`);
        }
        state.sessionCounter += 1;
        const session: SessionDoc = {
          session_id: `mock-${state.sessionCounter}`,
          task,
          history: [{ speaker: "system", text: "welcome !", action: "hello" }],
          created: 1000,
          updated: 1000,
          model_id: "mock-model",
        };
        state.sessions.set(session.session_id, session);
        return sendJson(res, 200, session);
      }
      const sessionMatch = url.match(/^\/api\/session\/([^/]+)$/);
      if (req.method === "GET" && sessionMatch) {
        const session = state.sessions.get(decodeURIComponent(sessionMatch[1]));
        if (!session) return sendError(res, 404, "unknown_session", "unknown session");
        return sendJson(res, 200, session);
      }
      const utterMatch = url.match(/^\/api\/session\/([^/]+)\/utterance$/);
      if (req.method === "POST" && utterMatch) {
        const session = state.sessions.get(decodeURIComponent(utterMatch[1]));
        if (!session) return sendError(res, 404, "unknown_session", "unknown session");
        const body = await readBody(req);
        const text = (body.text as string | undefined) ?? "";
        if (!text.trim()) {
          return sendError(res, 400, "validation", "'text' must be non-empty");
        }
        if (text === "FAIL") {
          return sendError(res, 500, "model_error", "synthetic failure for tests");
        }
        const top = FIXTURE_PREDICTION.ranked[0];
        const userTurn: SessionTurn = { speaker: "user", text };
        const systemTurn: SessionTurn = {
          speaker: "system",
          text: top.template ?? top.action,
          action: top.action,
        };
        session.history = [...session.history, userTurn, systemTurn];
        session.updated += 1;
        const resp: PredictResponse = { ...FIXTURE_PREDICTION, session };
        return sendJson(res, 200, resp);
      }
      if (req.method === "GET" && url === "/healthz") {
        return sendJson(res, 200, { status: "ok", tasks: FIXTURE_TASKS.length });
      }
      sendError(res, 404, "not_found", `no route for ${req.method} ${url}`);
    } catch (err) {
      sendError(res, 500, "mock_error", String(err));
    }
  });

  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const address = server.address() as AddressInfo;
  return {
    baseUrl: `http://127.0.0.1:${address.port}`,
    state,
    close: () =>
      new Promise<void>((resolve, reject) =>
        server.close((err) => (err ? reject(err) : resolve())),
      ),
  };
}
