/** JSON contracts of the prediction service API. */

export interface TaskInfo {
  task: string;
  domain: string;
}

export interface TasksResponse {
  tasks: TaskInfo[];
}

export interface SchemaNode {
  id: string;
  kind: "system" | "user" | "db";
  text: string;
  action?: string;
}

export interface SchemaDoc {
  task: string;
  domain: string;
  variant: "user_aware" | "system_only";
  start: string;
  nodes: SchemaNode[];
  edges: [string, string][];
}

export interface SessionTurn {
  speaker: "user" | "system" | "db";
  text: string;
  action?: string;
  db_result?: string;
}

export interface SessionDoc {
  session_id: string;
  task: string;
  history: SessionTurn[];
  created: number;
  updated: number;
  model_id: string;
}

export interface RankedAction {
  action: string;
  probability: number;
  template: string | null;
}

export interface Alignment {
  node_id: string;
  node_text: string;
  mass: number;
}

export interface PredictResponse {
  ranked: RankedAction[];
  alignments: Alignment[];
  model_id: string;
  latency: number;
  session?: SessionDoc;
}

export interface ApiError {
  error: { code: string; message: string };
}
