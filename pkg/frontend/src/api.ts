import { EditOp, ScenarioDoc, TickMessage } from "./types.js";

export interface SessionInfo {
  id: string;
  status: "idle" | "running" | "paused";
  mode: string;
  t: number | null;
  speed_multiplier: number;
}

export class ApiError extends Error {
  field: string;

  constructor(field: string, message: string) {
    super(message);
    this.field = field;
  }
}

async function check(resp: Response): Promise<Response> {
  if (resp.ok) {
    return resp;
  }
  let field = "request";
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "object") {
      field = body.detail.field ?? field;
      message = body.detail.message ?? message;
    } else if (body && typeof body.detail === "string") {
      message = body.detail;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(field, message);
}

export async function createSession(mode: string): Promise<string> {
  const resp = await check(
    await fetch("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ mode }),
    }),
  );
  return (await resp.json()).id;
}

export async function getScenario(sid: string): Promise<ScenarioDoc> {
  const resp = await check(await fetch(`/api/sessions/${sid}/scenario`));
  return (await resp.json()) as ScenarioDoc;
}

export async function getScenarioBytes(sid: string): Promise<Blob> {
  const resp = await check(await fetch(`/api/sessions/${sid}/scenario`));
  return resp.blob();
}

export async function putScenario(sid: string, doc: ScenarioDoc | string): Promise<SessionInfo> {
  const body = typeof doc === "string" ? doc : JSON.stringify(doc);
  const resp = await check(
    await fetch(`/api/sessions/${sid}/scenario`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body,
    }),
  );
  return resp.json();
}

export async function sendEdit(sid: string, op: EditOp): Promise<SessionInfo> {
  const resp = await check(
    await fetch(`/api/sessions/${sid}/edit`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(op),
    }),
  );
  return resp.json();
}

export async function control(
  sid: string,
  cmd: "start" | "pause" | "step" | "set_speed",
  value?: number,
): Promise<SessionInfo> {
  const body: Record<string, unknown> = { cmd };
  if (value !== undefined) {
    body.value = value;
  }
  const resp = await check(
    await fetch(`/api/sessions/${sid}/control`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }),
  );
  return resp.json();
}

export interface StreamHandlers {
  onTick: (msg: TickMessage) => void;
  onComplete: (t: number) => void;
  onStatus: (connected: boolean) => void;
}

export function connectStream(sid: string, wantCell: boolean, handlers: StreamHandlers): WebSocket {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const suffix = wantCell ? "?cell=1" : "";
  const ws = new WebSocket(`${proto}://${location.host}/ws/sessions/${sid}${suffix}`);
  ws.onopen = () => handlers.onStatus(true);
  ws.onclose = () => handlers.onStatus(false);
  ws.onmessage = (event: MessageEvent) => {
    const data = JSON.parse(event.data);
    if (data.complete) {
      handlers.onComplete(data.t);
    } else {
      handlers.onTick(data as TickMessage);
    }
  };
  return ws;
}
