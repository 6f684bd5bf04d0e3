import {
  ApiError,
  connectStream,
  control,
  createSession,
  getScenario,
  getScenarioBytes,
  putScenario,
  sendEdit,
} from "./api.js";
import { gestureToOp, DEFAULT_PICK_RADIUS } from "./editor.js";
import { renderScene, screenToWorld } from "./render.js";
import { DrawCmd, EditOp, Gesture, ScenarioDoc, SiteDoc, TickMessage, Tool, ViewState } from "./types.js";

const DRAG_THRESHOLD_PX = 4;
const ZOOM_STEP = 1.1;

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusLine = document.getElementById("status")!;
const errorLine = document.getElementById("error")!;

let sessionId = "";
let scenario: ScenarioDoc | null = null;
let lastMsg: TickMessage | null = null;
let socket: WebSocket | null = null;
let frameQueued = false;

const view: ViewState = {
  tool: "demo",
  showCells: true,
  showCell: false,
  showPrefetch: true,
  showCircles: true,
  scale: 1,
  tx: 0,
  ty: 0,
  connected: false,
};

function draw(commands: DrawCmd[]): void {
  for (const cmd of commands) {
    switch (cmd.kind) {
      case "clear":
        ctx.fillStyle = cmd.color;
        ctx.fillRect(0, 0, canvas.width, canvas.height);
        break;
      case "polygon":
        ctx.globalAlpha = cmd.alpha;
        ctx.fillStyle = cmd.fill;
        ctx.beginPath();
        cmd.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
        ctx.closePath();
        ctx.fill();
        ctx.globalAlpha = 1;
        break;
      case "polyline":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = cmd.width;
        ctx.setLineDash(cmd.dash ?? []);
        ctx.beginPath();
        cmd.points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
        ctx.stroke();
        ctx.setLineDash([]);
        break;
      case "segment":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = cmd.width;
        ctx.beginPath();
        ctx.moveTo(cmd.a.x, cmd.a.y);
        ctx.lineTo(cmd.b.x, cmd.b.y);
        ctx.stroke();
        break;
      case "dot":
        ctx.fillStyle = cmd.color;
        ctx.beginPath();
        ctx.arc(cmd.at.x, cmd.at.y, cmd.radius, 0, 2 * Math.PI);
        ctx.fill();
        break;
      case "square":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = 2;
        ctx.strokeRect(cmd.at.x - cmd.size / 2, cmd.at.y - cmd.size / 2, cmd.size, cmd.size);
        break;
      case "circle":
        ctx.strokeStyle = cmd.color;
        ctx.lineWidth = 1.5;
        ctx.beginPath();
        ctx.arc(cmd.at.x, cmd.at.y, Math.max(cmd.radius, 0), 0, 2 * Math.PI);
        ctx.stroke();
        break;
      case "label":
        ctx.fillStyle = cmd.color;
        ctx.font = "12px sans-serif";
        ctx.fillText(cmd.text, cmd.at.x, cmd.at.y);
        break;
    }
  }
}

function scheduleDraw(): void {
  if (frameQueued || !scenario) {
    return;
  }
  frameQueued = true;
  requestAnimationFrame(() => {
    frameQueued = false;
    if (scenario) {
      draw(renderScene(lastMsg, scenario, view));
    }
  });
}

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function showError(text: string): void {
  errorLine.textContent = text;
  if (text) {
    window.setTimeout(() => {
      if (errorLine.textContent === text) {
        errorLine.textContent = "";
      }
    }, 4000);
  }
}

function fitView(): void {
  if (!scenario) {
    return;
  }
  const [x0, y0, x1, y1] = scenario.bbox;
  const margin = 0.92;
  view.scale = margin * Math.min(canvas.width / (x1 - x0), canvas.height / (y1 - y0));
  view.tx = (canvas.width - (x0 + x1) * view.scale) / 2;
  view.ty = (canvas.height - (y0 + y1) * view.scale) / 2;
}

function reconnect(): void {
  socket?.close();
  socket = connectStream(sessionId, view.showCell && scenario?.mode === "plane", {
    onTick: (msg) => {
      lastMsg = msg;
      setStatus(`t=${msg.t}  event=${msg.event}  ${msg.valid ? "valid" : "invalid"}`);
      scheduleDraw();
    },
    onComplete: (t) => setStatus(`finished at t=${t}`),
    onStatus: (connected) => {
      view.connected = connected;
      document.getElementById("conn")!.textContent = connected ? "connected" : "disconnected";
    },
  });
}

async function refreshScenario(): Promise<void> {
  scenario = await getScenario(sessionId);
  (document.getElementById("k") as HTMLInputElement).value = String(scenario.k);
  (document.getElementById("rho") as HTMLInputElement).value = String(scenario.rho);
  scheduleDraw();
}

async function newSession(mode: string): Promise<void> {
  sessionId = await createSession(mode);
  lastMsg = null;
  await refreshScenario();
  fitView();
  reconnect();
  setStatus(`new ${mode} session`);
  scheduleDraw();
}

// optimistic echo for the cheap local cases; everything reconciles with a
// scenario refresh once the server acks
function applyLocal(doc: ScenarioDoc, op: EditOp): ScenarioDoc {
  const next = structuredClone(doc);
  if (doc.mode === "plane") {
    const sites = next.sites as SiteDoc[];
    if (op.op === "add_site" && "x" in op) {
      sites.push({ id: op.id, x: op.x, y: op.y });
    } else if (op.op === "move_site" && "x" in op) {
      const s = sites.find((s) => s.id === op.id);
      if (s) {
        s.x = op.x;
        s.y = op.y;
      }
    } else if (op.op === "delete_site" && "id" in op) {
      next.sites = sites.filter((s) => s.id !== op.id);
    }
  }
  return next;
}

async function performEdit(op: EditOp): Promise<void> {
  if (!scenario) {
    return;
  }
  const before = scenario;
  scenario = applyLocal(scenario, op);
  scheduleDraw();
  try {
    await sendEdit(sessionId, op);
    await refreshScenario();
  } catch (err) {
    scenario = before;
    scheduleDraw();
    showError(err instanceof ApiError ? `${err.field}: ${err.message}` : String(err));
  }
}

interface PointerTrack {
  startX: number;
  startY: number;
  panning: boolean;
  moved: boolean;
}

let track: PointerTrack | null = null;

canvas.addEventListener("pointerdown", (ev) => {
  track = {
    startX: ev.offsetX,
    startY: ev.offsetY,
    panning: view.tool === "demo" || ev.button === 1,
    moved: false,
  };
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (!track) {
    return;
  }
  const dx = ev.offsetX - track.startX;
  const dy = ev.offsetY - track.startY;
  if (Math.abs(dx) + Math.abs(dy) > DRAG_THRESHOLD_PX) {
    track.moved = true;
  }
  if (track.panning && track.moved) {
    view.tx += ev.movementX;
    view.ty += ev.movementY;
    scheduleDraw();
  }
});

canvas.addEventListener("pointerup", (ev) => {
  if (!track || !scenario) {
    track = null;
    return;
  }
  const t = track;
  track = null;
  if (t.panning) {
    return;
  }
  const start = screenToWorld({ x: t.startX, y: t.startY }, view);
  const end = screenToWorld({ x: ev.offsetX, y: ev.offsetY }, view);
  let gesture: Gesture;
  if (ev.button === 2) {
    gesture = { kind: "rightclick", at: end };
  } else if (t.moved) {
    gesture = { kind: "drag", from: start, to: end };
  } else {
    gesture = { kind: "click", at: end };
  }
  const result = gestureToOp(gesture, view.tool, scenario, DEFAULT_PICK_RADIUS / view.scale);
  if (result.op) {
    void performEdit(result.op);
  } else if (result.reason && view.tool !== "demo") {
    showError(result.reason);
  }
});

canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = ev.deltaY < 0 ? ZOOM_STEP : 1 / ZOOM_STEP;
  // zoom about the cursor so the point under it stays put
  view.tx = ev.offsetX - factor * (ev.offsetX - view.tx);
  view.ty = ev.offsetY - factor * (ev.offsetY - view.ty);
  view.scale *= factor;
  scheduleDraw();
});

function bindPanel(): void {
  const modeSelect = document.getElementById("mode") as HTMLSelectElement;
  document.getElementById("new-session")!.addEventListener("click", () => {
    void newSession(modeSelect.value).catch((err) => showError(String(err)));
  });

  for (const tool of ["node", "site", "trajectory", "demo"] as Tool[]) {
    document.getElementById(`tool-${tool}`)!.addEventListener("change", () => {
      view.tool = tool;
    });
  }

  const toggles: [string, (on: boolean) => void][] = [
    ["show-cells", (on) => (view.showCells = on)],
    ["show-prefetch", (on) => (view.showPrefetch = on)],
    ["show-circles", (on) => (view.showCircles = on)],
    ["show-cell", (on) => {
      view.showCell = on;
      reconnect(); // cell data is opt-in on the stream itself
    }],
  ];
  for (const [id, apply] of toggles) {
    document.getElementById(id)!.addEventListener("change", (ev) => {
      apply((ev.target as HTMLInputElement).checked);
      scheduleDraw();
    });
  }

  document.getElementById("start")!.addEventListener("click", () => {
    void control(sessionId, "start").catch((err) => showError(String(err)));
  });
  document.getElementById("pause")!.addEventListener("click", () => {
    void control(sessionId, "pause").catch((err) => showError(String(err)));
  });
  document.getElementById("step")!.addEventListener("click", () => {
    void control(sessionId, "step").catch((err) =>
      showError(err instanceof ApiError ? err.message : String(err)));
  });

  const speed = document.getElementById("speed") as HTMLInputElement;
  speed.addEventListener("change", () => {
    void control(sessionId, "set_speed", Number(speed.value)).catch((err) => showError(String(err)));
  });

  // k and rho changes rebuild the scenario server-side and reset the run
  for (const field of ["k", "rho"] as const) {
    const input = document.getElementById(field) as HTMLInputElement;
    input.addEventListener("change", () => {
      if (!scenario) {
        return;
      }
      const doc = structuredClone(scenario);
      doc[field] = Number(input.value);
      putScenario(sessionId, doc)
        .then(() => refreshScenario())
        .catch((err) => {
          showError(err instanceof ApiError ? `${err.field}: ${err.message}` : String(err));
          void refreshScenario();
        });
    });
  }

  document.getElementById("save")!.addEventListener("click", () => {
    void getScenarioBytes(sessionId).then((blob) => {
      const a = document.createElement("a");
      a.href = URL.createObjectURL(blob);
      a.download = "scenario.json";
      a.click();
      URL.revokeObjectURL(a.href);
    });
  });

  const fileInput = document.getElementById("read") as HTMLInputElement;
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (!file) {
      return;
    }
    void file.text().then((text) =>
      putScenario(sessionId, text)
        .then(() => {
          lastMsg = null;
          return refreshScenario();
        })
        .then(() => fitView())
        .catch((err) =>
          showError(err instanceof ApiError ? `${err.field}: ${err.message}` : String(err))),
    );
    fileInput.value = "";
  });
}

function resize(): void {
  const box = canvas.parentElement!;
  canvas.width = box.clientWidth;
  canvas.height = box.clientHeight;
  fitView();
  scheduleDraw();
}

window.addEventListener("resize", resize);

bindPanel();
resize();
void newSession("plane").catch((err) => showError(`no server? ${err}`));
