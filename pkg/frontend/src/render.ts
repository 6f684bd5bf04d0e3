import {
  DrawCmd,
  EdgeDoc,
  Pt,
  ScenarioDoc,
  SiteDoc,
  TickMessage,
  ViewState,
} from "./types.js";

// Marker semantics are fixed: sites are orange dots, the query object a red
// dot, current neighbors green dots, influential neighbors yellow dots,
// prefetched members get green squares, the current cell is cyan and turns
// red the moment it is invalid, and the two enclosing radii are a green and
// a red circle.
export const COLORS = {
  background: "#ffffff",
  bboxFrame: "#cbd5e1",
  edge: "#94a3b8",
  edgeKnn: "#16a34a",
  edgeIns: "#eab308",
  trajectory: "#64748b",
  site: "#f97316",
  query: "#dc2626",
  knn: "#16a34a",
  ins: "#eab308",
  prefetchBox: "#16a34a",
  cellValid: "#22d3ee",
  cellInvalid: "#dc2626",
  circleGreen: "#16a34a",
  circleRed: "#dc2626",
} as const;

export const DOT_RADIUS = 4;
export const QUERY_RADIUS = 5;
export const PREFETCH_BOX = 14;
const CELL_ALPHA = 0.35;

export function worldToScreen(p: Pt, view: ViewState): Pt {
  return { x: p.x * view.scale + view.tx, y: p.y * view.scale + view.ty };
}

export function screenToWorld(p: Pt, view: ViewState): Pt {
  return { x: (p.x - view.tx) / view.scale, y: (p.y - view.ty) / view.scale };
}

export function vertexById(scenario: ScenarioDoc): Map<number, Pt> {
  const out = new Map<number, Pt>();
  for (const v of scenario.graph?.vertices ?? []) {
    out.set(v.id, { x: v.x, y: v.y });
  }
  return out;
}

/** World position of every site, keyed by id (vertex id in network mode). */
export function sitePositions(scenario: ScenarioDoc): Map<number, Pt> {
  const out = new Map<number, Pt>();
  if (scenario.mode === "plane") {
    for (const s of scenario.sites as SiteDoc[]) {
      out.set(s.id, { x: s.x, y: s.y });
    }
    return out;
  }
  const verts = vertexById(scenario);
  for (const vid of scenario.sites as number[]) {
    const p = verts.get(vid);
    if (p) {
      out.set(vid, p);
    }
  }
  return out;
}

/** World position of the streamed query point. */
export function queryPosition(msg: TickMessage, scenario: ScenarioDoc): Pt | null {
  const pos = msg.pos;
  if (Array.isArray(pos)) {
    return { x: pos[0], y: pos[1] };
  }
  const edge = scenario.graph?.edges.find((e) => e.id === pos.edge);
  if (!edge) {
    return null;
  }
  const verts = vertexById(scenario);
  const u = verts.get(edge.u);
  const v = verts.get(edge.v);
  if (!u || !v) {
    return null;
  }
  const f = edge.length > 0 ? Math.min(Math.max(pos.offset / edge.length, 0), 1) : 0;
  return { x: u.x + f * (v.x - u.x), y: u.y + f * (v.y - u.y) };
}

function trajectoryPoints(scenario: ScenarioDoc): Pt[] {
  if ("plane" in scenario.trajectory) {
    return scenario.trajectory.plane.map(([x, y]) => ({ x, y }));
  }
  const verts = vertexById(scenario);
  const out: Pt[] = [];
  for (const vid of scenario.trajectory.network) {
    const p = verts.get(vid);
    if (p) {
      out.push(p);
    }
  }
  return out;
}

function edgeColor(e: EdgeDoc, knn: Set<number>, ins: Set<number>, view: ViewState): string {
  if (!view.showCells) {
    return COLORS.edge;
  }
  if (knn.has(e.u) || knn.has(e.v)) {
    return COLORS.edgeKnn;
  }
  if (ins.has(e.u) || ins.has(e.v)) {
    return COLORS.edgeIns;
  }
  return COLORS.edge;
}

/** Pure scene builder: same (message, scenario, view) in, same commands out. */
export function renderScene(
  msg: TickMessage | null,
  scenario: ScenarioDoc,
  view: ViewState,
): DrawCmd[] {
  const cmds: DrawCmd[] = [{ kind: "clear", color: COLORS.background }];
  const toScreen = (p: Pt) => worldToScreen(p, view);
  const knn = new Set(msg?.knn ?? []);
  const ins = new Set(msg?.ins ?? []);
  const prefetch = new Set(msg?.prefetch ?? []);

  if (msg?.cell && view.showCell && msg.cell.length >= 3) {
    cmds.push({
      kind: "polygon",
      points: msg.cell.map(([x, y]) => toScreen({ x, y })),
      fill: msg.valid ? COLORS.cellValid : COLORS.cellInvalid,
      alpha: CELL_ALPHA,
    });
  }

  if (scenario.mode === "plane") {
    const [x0, y0, x1, y1] = scenario.bbox;
    cmds.push({
      kind: "polyline",
      points: [
        toScreen({ x: x0, y: y0 }),
        toScreen({ x: x1, y: y0 }),
        toScreen({ x: x1, y: y1 }),
        toScreen({ x: x0, y: y1 }),
        toScreen({ x: x0, y: y0 }),
      ],
      color: COLORS.bboxFrame,
      width: 1,
    });
  } else {
    const verts = vertexById(scenario);
    for (const e of scenario.graph?.edges ?? []) {
      const u = verts.get(e.u);
      const v = verts.get(e.v);
      if (u && v) {
        cmds.push({
          kind: "segment",
          a: toScreen(u),
          b: toScreen(v),
          color: edgeColor(e, knn, ins, view),
          width: 2,
        });
      }
    }
  }

  const path = trajectoryPoints(scenario);
  if (path.length > 1) {
    cmds.push({
      kind: "polyline",
      points: path.map(toScreen),
      color: COLORS.trajectory,
      width: 1,
      dash: [6, 4],
    });
  }

  const q = msg ? queryPosition(msg, scenario) : null;
  if (msg && q && view.showCircles) {
    cmds.push({
      kind: "circle",
      at: toScreen(q),
      radius: msg.green_radius * view.scale,
      color: COLORS.circleGreen,
    });
    if (msg.red_radius !== null) {
      cmds.push({
        kind: "circle",
        at: toScreen(q),
        radius: msg.red_radius * view.scale,
        color: COLORS.circleRed,
      });
    }
  }

  const positions = sitePositions(scenario);
  if (view.showPrefetch) {
    for (const sid of prefetch) {
      const p = positions.get(sid);
      if (p) {
        cmds.push({ kind: "square", at: toScreen(p), size: PREFETCH_BOX, color: COLORS.prefetchBox });
      }
    }
  }
  for (const [sid, p] of positions) {
    const color = knn.has(sid) ? COLORS.knn : ins.has(sid) ? COLORS.ins : COLORS.site;
    cmds.push({ kind: "dot", at: toScreen(p), radius: DOT_RADIUS, color });
  }

  if (q) {
    cmds.push({ kind: "dot", at: toScreen(q), radius: QUERY_RADIUS, color: COLORS.query });
  }
  return cmds;
}
