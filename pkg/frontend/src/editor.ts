import { EditResult, Gesture, Pt, ScenarioDoc, SiteDoc, Tool } from "./types.js";
import { sitePositions, vertexById } from "./render.js";

// Hit-testing happens in world units; the caller divides a pixel tolerance
// by the view scale so picking feels the same at any zoom.
export const DEFAULT_PICK_RADIUS = 10;

function dist2(a: Pt, b: Pt): number {
  const dx = a.x - b.x;
  const dy = a.y - b.y;
  return dx * dx + dy * dy;
}

function nearest<T>(at: Pt, entries: Iterable<[T, Pt]>, radius: number): T | null {
  let best: T | null = null;
  let bestD = radius * radius;
  for (const [id, p] of entries) {
    const d = dist2(at, p);
    if (d <= bestD) {
      best = id;
      bestD = d;
    }
  }
  return best;
}

export function nearestSite(scenario: ScenarioDoc, at: Pt, radius: number): number | null {
  return nearest(at, sitePositions(scenario).entries(), radius);
}

export function nearestVertex(scenario: ScenarioDoc, at: Pt, radius: number): number | null {
  return nearest(at, vertexById(scenario).entries(), radius);
}

export function nearestEdge(scenario: ScenarioDoc, at: Pt, radius: number): number | null {
  const verts = vertexById(scenario);
  let best: number | null = null;
  let bestD = radius * radius;
  for (const e of scenario.graph?.edges ?? []) {
    const u = verts.get(e.u);
    const v = verts.get(e.v);
    if (!u || !v) {
      continue;
    }
    const len2 = dist2(u, v);
    const t = len2 > 0 ? Math.min(Math.max(((at.x - u.x) * (v.x - u.x) + (at.y - u.y) * (v.y - u.y)) / len2, 0), 1) : 0;
    const d = dist2(at, { x: u.x + t * (v.x - u.x), y: u.y + t * (v.y - u.y) });
    if (d <= bestD) {
      best = e.id;
      bestD = d;
    }
  }
  return best;
}

function nextId(ids: Iterable<number>): number {
  let max = -1;
  for (const id of ids) {
    max = Math.max(max, id);
  }
  return max + 1;
}

export function nextSiteId(scenario: ScenarioDoc): number {
  if (scenario.mode === "plane") {
    return nextId((scenario.sites as SiteDoc[]).map((s) => s.id));
  }
  return nextId(scenario.sites as number[]);
}

export function nextVertexId(scenario: ScenarioDoc): number {
  return nextId((scenario.graph?.vertices ?? []).map((v) => v.id));
}

export function nextEdgeId(scenario: ScenarioDoc): number {
  return nextId((scenario.graph?.edges ?? []).map((e) => e.id));
}

function adjacent(scenario: ScenarioDoc, a: number, b: number): boolean {
  return (scenario.graph?.edges ?? []).some(
    (e) => (e.u === a && e.v === b) || (e.u === b && e.v === a),
  );
}

function siteGesture(gesture: Gesture, scenario: ScenarioDoc, radius: number): EditResult {
  if (scenario.mode === "plane") {
    if (gesture.kind === "click") {
      const hit = nearestSite(scenario, gesture.at, radius);
      if (hit !== null) {
        return { op: null, reason: "already a site here; drag to move, right-click to delete" };
      }
      return { op: { op: "add_site", id: nextSiteId(scenario), x: gesture.at.x, y: gesture.at.y } };
    }
    if (gesture.kind === "rightclick") {
      const hit = nearestSite(scenario, gesture.at, radius);
      return hit === null
        ? { op: null, reason: "no site here" }
        : { op: { op: "delete_site", id: hit } };
    }
    const hit = nearestSite(scenario, gesture.from, radius);
    return hit === null
      ? { op: null, reason: "drag must start on a site" }
      : { op: { op: "move_site", id: hit, x: gesture.to.x, y: gesture.to.y } };
  }
  // network sites live on vertices
  if (gesture.kind === "click") {
    const vid = nearestVertex(scenario, gesture.at, radius);
    if (vid === null) {
      return { op: null, reason: "sites must sit on a network vertex" };
    }
    if ((scenario.sites as number[]).includes(vid)) {
      return { op: null, reason: "already a site at this vertex" };
    }
    return { op: { op: "add_site", vertex: vid } };
  }
  if (gesture.kind === "rightclick") {
    const vid = nearestVertex(scenario, gesture.at, radius);
    if (vid === null || !(scenario.sites as number[]).includes(vid)) {
      return { op: null, reason: "no site here" };
    }
    return { op: { op: "delete_site", vertex: vid } };
  }
  const from = nearestVertex(scenario, gesture.from, radius);
  const to = nearestVertex(scenario, gesture.to, radius);
  if (from === null || !(scenario.sites as number[]).includes(from)) {
    return { op: null, reason: "drag must start on a site vertex" };
  }
  if (to === null) {
    return { op: null, reason: "drop on a network vertex" };
  }
  return { op: { op: "move_site", vertex: from, to } };
}

function nodeGesture(gesture: Gesture, scenario: ScenarioDoc, radius: number): EditResult {
  if (scenario.mode !== "network") {
    return { op: null, reason: "node editing needs network mode" };
  }
  if (gesture.kind === "click") {
    const hit = nearestVertex(scenario, gesture.at, radius);
    if (hit !== null) {
      return { op: null, reason: "already a node here" };
    }
    // a fresh node must connect somewhere or the network falls apart
    const anchor = nearestVertex(scenario, gesture.at, Infinity);
    if (anchor === null) {
      return { op: null, reason: "no network to attach to" };
    }
    return {
      op: {
        op: "add_node",
        id: nextVertexId(scenario),
        x: gesture.at.x,
        y: gesture.at.y,
        edges: [{ id: nextEdgeId(scenario), to: anchor }],
      },
    };
  }
  if (gesture.kind === "rightclick") {
    const vid = nearestVertex(scenario, gesture.at, radius);
    if (vid !== null) {
      return { op: { op: "delete_node", id: vid } };
    }
    const eid = nearestEdge(scenario, gesture.at, radius);
    return eid === null
      ? { op: null, reason: "nothing to delete here" }
      : { op: { op: "delete_edge", id: eid } };
  }
  const from = nearestVertex(scenario, gesture.from, radius);
  if (from === null) {
    return { op: null, reason: "drag must start on a node" };
  }
  const to = nearestVertex(scenario, gesture.to, radius);
  if (to !== null && to !== from) {
    return { op: { op: "add_edge", id: nextEdgeId(scenario), u: from, v: to } };
  }
  return { op: { op: "move_node", id: from, x: gesture.to.x, y: gesture.to.y } };
}

function trajectoryGesture(gesture: Gesture, scenario: ScenarioDoc, radius: number): EditResult {
  if (gesture.kind !== "click") {
    return { op: null, reason: "trajectory editing is click-to-append" };
  }
  if (scenario.mode === "plane") {
    const path = "plane" in scenario.trajectory ? scenario.trajectory.plane : [];
    const extended: [number, number][] = [...path, [gesture.at.x, gesture.at.y]];
    return { op: { op: "set_trajectory", trajectory: extended } };
  }
  const vid = nearestVertex(scenario, gesture.at, radius);
  if (vid === null) {
    return { op: null, reason: "trajectory must follow the road network" };
  }
  const path = "network" in scenario.trajectory ? scenario.trajectory.network : [];
  if (path.length > 0) {
    const last = path[path.length - 1];
    if (last !== vid && !adjacent(scenario, last, vid)) {
      return { op: null, reason: "trajectory must follow the road network" };
    }
  }
  return { op: { op: "set_trajectory", trajectory: [...path, vid] } };
}

/** Map one pointer gesture to the exact edit request body, or a refusal. */
export function gestureToOp(
  gesture: Gesture,
  tool: Tool,
  scenario: ScenarioDoc,
  pickRadius: number = DEFAULT_PICK_RADIUS,
): EditResult {
  if (tool === "demo") {
    return { op: null, reason: "demo tool does not edit" };
  }
  if (tool === "site") {
    return siteGesture(gesture, scenario, pickRadius);
  }
  if (tool === "node") {
    return nodeGesture(gesture, scenario, pickRadius);
  }
  return trajectoryGesture(gesture, scenario, pickRadius);
}
