export interface Pt {
  x: number;
  y: number;
}

export interface SiteDoc {
  id: number;
  x: number;
  y: number;
}

export interface VertexDoc {
  id: number;
  x: number;
  y: number;
}

export interface EdgeDoc {
  id: number;
  u: number;
  v: number;
  length: number;
}

export interface GraphDoc {
  vertices: VertexDoc[];
  edges: EdgeDoc[];
}

/** Scenario document as served by GET /api/sessions/{id}/scenario. */
export interface ScenarioDoc {
  version: number;
  mode: "plane" | "network";
  k: number;
  rho: number;
  speed: number;
  seed: number;
  bbox: [number, number, number, number];
  sites: SiteDoc[] | number[];
  graph?: GraphDoc;
  trajectory: { plane: [number, number][] } | { network: number[] };
}

export type NetworkPos = { edge: number; offset: number };

/** One tick from the stream; `cell` only arrives when the client opted in. */
export interface TickMessage {
  t: number;
  pos: [number, number] | NetworkPos;
  knn: number[];
  ins: number[];
  prefetch: number[];
  valid: boolean;
  event: "none" | "rerank" | "swap" | "recompute";
  green_radius: number;
  red_radius: number | null;
  cell?: [number, number][];
}

export type Tool = "node" | "site" | "trajectory" | "demo";

export interface ViewState {
  tool: Tool;
  showCells: boolean; // order-1 structure: network edge highlighting
  showCell: boolean; // streamed order-k cell polygon
  showPrefetch: boolean;
  showCircles: boolean;
  scale: number;
  tx: number;
  ty: number;
  connected: boolean;
}

export type DrawCmd =
  | { kind: "clear"; color: string }
  | { kind: "polygon"; points: Pt[]; fill: string; alpha: number }
  | { kind: "polyline"; points: Pt[]; color: string; width: number; dash?: number[] }
  | { kind: "segment"; a: Pt; b: Pt; color: string; width: number }
  | { kind: "dot"; at: Pt; radius: number; color: string }
  | { kind: "square"; at: Pt; size: number; color: string }
  | { kind: "circle"; at: Pt; radius: number; color: string }
  | { kind: "label"; at: Pt; text: string; color: string };

export type EditOp =
  | { op: "add_site"; id: number; x: number; y: number }
  | { op: "add_site"; vertex: number }
  | { op: "move_site"; id: number; x: number; y: number }
  | { op: "move_site"; vertex: number; to: number }
  | { op: "delete_site"; id: number }
  | { op: "delete_site"; vertex: number }
  | { op: "add_node"; id: number; x: number; y: number; edges: { id: number; to: number }[] }
  | { op: "move_node"; id: number; x: number; y: number }
  | { op: "delete_node"; id: number }
  | { op: "add_edge"; id: number; u: number; v: number }
  | { op: "delete_edge"; id: number }
  | { op: "set_trajectory"; trajectory: [number, number][] | number[] };

/** Pointer gesture already mapped into world coordinates. */
export type Gesture =
  | { kind: "click"; at: Pt }
  | { kind: "rightclick"; at: Pt }
  | { kind: "drag"; from: Pt; to: Pt };

export interface EditResult {
  op: EditOp | null;
  reason?: string;
}
