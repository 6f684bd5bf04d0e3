import { describe, expect, it } from "vitest";
import { gestureToOp, nearestEdge, nearestSite, nearestVertex } from "../src/editor.js";
import { Gesture, ScenarioDoc } from "../src/types.js";

function planeScenario(): ScenarioDoc {
  return {
    version: 1,
    mode: "plane",
    k: 1,
    rho: 1,
    speed: 5,
    seed: 1,
    bbox: [0, 0, 1000, 1000],
    sites: [
      { id: 0, x: 100, y: 100 },
      { id: 1, x: 200, y: 100 },
      { id: 7, x: 500, y: 500 },
    ],
    trajectory: { plane: [[0, 0], [900, 900]] },
  };
}

//   0 --100-- 1 --101-- 2
//   |102      |103
//   3 --105-- 4          (5 sits apart, linked 2-5 via 104)
function networkScenario(): ScenarioDoc {
  return {
    version: 1,
    mode: "network",
    k: 1,
    rho: 1,
    speed: 20,
    seed: 1,
    bbox: [0, 0, 200, 100],
    sites: [0, 4],
    graph: {
      vertices: [
        { id: 0, x: 0, y: 0 },
        { id: 1, x: 100, y: 0 },
        { id: 2, x: 200, y: 0 },
        { id: 3, x: 0, y: 100 },
        { id: 4, x: 100, y: 100 },
        { id: 5, x: 200, y: 100 },
      ],
      edges: [
        { id: 100, u: 0, v: 1, length: 100 },
        { id: 101, u: 1, v: 2, length: 100 },
        { id: 102, u: 0, v: 3, length: 100 },
        { id: 103, u: 1, v: 4, length: 100 },
        { id: 104, u: 2, v: 5, length: 100 },
        { id: 105, u: 3, v: 4, length: 100 },
      ],
    },
    trajectory: { network: [0, 1] },
  };
}

const click = (x: number, y: number): Gesture => ({ kind: "click", at: { x, y } });
const rightclick = (x: number, y: number): Gesture => ({ kind: "rightclick", at: { x, y } });
const drag = (x0: number, y0: number, x1: number, y1: number): Gesture => ({
  kind: "drag",
  from: { x: x0, y: y0 },
  to: { x: x1, y: y1 },
});

describe("hit testing", () => {
  const plane = planeScenario();
  const net = networkScenario();

  it("finds the nearest site within the pick radius only", () => {
    expect(nearestSite(plane, { x: 103, y: 99 }, 10)).toBe(0);
    expect(nearestSite(plane, { x: 150, y: 100 }, 10)).toBeNull();
    expect(nearestSite(plane, { x: 111, y: 100 }, 10)).toBeNull(); // 11 units off
  });

  it("finds vertices and edges in network mode", () => {
    expect(nearestVertex(net, { x: 98, y: 3 }, 10)).toBe(1);
    expect(nearestEdge(net, { x: 50, y: 4 }, 10)).toBe(100);
    expect(nearestEdge(net, { x: 50, y: 50 }, 10)).toBeNull();
  });
});

describe("site tool on the plane", () => {
  const scenario = planeScenario();

  it("click on empty canvas adds a site with the next free id", () => {
    expect(gestureToOp(click(300, 400), "site", scenario)).toEqual({
      op: { op: "add_site", id: 8, x: 300, y: 400 },
    });
  });

  it("click on an existing site refuses instead of stacking", () => {
    const r = gestureToOp(click(101, 102), "site", scenario);
    expect(r.op).toBeNull();
    expect(r.reason).toBeTruthy();
  });

  it("drag starting on a site moves it to the drop point", () => {
    expect(gestureToOp(drag(100, 100, 350, 75), "site", scenario)).toEqual({
      op: { op: "move_site", id: 0, x: 350, y: 75 },
    });
  });

  it("drag starting on empty canvas is refused", () => {
    expect(gestureToOp(drag(400, 400, 350, 75), "site", scenario).op).toBeNull();
  });

  it("right-click deletes the site under the cursor", () => {
    expect(gestureToOp(rightclick(199, 101), "site", scenario)).toEqual({
      op: { op: "delete_site", id: 1 },
    });
    expect(gestureToOp(rightclick(400, 400), "site", scenario).op).toBeNull();
  });
});

describe("site tool on the network", () => {
  const scenario = networkScenario();

  it("click on a free vertex adds a site there", () => {
    expect(gestureToOp(click(201, 1), "site", scenario)).toEqual({
      op: { op: "add_site", vertex: 2 },
    });
  });

  it("click on an occupied vertex or empty space is refused", () => {
    expect(gestureToOp(click(0, 0), "site", scenario).op).toBeNull();
    expect(gestureToOp(click(50, 50), "site", scenario).op).toBeNull();
  });

  it("drag between vertices relocates the site", () => {
    expect(gestureToOp(drag(0, 0, 200, 0), "site", scenario)).toEqual({
      op: { op: "move_site", vertex: 0, to: 2 },
    });
  });

  it("right-click removes the site from its vertex", () => {
    expect(gestureToOp(rightclick(100, 100), "site", scenario)).toEqual({
      op: { op: "delete_site", vertex: 4 },
    });
  });
});

describe("node tool", () => {
  const scenario = networkScenario();

  it("is meaningless on the plane", () => {
    const r = gestureToOp(click(10, 10), "node", planeScenario());
    expect(r.op).toBeNull();
    expect(r.reason).toMatch(/network/);
  });

  it("click on empty space adds a node wired to its closest neighbor", () => {
    expect(gestureToOp(click(60, 60), "node", scenario)).toEqual({
      // nearest anchor is vertex 4 at (100,100)
      op: { op: "add_node", id: 6, x: 60, y: 60, edges: [{ id: 106, to: 4 }] },
    });
  });

  it("drag vertex to vertex adds an edge with the next free id", () => {
    expect(gestureToOp(drag(100, 100, 200, 100), "node", scenario)).toEqual({
      op: { op: "add_edge", id: 106, u: 4, v: 5 },
    });
  });

  it("drag vertex to empty space moves the vertex", () => {
    expect(gestureToOp(drag(200, 0, 170, 40), "node", scenario)).toEqual({
      op: { op: "move_node", id: 2, x: 170, y: 40 },
    });
  });

  it("right-click deletes a vertex, or an edge when no vertex is hit", () => {
    expect(gestureToOp(rightclick(0, 100), "node", scenario)).toEqual({
      op: { op: "delete_node", id: 3 },
    });
    expect(gestureToOp(rightclick(150, 2), "node", scenario)).toEqual({
      op: { op: "delete_edge", id: 101 },
    });
    expect(gestureToOp(rightclick(150, 60), "node", scenario).op).toBeNull();
  });
});

describe("trajectory tool", () => {
  it("click appends a waypoint on the plane", () => {
    expect(gestureToOp(click(450, 12), "trajectory", planeScenario())).toEqual({
      op: { op: "set_trajectory", trajectory: [[0, 0], [900, 900], [450, 12]] },
    });
  });

  it("appends only road-adjacent vertices in network mode", () => {
    const scenario = networkScenario(); // current path ends at vertex 1
    expect(gestureToOp(click(200, 0), "trajectory", scenario)).toEqual({
      op: { op: "set_trajectory", trajectory: [0, 1, 2] },
    });
    const skip = gestureToOp(click(200, 100), "trajectory", scenario); // vertex 5 is two hops away
    expect(skip.op).toBeNull();
    expect(skip.reason).toBe("trajectory must follow the road network");
    const offRoad = gestureToOp(click(50, 50), "trajectory", scenario);
    expect(offRoad.op).toBeNull();
    expect(offRoad.reason).toBe("trajectory must follow the road network");
  });

  it("drags do not edit the trajectory", () => {
    expect(gestureToOp(drag(0, 0, 9, 9), "trajectory", planeScenario()).op).toBeNull();
  });
});

describe("demo tool", () => {
  it("never emits an edit", () => {
    expect(gestureToOp(click(300, 300), "demo", planeScenario()).op).toBeNull();
    expect(gestureToOp(drag(0, 0, 50, 50), "demo", networkScenario()).op).toBeNull();
  });
});

describe("pick radius", () => {
  it("scales hit tolerance as passed by the caller", () => {
    const scenario = planeScenario();
    // 8 world units away: a hit at radius 10, a miss at radius 5
    expect(gestureToOp(rightclick(108, 100), "site", scenario, 10)).toEqual({
      op: { op: "delete_site", id: 0 },
    });
    expect(gestureToOp(rightclick(108, 100), "site", scenario, 5).op).toBeNull();
    expect(gestureToOp(click(108, 100), "site", scenario, 5)).toEqual({
      op: { op: "add_site", id: 8, x: 108, y: 100 },
    });
  });
});
