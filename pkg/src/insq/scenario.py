"""Scenario documents: canonical JSON save/load and seeded random generation.

A scenario bundles everything one reproducible run needs: query parameters,
the object sites, the world (bounding box, plus the road graph in network
mode), the trajectory the query point follows, and the seed that produced it.
Documents are canonical JSON (sorted keys, compact separators), so saving the
same scenario twice yields identical bytes.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .engine import QueryConfig
from .errors import InsqError, InvalidArgumentError, SchemaError, TooFewSitesError
from .geometry import Point, Site
from .network import Edge, Graph, Vertex, build_graph

_PLANE_BBOX = (0.0, 0.0, 1000.0, 1000.0)
_PLANE_SPEED = 5.0
_GRID_SPACING = 100.0
_NETWORK_SPEED = 20.0


@dataclass(frozen=True)
class Scenario:
    """One reproducible run: world, query parameters, and trajectory.

    Plane mode: `sites` holds Site objects, `trajectory` a polyline of Points,
    `graph` is None.  Network mode: `sites` and `trajectory` hold vertex ids
    of `graph`, and consecutive trajectory vertices must share an edge.
    """

    mode: str
    k: int
    rho: float
    speed: float
    bbox: tuple[float, float, float, float]
    sites: tuple
    trajectory: tuple
    seed: int
    graph: Graph | None = None

    def __post_init__(self):
        if self.mode not in ("plane", "network"):
            raise SchemaError("mode", f"must be 'plane' or 'network', got {self.mode!r}")
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise SchemaError("k", f"must be a positive integer, got {self.k!r}")
        if not _is_number(self.rho) or not self.rho >= 1.0:
            raise SchemaError("rho", f"must be a number >= 1, got {self.rho!r}")
        if not _is_number(self.speed) or not self.speed > 0:
            raise SchemaError("speed", f"must be a positive number, got {self.speed!r}")
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "speed", float(self.speed))
        if len(self.bbox) != 4 or not all(_is_number(c) for c in self.bbox):
            raise SchemaError("bbox", f"must be four numbers, got {self.bbox!r}")
        x0, y0, x1, y1 = (float(c) for c in self.bbox)
        if not (x0 < x1 and y0 < y1):
            raise SchemaError("bbox", f"must satisfy x0 < x1 and y0 < y1, got {self.bbox!r}")
        object.__setattr__(self, "bbox", (x0, y0, x1, y1))
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise SchemaError("seed", f"must be an integer, got {self.seed!r}")
        if not self.sites:
            raise SchemaError("sites", "need at least one site")
        if not self.trajectory:
            raise SchemaError("trajectory", "need at least one waypoint")
        if self.mode == "plane":
            self._check_plane()
        else:
            self._check_network()

    def _check_plane(self):
        if self.graph is not None:
            raise SchemaError("graph", "only allowed in network mode")
        if not all(isinstance(s, Site) for s in self.sites):
            raise SchemaError("sites", "plane sites must be Site objects")
        ids = [s.id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise SchemaError("sites", "duplicate site ids")
        object.__setattr__(self, "sites", tuple(sorted(self.sites, key=lambda s: s.id)))
        if not all(isinstance(p, Point) for p in self.trajectory):
            raise SchemaError("trajectory", "plane trajectory must be Points")
        object.__setattr__(self, "trajectory", tuple(self.trajectory))

    def _check_network(self):
        if self.graph is None:
            raise SchemaError("graph", "required in network mode")
        for vid in self.sites:
            if not _is_id(vid):
                raise SchemaError("sites", f"vertex id expected, got {vid!r}")
            if vid not in self.graph.vertex_by_id:
                raise SchemaError("sites", f"unknown vertex id {vid}")
        if len(set(self.sites)) != len(self.sites):
            raise SchemaError("sites", "duplicate site vertices")
        object.__setattr__(self, "sites", tuple(sorted(self.sites)))
        for vid in self.trajectory:
            if not _is_id(vid):
                raise SchemaError("trajectory", f"vertex id expected, got {vid!r}")
            if vid not in self.graph.vertex_by_id:
                raise SchemaError("trajectory", f"unknown vertex id {vid}")
        for a, b in zip(self.trajectory, self.trajectory[1:]):
            if not any(b in (e.u, e.v) for e in self.graph.incident[a]):
                raise SchemaError("trajectory", f"vertices {a} and {b} do not share an edge")
        object.__setattr__(self, "trajectory", tuple(self.trajectory))


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_id(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v >= 0


def save_scenario(s: Scenario) -> bytes:
    """Serialize to canonical JSON: sorted keys, compact, byte-stable."""
    doc = {
        "version": 1,
        "mode": s.mode,
        "k": s.k,
        "rho": s.rho,
        "speed": s.speed,
        "bbox": list(s.bbox),
        "seed": s.seed,
    }
    if s.mode == "plane":
        doc["sites"] = [{"id": st.id, "x": st.pos.x, "y": st.pos.y} for st in s.sites]
        doc["trajectory"] = {"plane": [[p.x, p.y] for p in s.trajectory]}
    else:
        doc["sites"] = list(s.sites)
        doc["graph"] = {
            "vertices": [
                {"id": v.id, "x": v.pos.x, "y": v.pos.y}
                for v in sorted(s.graph.vertices, key=lambda v: v.id)
            ],
            "edges": [
                {"id": e.id, "u": e.u, "v": e.v, "length": e.length}
                for e in sorted(s.graph.edges, key=lambda e: e.id)
            ],
        }
        doc["trajectory"] = {"network": list(s.trajectory)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _field(doc: dict, key: str, path: str = ""):
    name = f"{path}.{key}" if path else key
    if key not in doc:
        raise SchemaError(name, "missing required field")
    return doc[key]


def _number(v, name: str) -> float:
    if not _is_number(v):
        raise SchemaError(name, f"expected a finite number, got {v!r}")
    return float(v)


def _int(v, name: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise SchemaError(name, f"expected an integer, got {v!r}")
    return v


def _id_list(v, name: str) -> list[int]:
    if not isinstance(v, list):
        raise SchemaError(name, f"expected a list, got {v!r}")
    return [_int(item, f"{name}[{i}]") for i, item in enumerate(v)]


def load_scenario(data: bytes | str) -> Scenario:
    """Parse and validate a scenario document.

    Raises SchemaError whose `field` attribute names the offending entry.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError("document", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("document", "top level must be an object")
    version = _field(doc, "version")
    if version != 1:
        raise SchemaError("version", f"unsupported version {version!r}")
    mode = _field(doc, "mode")
    k = _int(_field(doc, "k"), "k")
    rho = _number(_field(doc, "rho"), "rho")
    speed = _number(_field(doc, "speed"), "speed")
    bbox_raw = _field(doc, "bbox")
    if not isinstance(bbox_raw, list) or len(bbox_raw) != 4:
        raise SchemaError("bbox", f"expected [x0, y0, x1, y1], got {bbox_raw!r}")
    bbox = tuple(_number(c, f"bbox[{i}]") for i, c in enumerate(bbox_raw))
    seed = _int(_field(doc, "seed"), "seed")
    sites_raw = _field(doc, "sites")
    traj_raw = _field(doc, "trajectory")
    if not isinstance(traj_raw, dict):
        raise SchemaError("trajectory", f"expected an object, got {traj_raw!r}")

    if mode == "plane":
        if "graph" in doc:
            raise SchemaError("graph", "only allowed in network mode")
        sites = _load_plane_sites(sites_raw)
        trajectory = _load_plane_trajectory(traj_raw)
        graph = None
    elif mode == "network":
        graph = _load_graph(_field(doc, "graph"))
        sites = tuple(_id_list(sites_raw, "sites"))
        if "network" not in traj_raw:
            raise SchemaError("trajectory.network", "missing required field")
        trajectory = tuple(_id_list(traj_raw["network"], "trajectory.network"))
    else:
        raise SchemaError("mode", f"must be 'plane' or 'network', got {mode!r}")
    return Scenario(
        mode=mode,
        k=k,
        rho=rho,
        speed=speed,
        bbox=bbox,
        sites=sites,
        trajectory=trajectory,
        seed=seed,
        graph=graph,
    )


def _load_plane_sites(raw) -> tuple[Site, ...]:
    if not isinstance(raw, list):
        raise SchemaError("sites", f"expected a list, got {raw!r}")
    sites = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"sites[{i}]", f"expected an object, got {entry!r}")
        sid = _int(_field(entry, "id", f"sites[{i}]"), f"sites[{i}].id")
        x = _number(_field(entry, "x", f"sites[{i}]"), f"sites[{i}].x")
        y = _number(_field(entry, "y", f"sites[{i}]"), f"sites[{i}].y")
        if sid < 0:
            raise SchemaError(f"sites[{i}].id", f"must be non-negative, got {sid}")
        sites.append(Site(sid, Point(x, y)))
    return tuple(sites)


def _load_plane_trajectory(raw: dict) -> tuple[Point, ...]:
    if "plane" not in raw:
        raise SchemaError("trajectory.plane", "missing required field")
    pts = raw["plane"]
    if not isinstance(pts, list):
        raise SchemaError("trajectory.plane", f"expected a list, got {pts!r}")
    out = []
    for i, entry in enumerate(pts):
        if not isinstance(entry, list) or len(entry) != 2:
            raise SchemaError(f"trajectory.plane[{i}]", f"expected [x, y], got {entry!r}")
        out.append(
            Point(
                _number(entry[0], f"trajectory.plane[{i}][0]"),
                _number(entry[1], f"trajectory.plane[{i}][1]"),
            )
        )
    return tuple(out)


def _load_graph(raw) -> Graph:
    if not isinstance(raw, dict):
        raise SchemaError("graph", f"expected an object, got {raw!r}")
    vraw = _field(raw, "vertices", "graph")
    eraw = _field(raw, "edges", "graph")
    if not isinstance(vraw, list):
        raise SchemaError("graph.vertices", f"expected a list, got {vraw!r}")
    if not isinstance(eraw, list):
        raise SchemaError("graph.edges", f"expected a list, got {eraw!r}")
    vertices = []
    for i, entry in enumerate(vraw):
        if not isinstance(entry, dict):
            raise SchemaError(f"graph.vertices[{i}]", f"expected an object, got {entry!r}")
        vid = _int(_field(entry, "id", f"graph.vertices[{i}]"), f"graph.vertices[{i}].id")
        x = _number(_field(entry, "x", f"graph.vertices[{i}]"), f"graph.vertices[{i}].x")
        y = _number(_field(entry, "y", f"graph.vertices[{i}]"), f"graph.vertices[{i}].y")
        vertices.append(Vertex(vid, Point(x, y)))
    edges = []
    for i, entry in enumerate(eraw):
        if not isinstance(entry, dict):
            raise SchemaError(f"graph.edges[{i}]", f"expected an object, got {entry!r}")
        eid = _int(_field(entry, "id", f"graph.edges[{i}]"), f"graph.edges[{i}].id")
        u = _int(_field(entry, "u", f"graph.edges[{i}]"), f"graph.edges[{i}].u")
        v = _int(_field(entry, "v", f"graph.edges[{i}]"), f"graph.edges[{i}].v")
        length = None
        if "length" in entry:
            length = _number(entry["length"], f"graph.edges[{i}].length")
        edges.append(Edge(eid, u, v, length))
    try:
        return build_graph(vertices, edges)
    except InsqError as exc:
        raise SchemaError("graph", str(exc)) from None


def generate_random(
    mode: str,
    *,
    n: int | None = None,
    grid: tuple[int, int] | None = None,
    k: int,
    rho: float = 1.0,
    ticks: int = 200,
    seed: int = 0,
) -> Scenario:
    """Deterministic scenario generator.

    Plane: `n` sites uniform in a fixed box, random polyline trajectory.
    Network: `grid` = (width, height) grid graph with perturbed edge lengths,
    `n` random site vertices (defaults to one per ten vertices), random walk
    trajectory.  Trajectories are sized so a default run lasts `ticks` ticks.
    """
    cfg = QueryConfig(k, rho)
    if not isinstance(ticks, int) or ticks < 1:
        raise InvalidArgumentError(f"ticks must be a positive integer, got {ticks!r}")
    rng = random.Random(seed)
    if mode == "plane":
        if n is None:
            raise InvalidArgumentError("plane mode needs n")
        if cfg.prefetch_size > n:
            raise TooFewSitesError(f"prefetch needs {cfg.prefetch_size} sites, only {n} available")
        return _generate_plane(n, cfg, ticks, seed, rng)
    if mode == "network":
        if grid is None:
            raise InvalidArgumentError("network mode needs grid dimensions")
        return _generate_network(grid, n, cfg, ticks, seed, rng)
    raise InvalidArgumentError(f"mode must be 'plane' or 'network', got {mode!r}")


def _generate_plane(n, cfg, ticks, seed, rng) -> Scenario:
    x0, y0, x1, y1 = _PLANE_BBOX
    sites = tuple(
        Site(i, Point(rng.uniform(x0, x1), rng.uniform(y0, y1))) for i in range(n)
    )
    # Polyline long enough that the default run lasts exactly `ticks` ticks;
    # the last leg is cut mid-flight so the total misses tick boundaries.
    target = _PLANE_SPEED * (ticks - 0.5)
    points = [Point(rng.uniform(x0, x1), rng.uniform(y0, y1))]
    total = 0.0
    while total < target:
        nxt = Point(rng.uniform(x0, x1), rng.uniform(y0, y1))
        last = points[-1]
        d = math.hypot(nxt.x - last.x, nxt.y - last.y)
        if d == 0.0:
            continue
        if total + d >= target:
            f = (target - total) / d
            points.append(Point(last.x + f * (nxt.x - last.x), last.y + f * (nxt.y - last.y)))
            total = target
        else:
            points.append(nxt)
            total += d
    return Scenario(
        mode="plane",
        k=cfg.k,
        rho=cfg.rho,
        speed=_PLANE_SPEED,
        bbox=_PLANE_BBOX,
        sites=sites,
        trajectory=tuple(points),
        seed=seed,
    )


def _generate_network(grid, n, cfg, ticks, seed, rng) -> Scenario:
    w, h = grid
    if w < 2 or h < 2:
        raise InvalidArgumentError(f"grid must be at least 2x2, got {w}x{h}")
    if n is None:
        n = max(cfg.prefetch_size, (w * h) // 10)
    if n > w * h:
        raise InvalidArgumentError(f"{n} sites will not fit on {w * h} vertices")
    if cfg.prefetch_size > n:
        raise TooFewSitesError(f"prefetch needs {cfg.prefetch_size} sites, only {n} available")
    vertices = [
        Vertex(r * w + c, Point(c * _GRID_SPACING, r * _GRID_SPACING))
        for r in range(h)
        for c in range(w)
    ]
    edges = []
    for r in range(h):
        for c in range(w):
            vid = r * w + c
            if c + 1 < w:
                edges.append(Edge(len(edges), vid, vid + 1, _GRID_SPACING * rng.uniform(0.7, 1.3)))
            if r + 1 < h:
                edges.append(Edge(len(edges), vid, vid + w, _GRID_SPACING * rng.uniform(0.7, 1.3)))
    graph = build_graph(vertices, edges)
    sites = tuple(sorted(rng.sample(range(w * h), n)))

    target = _NETWORK_SPEED * (ticks - 0.5)
    path = [rng.randrange(w * h)]
    total = 0.0
    while total < target:
        steps = sorted(
            (e.v if e.u == path[-1] else e.u, e.length) for e in graph.incident[path[-1]]
        )
        if len(path) > 1 and len(steps) > 1:
            steps = [s for s in steps if s[0] != path[-2]]
        nxt, length = steps[rng.randrange(len(steps))]
        path.append(nxt)
        total += length
    return Scenario(
        mode="network",
        k=cfg.k,
        rho=cfg.rho,
        speed=_NETWORK_SPEED,
        bbox=(0.0, 0.0, (w - 1) * _GRID_SPACING, (h - 1) * _GRID_SPACING),
        sites=sites,
        trajectory=tuple(path),
        seed=seed,
        graph=graph,
    )
