"""Road-network model, shortest paths, and network Voronoi diagrams.

Sites occupy vertices.  A moving point lives on an edge at an offset from the
edge's u endpoint, so its distance to anything is the better of its two
endpoint routes.  That makes per-edge ownership simple: with both endpoint
labels settled, the owner along an edge changes at most once, at the offset
where the two routes tie.  Those crossover points are the equidistant
mid-points between adjacent cells, and they double as split vertices when a
subnetwork is carved out of the full graph.

Distances are compared as (distance, site id) pairs so every ordering is
total and reproducible; a relative tolerance is applied only when placing
label boundaries, never when ranking sites.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    DisconnectedGraphError,
    DuplicateIdError,
    InvalidArgumentError,
    InvalidLengthError,
    NotFoundError,
)
from .geometry import Point

# Bumped on every diagram construction; the network engine must not rebuild
# during validation or update tiers 1-2.
NET_BUILD_COUNT = 0

# Relative tolerance for collapsing a crossover onto an edge endpoint.
_BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class Vertex:
    id: int
    pos: Point

    def __post_init__(self):
        if self.id < 0:
            raise InvalidArgumentError(f"vertex id must be non-negative, got {self.id}")


@dataclass(frozen=True)
class Edge:
    """Undirected edge; length None means Euclidean between endpoints."""

    id: int
    u: int
    v: int
    length: float | None = None


@dataclass(frozen=True)
class NetworkPosition:
    """A point on edge `edge`, `offset` length units from the edge's u end."""

    edge: int
    offset: float


class Graph:
    """Immutable undirected network with positive edge lengths."""

    def __init__(self, vertices: Sequence[Vertex], edges: Sequence[Edge]):
        self.vertices: tuple[Vertex, ...] = tuple(vertices)
        self.edges: tuple[Edge, ...] = tuple(edges)
        self.vertex_by_id: dict[int, Vertex] = {v.id: v for v in self.vertices}
        self.edge_by_id: dict[int, Edge] = {e.id: e for e in self.edges}
        incident: dict[int, list[Edge]] = {v.id: [] for v in self.vertices}
        for e in self.edges:
            incident[e.u].append(e)
            incident[e.v].append(e)
        self.incident: dict[int, tuple[Edge, ...]] = {
            vid: tuple(es) for vid, es in incident.items()
        }

    def vertex(self, vid: int) -> Vertex:
        try:
            return self.vertex_by_id[vid]
        except KeyError:
            raise NotFoundError(f"unknown vertex id {vid}") from None

    def edge(self, eid: int) -> Edge:
        try:
            return self.edge_by_id[eid]
        except KeyError:
            raise NotFoundError(f"unknown edge id {eid}") from None


def build_graph(vertices: Iterable[Vertex], edges: Iterable[Edge]) -> Graph:
    """Validate and normalize: fills Euclidean lengths, requires connectivity."""
    vlist = list(vertices)
    if not vlist:
        raise InvalidArgumentError("need at least one vertex")
    seen_v: set[int] = set()
    for v in vlist:
        if v.id in seen_v:
            raise DuplicateIdError(f"duplicate vertex id {v.id}")
        seen_v.add(v.id)
    by_id = {v.id: v for v in vlist}

    normalized: list[Edge] = []
    seen_e: set[int] = set()
    for e in edges:
        if e.id in seen_e:
            raise DuplicateIdError(f"duplicate edge id {e.id}")
        seen_e.add(e.id)
        if e.u not in by_id or e.v not in by_id:
            raise NotFoundError(f"edge {e.id} references unknown vertex")
        if e.u == e.v:
            raise InvalidArgumentError(f"edge {e.id} is a self-loop")
        length = e.length
        if length is None:
            a, b = by_id[e.u].pos, by_id[e.v].pos
            dx = b.x - a.x
            dy = b.y - a.y
            length = math.sqrt(dx * dx + dy * dy)
        if not (length > 0) or not math.isfinite(length):
            raise InvalidLengthError(f"edge {e.id} has nonpositive length {length}")
        normalized.append(Edge(e.id, e.u, e.v, length))

    graph = Graph(vlist, normalized)
    reached = {vlist[0].id}
    stack = [vlist[0].id]
    while stack:
        vid = stack.pop()
        for e in graph.incident[vid]:
            other = e.v if e.u == vid else e.u
            if other not in reached:
                reached.add(other)
                stack.append(other)
    if len(reached) != len(vlist):
        raise DisconnectedGraphError(
            f"graph is disconnected: reached {len(reached)} of {len(vlist)} vertices"
        )
    return graph


def check_position(graph: Graph, pos: NetworkPosition) -> Edge:
    e = graph.edge(pos.edge)
    if not (0.0 <= pos.offset <= e.length) or not math.isfinite(pos.offset):
        raise InvalidArgumentError(
            f"offset {pos.offset} outside [0, {e.length}] on edge {pos.edge}"
        )
    return e


def position_point(graph: Graph, pos: NetworkPosition) -> Point:
    """Planar embedding of a network position, for display only."""
    e = check_position(graph, pos)
    a = graph.vertex(e.u).pos
    b = graph.vertex(e.v).pos
    t = pos.offset / e.length
    return Point(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)


def _dijkstra(graph: Graph, seeds: Mapping[int, float]) -> dict[int, float]:
    """Shortest distance from the seeded vertex set; unreachable ids absent."""
    dist: dict[int, float] = {}
    heap = [(d, vid) for vid, d in sorted(seeds.items())]
    heapq.heapify(heap)
    while heap:
        d, vid = heapq.heappop(heap)
        if vid in dist:
            continue
        dist[vid] = d
        for e in graph.incident[vid]:
            other = e.v if e.u == vid else e.u
            if other not in dist:
                heapq.heappush(heap, (d + e.length, other))
    return dist


def network_distance(graph: Graph, a: NetworkPosition, b: NetworkPosition) -> float:
    """Exact shortest-path length between two on-network points."""
    ea = check_position(graph, a)
    eb = check_position(graph, b)
    direct = math.inf
    if a.edge == b.edge:
        direct = abs(a.offset - b.offset)
    dist = _dijkstra(graph, {ea.u: a.offset, ea.v: ea.length - a.offset})
    du = dist.get(eb.u, math.inf)
    dv = dist.get(eb.v, math.inf)
    return min(direct, du + b.offset, dv + (eb.length - b.offset))


@dataclass(frozen=True)
class EdgeInterval:
    """Half-open ownership span (start, end) on an edge; ends are inclusive
    only up to the id tie-break at shared boundary offsets."""

    start: float
    end: float
    owner: int


class NetworkVoronoi:
    """Edge-interval ownership of a graph by nearest site under (d, id) keys."""

    def __init__(
        self,
        graph: Graph,
        site_vertices: frozenset[int],
        vertex_labels: dict[int, tuple[float, int]],
        segments: dict[int, tuple[EdgeInterval, ...]],
        boundary_points: dict[tuple[int, int], tuple[NetworkPosition, ...]],
        adjacency: dict[int, frozenset[int]],
    ):
        self.graph = graph
        self.site_vertices = site_vertices
        self.vertex_labels = vertex_labels
        self.segments = segments
        self.boundary_points = boundary_points
        self.adjacency = adjacency


def build_network_voronoi(graph: Graph, sites: Iterable[int]) -> NetworkVoronoi:
    """Label every edge point with its nearest site via one multi-source search."""
    global NET_BUILD_COUNT
    site_set = frozenset(sites)
    if not site_set:
        raise InvalidArgumentError("need at least one site")
    for sid in site_set:
        if sid not in graph.vertex_by_id:
            raise NotFoundError(f"site vertex {sid} not in graph")
    NET_BUILD_COUNT += 1

    # Multi-source expansion; each vertex settles with the key-minimal
    # (distance, owner) pair among all sites.
    labels: dict[int, tuple[float, int]] = {}
    heap: list[tuple[float, int, int]] = [(0.0, sid, sid) for sid in sorted(site_set)]
    heapq.heapify(heap)
    while heap:
        d, owner, vid = heapq.heappop(heap)
        if vid in labels:
            continue
        labels[vid] = (d, owner)
        for e in graph.incident[vid]:
            other = e.v if e.u == vid else e.u
            if other not in labels:
                heapq.heappush(heap, (d + e.length, owner, other))
    if len(labels) != len(graph.vertices):
        raise DisconnectedGraphError("sites cannot reach every vertex")

    segments: dict[int, tuple[EdgeInterval, ...]] = {}
    boundaries: dict[tuple[int, int], list[NetworkPosition]] = {}
    adjacency: dict[int, set[int]] = {sid: set() for sid in site_set}
    for e in graph.edges:
        du, pu = labels[e.u]
        dv, pv = labels[e.v]
        if pu == pv:
            segments[e.id] = (EdgeInterval(0.0, e.length, pu),)
            continue
        # Routes du + t and dv + (L - t) tie exactly once.
        t = (e.length + dv - du) / 2.0
        eps = _BOUNDARY_EPS * max(1.0, e.length, du, dv)
        pair = (pu, pv) if pu < pv else (pv, pu)
        if t <= eps:
            segments[e.id] = (EdgeInterval(0.0, e.length, pv),)
            cross = 0.0
        elif t >= e.length - eps:
            segments[e.id] = (EdgeInterval(0.0, e.length, pu),)
            cross = e.length
        else:
            segments[e.id] = (
                EdgeInterval(0.0, t, pu),
                EdgeInterval(t, e.length, pv),
            )
            cross = t
        adjacency[pu].add(pv)
        adjacency[pv].add(pu)
        boundaries.setdefault(pair, []).append(NetworkPosition(e.id, cross))

    return NetworkVoronoi(
        graph,
        site_set,
        labels,
        segments,
        {pair: tuple(pts) for pair, pts in sorted(boundaries.items())},
        {sid: frozenset(ns) for sid, ns in adjacency.items()},
    )


def network_voronoi_neighbors(nv: NetworkVoronoi, site_id: int) -> frozenset[int]:
    if site_id not in nv.site_vertices:
        raise NotFoundError(f"unknown site vertex {site_id}")
    return nv.adjacency[site_id]


def owner_at(nv: NetworkVoronoi, pos: NetworkPosition) -> tuple[float, int]:
    """(distance, owner) of the nearest site to an edge point; exact tie at a
    boundary offset resolves to the lower owner id."""
    e = check_position(nv.graph, pos)
    du, pu = nv.vertex_labels[e.u]
    dv, pv = nv.vertex_labels[e.v]
    key_u = (du + pos.offset, pu)
    key_v = (dv + (e.length - pos.offset), pv)
    return min(key_u, key_v)


@dataclass(frozen=True)
class SubnetworkMap:
    """A carved-out subnetwork plus enough provenance to relocate positions.

    spans maps a full-graph edge id to its retained pieces as
    (start, end, sub edge id); sub edges reuse the original vertex ids and
    introduce fresh ids for boundary split points.
    """

    graph: Graph
    spans: dict[int, tuple[tuple[float, float, int], ...]]

    def map_position(self, pos: NetworkPosition) -> NetworkPosition | None:
        """Translate a full-graph position, or None when it fell outside."""
        for start, end, sub_eid in self.spans.get(pos.edge, ()):
            if start <= pos.offset <= end:
                return NetworkPosition(sub_eid, pos.offset - start)
        return None


def restricted_subnetwork_map(
    graph: Graph, nv: NetworkVoronoi, subset: Iterable[int]
) -> SubnetworkMap:
    """Keep exactly the edge intervals owned by `subset`, splitting edges at
    ownership boundaries; boundary points become vertices.

    The result is not necessarily connected, so it is assembled without the
    connectivity gate of build_graph.  Distances measured inside dominate
    the full-graph distances; they agree on any shortest path that stays
    within the kept cells.
    """
    members = frozenset(subset)
    for sid in members:
        if sid not in nv.site_vertices:
            raise NotFoundError(f"unknown site vertex {sid}")

    next_vid = max(graph.vertex_by_id) + 1
    next_eid = max(graph.edge_by_id) + 1 if graph.edge_by_id else 0
    vertices: dict[int, Vertex] = {}
    edges: list[Edge] = []
    spans: dict[int, list[tuple[float, float, int]]] = {}

    def keep_vertex(vid: int) -> None:
        if vid not in vertices:
            vertices[vid] = graph.vertex(vid)

    for e in graph.edges:
        kept = [iv for iv in nv.segments[e.id] if iv.owner in members]
        if not kept:
            continue
        if len(kept) == len(nv.segments[e.id]):
            keep_vertex(e.u)
            keep_vertex(e.v)
            edges.append(Edge(e.id, e.u, e.v, e.length))
            spans[e.id] = [(0.0, e.length, e.id)]
            continue
        # exactly one of the two halves survives; its far end is the split
        (iv,) = kept
        a = graph.vertex(e.u).pos
        b = graph.vertex(e.v).pos
        frac = (iv.end if iv.start == 0.0 else iv.start) / e.length
        split = Vertex(
            next_vid,
            Point(a.x + (b.x - a.x) * frac, a.y + (b.y - a.y) * frac),
        )
        next_vid += 1
        vertices[split.id] = split
        if iv.start == 0.0:
            keep_vertex(e.u)
            edges.append(Edge(next_eid, e.u, split.id, iv.end))
        else:
            keep_vertex(e.v)
            edges.append(Edge(next_eid, split.id, e.v, e.length - iv.start))
        spans[e.id] = [(iv.start, iv.end, next_eid)]
        next_eid += 1

    # isolated site vertices (possible when a site owns no full interval on
    # any incident edge, e.g. crowded neighborhoods) must still be present
    for sid in members:
        keep_vertex(sid)

    sub = Graph(tuple(vertices[vid] for vid in sorted(vertices)), tuple(edges))
    return SubnetworkMap(sub, {eid: tuple(sp) for eid, sp in spans.items()})


def restricted_subnetwork(graph: Graph, nv: NetworkVoronoi, subset: Iterable[int]) -> Graph:
    return restricted_subnetwork_map(graph, nv, subset).graph


@dataclass(frozen=True)
class LabeledSample:
    pos: NetworkPosition
    knn: frozenset[int]
    in_cell: bool


def order_k_network_cell_oracle(
    graph: Graph,
    sites: Iterable[int],
    subset: Iterable[int],
    samples_per_edge: int,
) -> list[LabeledSample]:
    """Brute-force order-k cell test, sampling edge interiors.

    Test oracle only: k separate distance tables, no diagram involved.
    """
    site_list = sorted(set(sites))
    members = frozenset(subset)
    if not members <= set(site_list):
        raise InvalidArgumentError("subset must consist of sites")
    if samples_per_edge < 1:
        raise InvalidArgumentError("need at least one sample per edge")
    k = len(members)
    tables = {sid: _dijkstra(graph, {sid: 0.0}) for sid in site_list}
    out: list[LabeledSample] = []
    for e in graph.edges:
        for i in range(samples_per_edge):
            t = (i + 0.5) * e.length / samples_per_edge
            keyed = sorted(
                (min(tables[sid][e.u] + t, tables[sid][e.v] + (e.length - t)), sid)
                for sid in site_list
            )
            knn = frozenset(sid for _, sid in keyed[:k])
            out.append(LabeledSample(NetworkPosition(e.id, t), knn, knn == members))
    return out
