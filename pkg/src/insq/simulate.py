"""Trajectory playback: tick-by-tick engine runs, a brute-force oracle, diffing.

Time is discrete: one tick advances the query point by `speed` length units
along its trajectory, clamping at the end.  A run reports, per tick, what the
engine believed before updating (valid or not), which update tier fired, and
the two enclosing radii: green through the farthest current neighbor, red
through the nearest influential outsider.  The oracle runner recomputes every
tick from scratch, through none of the engine's ranking or validation code,
and the diff is the acceptance verdict.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .engine import QueryConfig, TickEvent, init_query, tick
from .errors import InvalidArgumentError
from .geometry import Point, build_voronoi, distance_key
from .network import Graph, NetworkPosition, build_network_voronoi
from .network_engine import init_query_net, tick_net
from .scenario import Scenario


class Trajectory:
    """Arc-length parameterized path: planar polyline or network vertex walk."""

    def __init__(
        self,
        speed: float,
        points: tuple[Point, ...] = (),
        path: tuple[int, ...] = (),
        graph: Graph | None = None,
    ):
        if not (isinstance(speed, (int, float)) and math.isfinite(speed) and speed > 0):
            raise InvalidArgumentError(f"speed must be positive, got {speed!r}")
        if bool(points) == bool(path):
            raise InvalidArgumentError("exactly one of points/path must be given")
        self.speed = float(speed)
        self.points = tuple(points)
        self.path = tuple(path)
        self.graph = graph
        self._legs = []
        cum = [0.0]
        if self.points:
            for a, b in zip(self.points, self.points[1:]):
                length = math.hypot(b.x - a.x, b.y - a.y)
                if length > 0.0:  # zero-length legs contribute nothing
                    self._legs.append((a, b, length))
                    cum.append(cum[-1] + length)
        else:
            if graph is None:
                raise InvalidArgumentError("network trajectory needs a graph")
            for vid in self.path:
                graph.vertex(vid)
            for a, b in zip(self.path, self.path[1:]):
                linking = [e for e in graph.incident[a] if b in (e.u, e.v)]
                if not linking:
                    raise InvalidArgumentError(f"path vertices {a} and {b} do not share an edge")
                e = min(linking, key=lambda e: e.id)  # parallel edges: lowest id wins
                self._legs.append((e, a))
                cum.append(cum[-1] + e.length)
        self._cum = cum

    @property
    def total_length(self) -> float:
        return self._cum[-1]


def _vertex_position(graph: Graph, vid: int) -> NetworkPosition:
    edges = graph.incident[vid]
    if not edges:
        raise InvalidArgumentError(f"vertex {vid} has no incident edge")
    e = min(edges, key=lambda e: e.id)
    return NetworkPosition(e.id, 0.0 if e.u == vid else e.length)


def position_at_distance(traj: Trajectory, dist: float) -> Point | NetworkPosition:
    """Location `dist` length units along the trajectory; clamps both ends."""
    dist = min(max(dist, 0.0), traj.total_length)
    if not traj._legs:
        if traj.points:
            return traj.points[0]
        return _vertex_position(traj.graph, traj.path[0])
    i = min(bisect_right(traj._cum, dist) - 1, len(traj._legs) - 1)
    along = dist - traj._cum[i]
    if traj.points:
        a, b, length = traj._legs[i]
        f = along / length
        return Point(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y))
    e, a = traj._legs[i]
    off = along if e.u == a else e.length - along
    return NetworkPosition(e.id, min(max(off, 0.0), e.length))


def position_at(traj: Trajectory, t: int) -> Point | NetworkPosition:
    """Location after t ticks of travel; clamps at the end."""
    if t < 0:
        raise InvalidArgumentError(f"tick must be non-negative, got {t}")
    return position_at_distance(traj, t * traj.speed)


@dataclass(frozen=True)
class TickReport:
    """What the engine did at one tick, plus the display radii."""

    t: int
    pos: Point | NetworkPosition
    knn: tuple[int, ...]
    is_set: tuple[int, ...]
    R: tuple[int, ...]
    valid_before_update: bool
    event: TickEvent
    green_radius: float
    red_radius: float
    comparisons: int


@dataclass(frozen=True)
class DiffReport:
    """Engine run vs. oracle: mismatching ticks and event-count comparison."""

    total_ticks: int
    mismatches: tuple[int, ...]
    engine_events: int
    oracle_changes: int

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _trajectory(scenario: Scenario) -> Trajectory:
    if scenario.mode == "plane":
        return Trajectory(scenario.speed, points=scenario.trajectory)
    return Trajectory(scenario.speed, path=scenario.trajectory, graph=scenario.graph)


def _default_ticks(traj: Trajectory) -> int:
    return math.floor(traj.total_length / traj.speed) + 1


class SimulationRun:
    """Incremental form of a run: the index is built once, then one report
    per advance() call.

    The first advance initializes the engine, later ones tick it.  Positions
    default to the trajectory's own schedule; a caller driving playback at a
    different pace (or off-schedule after edits) passes positions explicitly.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.trajectory = _trajectory(scenario)
        self.config = QueryConfig(scenario.k, scenario.rho)
        self.index = None
        self.nv = None
        if scenario.mode == "plane":
            self.index = build_voronoi(scenario.sites)
        else:
            self.nv = build_network_voronoi(scenario.graph, scenario.sites)
        self.state = None
        self.t = -1

    @property
    def metrics(self):
        return None if self.state is None else self.state.metrics

    def advance(self, pos: Point | NetworkPosition | None = None) -> TickReport:
        self.t += 1
        q = position_at(self.trajectory, self.t) if pos is None else pos
        if self.scenario.mode == "plane":
            if self.state is None:
                self.state = init_query(self.index, q, self.config)
                return self._report(q, "none", 0)
            before = self.state.metrics.comparisons
            self.state, event = tick(self.index, self.state, q)
            return self._report(q, event, self.state.metrics.comparisons - before)
        if self.state is None:
            self.state = init_query_net(self.scenario.graph, self.nv, q, self.config)
            return self._report(q, "none", 0)
        before = self.state.metrics.comparisons
        self.state, event = tick_net(self.scenario.graph, self.nv, self.state, q)
        return self._report(q, event, self.state.metrics.comparisons - before)

    def _report(self, q, event: TickEvent, comparisons: int) -> TickReport:
        state = self.state
        if self.scenario.mode == "plane":
            green = math.sqrt(distance_key(q, self.index.site(state.knn[-1]))[0])
            red = math.inf
            if state.is_set:
                red = math.sqrt(
                    min(distance_key(q, self.index.site(sid))[0] for sid in state.is_set)
                )
        else:
            dist = _distances_to(self.scenario.graph, q, set(state.knn) | state.is_set)
            green = max(dist[sid] for sid in state.knn)
            red = min((dist[sid] for sid in state.is_set), default=math.inf)
        return TickReport(
            t=self.t,
            pos=q,
            knn=state.knn,
            is_set=tuple(sorted(state.is_set)),
            R=state.R,
            valid_before_update=event == "none",
            event=event,
            green_radius=green,
            red_radius=red,
            comparisons=comparisons,
        )


def run_simulation(scenario: Scenario, ticks: int | None = None):
    """Play the scenario through the matching engine.

    Returns (list of TickReport, Metrics).  `ticks` overrides the default run
    length of one tick per speed-unit of trajectory, plus the starting tick.
    """
    run = SimulationRun(scenario)
    total = _default_ticks(run.trajectory) if ticks is None else ticks
    if total < 1:
        raise InvalidArgumentError(f"need at least one tick, got {total}")
    reports = [run.advance() for _ in range(total)]
    return reports, run.state.metrics


def tick_message(report: TickReport) -> dict:
    """JSON-ready view of one tick; the wire format of the tick stream."""
    if isinstance(report.pos, NetworkPosition):
        pos = {"edge": report.pos.edge, "offset": report.pos.offset}
    else:
        pos = [report.pos.x, report.pos.y]
    return {
        "t": report.t,
        "pos": pos,
        "knn": list(report.knn),
        "ins": list(report.is_set),
        "prefetch": list(report.R),
        "valid": report.valid_before_update,
        "event": report.event,
        "green_radius": report.green_radius,
        "red_radius": None if math.isinf(report.red_radius) else report.red_radius,
    }


def _distances_to(graph: Graph, pos: NetworkPosition, targets: set[int]) -> dict[int, float]:
    """Shortest distances from a point to target vertices; stops once all settle."""
    e = graph.edge(pos.edge)
    dist = {}
    heap = [(pos.offset, e.u), (e.length - pos.offset, e.v)]
    pending = set(targets)
    while heap and pending:
        d, vid = heapq.heappop(heap)
        if vid in dist:
            continue
        dist[vid] = d
        pending.discard(vid)
        for edge in graph.incident[vid]:
            other = edge.v if edge.u == vid else edge.u
            if other not in dist:
                heapq.heappush(heap, (d + edge.length, other))
    return {vid: dist[vid] for vid in targets}


def brute_force_oracle(scenario: Scenario, ticks: int | None = None):
    """Per-tick kNN by exhaustive ranking; no engine ranking/validation code.

    Returns a list of (t, knn ids) with the same tie-breaking rule as the
    engines: ascending (distance, id).
    """
    traj = _trajectory(scenario)
    total = _default_ticks(traj) if ticks is None else ticks
    k = scenario.k
    out = []
    if scenario.mode == "plane":
        ids = np.array([s.id for s in scenario.sites])
        xs = np.array([s.pos.x for s in scenario.sites])
        ys = np.array([s.pos.y for s in scenario.sites])
        for t in range(total):
            q = position_at(traj, t)
            dx = xs - q.x
            dy = ys - q.y
            d2 = dx * dx + dy * dy
            order = np.lexsort((ids, d2))
            out.append((t, tuple(int(sid) for sid in ids[order[:k]])))
        return out
    tables = _oracle_tables(scenario.graph, scenario.sites)
    for t in range(total):
        q = position_at(traj, t)
        e = scenario.graph.edge(q.edge)
        keyed = sorted(
            (min(tab[e.u] + q.offset, tab[e.v] + (e.length - q.offset)), sid)
            for sid, tab in tables.items()
        )
        out.append((t, tuple(sid for _, sid in keyed[:k])))
    return out


def _oracle_tables(graph: Graph, sites) -> dict[int, dict[int, float]]:
    adjacency: dict[int, list[tuple[int, float]]] = {v.id: [] for v in graph.vertices}
    for e in graph.edges:
        adjacency[e.u].append((e.v, e.length))
        adjacency[e.v].append((e.u, e.length))
    tables = {}
    for src in sites:
        dist = {src: 0.0}
        heap = [(0.0, src)]
        while heap:
            d, vid = heapq.heappop(heap)
            if d > dist[vid]:
                continue
            for other, length in adjacency[vid]:
                nd = d + length
                if nd < dist.get(other, math.inf):
                    dist[other] = nd
                    heapq.heappush(heap, (nd, other))
        tables[src] = dist
    return tables


def compare_runs(reports: list[TickReport], oracle) -> DiffReport:
    """Elementwise kNN set comparison; the acceptance verdict is `ok`."""
    if len(reports) != len(oracle):
        raise InvalidArgumentError(f"engine run has {len(reports)} ticks, oracle {len(oracle)}")
    mismatches = tuple(
        r.t for r, (_, knn) in zip(reports, oracle) if set(r.knn) != set(knn)
    )
    engine_events = sum(1 for r in reports if r.event != "none")
    oracle_changes = sum(1 for a, b in zip(oracle, oracle[1:]) if set(a[1]) != set(b[1]))
    return DiffReport(len(reports), mismatches, engine_events, oracle_changes)


def metrics_table(reports: list[TickReport], *, recompute_count: bool = False) -> str:
    """Per-tick counters as CSV; optionally with a running recompute total."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["tick", "event", "knn_size", "is_size", "comparisons"]
    if recompute_count:
        header.append("recompute_count")
    writer.writerow(header)
    recomputes = 0
    for r in reports:
        recomputes += r.event == "recompute"
        row = [r.t, r.event, len(r.knn), len(r.is_set), r.comparisons]
        if recompute_count:
            row.append(recomputes)
        writer.writerow(row)
    return buf.getvalue()
