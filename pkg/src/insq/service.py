"""Session-oriented HTTP/WebSocket service for interactive runs.

Each session owns one scenario and one engine run.  Scenario puts and edits
rebuild the diagram; an edit landing mid-run re-seats the engine at the
current position instead of restarting.  Control commands drive playback,
and every produced tick is broadcast to the session's stream subscribers,
so a streamed run and a batch run of the same scenario are the same tick
sequence.  Sessions live in memory and expire after an idle TTL.
"""

from __future__ import annotations

import asyncio
import math
import time
import uuid
from dataclasses import replace

from fastapi import FastAPI, HTTPException, Request, WebSocket
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from starlette.websockets import WebSocketDisconnect

from .engine import QueryConfig
from .errors import InsqError, SchemaError
from .geometry import Point, Site, order_k_cell_polygon
from .network import Edge, Vertex, build_graph
from .scenario import Scenario, generate_random, load_scenario, save_scenario
from .simulate import SimulationRun, position_at_distance, tick_message

_DEFAULT_PLANE = dict(n=50, k=5, rho=1.6, ticks=300, seed=1)
_DEFAULT_NETWORK = dict(grid=(8, 6), n=12, k=5, rho=1.0, ticks=300, seed=1)


class _Session:
    def __init__(self, sid: str, scenario: Scenario, now: float):
        self.id = sid
        self.scenario = scenario
        self.run = SimulationRun(scenario)
        self.status = "idle"  # idle | running | paused
        self.multiplier = 1.0
        # playback progress in tick units; distance is progress * speed, so a
        # multiplier of 1.0 reproduces the batch schedule bit-for-bit
        self.progress = 0.0
        self.lock = asyncio.Lock()
        self.subscribers: list[tuple[asyncio.Queue, bool]] = []
        self.last_access = now
        self.task: asyncio.Task | None = None


def _num(v, name: str) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise SchemaError(name, f"expected a finite number, got {v!r}")
    return float(v)


def _id(v, name: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool) or v < 0:
        raise SchemaError(name, f"expected a non-negative integer id, got {v!r}")
    return v


def _rebuild_graph(vertices, edges):
    try:
        return build_graph(vertices, edges)
    except InsqError as exc:
        raise SchemaError("graph", str(exc)) from None


def _check_feasible(s: Scenario):
    m = QueryConfig(s.k, s.rho).prefetch_size
    if m > len(s.sites):
        raise SchemaError(
            "sites", f"k={s.k}, rho={s.rho} needs {m} sites, only {len(s.sites)} present"
        )


def _edit_sites(s: Scenario, op: str, body: dict) -> tuple:
    if s.mode == "plane":
        if op == "add_site":
            site = Site(_id(body.get("id"), "id"), Point(_num(body.get("x"), "x"), _num(body.get("y"), "y")))
            return s.sites + (site,)
        sid = _id(body.get("id"), "id")
        if sid not in {st.id for st in s.sites}:
            raise SchemaError("id", f"unknown site id {sid}")
        if op == "delete_site":
            return tuple(st for st in s.sites if st.id != sid)
        moved = Site(sid, Point(_num(body.get("x"), "x"), _num(body.get("y"), "y")))
        return tuple(moved if st.id == sid else st for st in s.sites)
    if op == "add_site":
        return s.sites + (_id(body.get("vertex"), "vertex"),)
    vid = _id(body.get("vertex"), "vertex")
    if vid not in s.sites:
        raise SchemaError("vertex", f"no site at vertex {vid}")
    if op == "delete_site":
        return tuple(v for v in s.sites if v != vid)
    to = _id(body.get("to"), "to")
    return tuple(to if v == vid else v for v in s.sites)


def _edit_trajectory(s: Scenario, body: dict) -> tuple:
    raw = body.get("trajectory")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("trajectory", "expected a non-empty list")
    if s.mode == "plane":
        points = []
        for i, entry in enumerate(raw):
            if not isinstance(entry, list) or len(entry) != 2:
                raise SchemaError(f"trajectory[{i}]", f"expected [x, y], got {entry!r}")
            points.append(Point(_num(entry[0], f"trajectory[{i}][0]"), _num(entry[1], f"trajectory[{i}][1]")))
        return tuple(points)
    return tuple(_id(v, f"trajectory[{i}]") for i, v in enumerate(raw))


def _edit_graph(s: Scenario, op: str, body: dict):
    graph = s.graph
    if op == "add_node":
        nid = _id(body.get("id"), "id")
        vertex = Vertex(nid, Point(_num(body.get("x"), "x"), _num(body.get("y"), "y")))
        edges = list(graph.edges)
        for i, spec in enumerate(body.get("edges") or ()):
            if not isinstance(spec, dict):
                raise SchemaError(f"edges[{i}]", f"expected an object, got {spec!r}")
            length = _num(spec["length"], f"edges[{i}].length") if "length" in spec else None
            edges.append(Edge(_id(spec.get("id"), f"edges[{i}].id"), nid, _id(spec.get("to"), f"edges[{i}].to"), length))
        return _rebuild_graph(graph.vertices + (vertex,), edges)
    if op == "move_node":
        nid = _id(body.get("id"), "id")
        if nid not in graph.vertex_by_id:
            raise SchemaError("id", f"unknown vertex id {nid}")
        moved = Vertex(nid, Point(_num(body.get("x"), "x"), _num(body.get("y"), "y")))
        # edge lengths are data, not geometry: they stay as they are
        return _rebuild_graph(tuple(moved if v.id == nid else v for v in graph.vertices), graph.edges)
    if op == "delete_node":
        nid = _id(body.get("id"), "id")
        if nid not in graph.vertex_by_id:
            raise SchemaError("id", f"unknown vertex id {nid}")
        return _rebuild_graph(
            tuple(v for v in graph.vertices if v.id != nid),
            tuple(e for e in graph.edges if nid not in (e.u, e.v)),
        )
    if op == "add_edge":
        length = _num(body["length"], "length") if "length" in body else None
        edge = Edge(_id(body.get("id"), "id"), _id(body.get("u"), "u"), _id(body.get("v"), "v"), length)
        return _rebuild_graph(graph.vertices, graph.edges + (edge,))
    eid = _id(body.get("id"), "id")  # delete_edge
    if eid not in graph.edge_by_id:
        raise SchemaError("id", f"unknown edge id {eid}")
    return _rebuild_graph(graph.vertices, tuple(e for e in graph.edges if e.id != eid))


def _edited(s: Scenario, body: dict) -> Scenario:
    op = body.get("op")
    if op in ("add_site", "move_site", "delete_site"):
        return replace(s, sites=_edit_sites(s, op, body))
    if op == "set_trajectory":
        return replace(s, trajectory=_edit_trajectory(s, body))
    if op in ("add_node", "move_node", "delete_node", "add_edge", "delete_edge"):
        if s.mode != "network":
            raise SchemaError("op", f"{op} needs network mode")
        new_graph = _edit_graph(s, op, body)
        # sites and trajectory must still fit the graph; Scenario re-checks
        return replace(s, graph=new_graph)
    raise SchemaError("op", f"unknown op {op!r}")


def create_app(
    session_ttl_seconds: float = 1800.0,
    clock=time.monotonic,
    tick_hz: float = 20.0,
    static_dir: str | None = None,
) -> FastAPI:
    """Build the service; sessions are stored in this app instance only."""
    app = FastAPI(title="insq service")
    sessions: dict[str, _Session] = {}

    def _sweep():
        now = clock()
        for sid in [s.id for s in sessions.values() if now - s.last_access > session_ttl_seconds]:
            stale = sessions.pop(sid)
            if stale.task is not None:
                stale.task.cancel()

    def _session(sid: str) -> _Session:
        _sweep()
        session = sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        session.last_access = clock()
        return session

    def _info(session: _Session) -> dict:
        return {
            "id": session.id,
            "status": session.status,
            "mode": session.scenario.mode,
            "t": None if session.run.state is None else session.run.t,
            "speed_multiplier": session.multiplier,
        }

    def _broadcast_tick(session: _Session, report):
        base = tick_message(report)
        enriched = None
        if session.scenario.mode == "plane" and any(cell for _, cell in session.subscribers):
            poly = order_k_cell_polygon(session.scenario.sites, set(report.knn), session.scenario.bbox)
            enriched = dict(base)
            enriched["cell"] = [[p.x, p.y] for p in poly.vertices]
        for queue, cell in session.subscribers:
            queue.put_nowait(enriched if cell and enriched is not None else base)

    def _broadcast_complete(session: _Session):
        message = {"complete": True, "t": None if session.run.state is None else session.run.t}
        for queue, _ in session.subscribers:
            queue.put_nowait(message)

    def _at_end(session: _Session) -> bool:
        """True when the next tick would land past the trajectory end.

        Matches the batch run length: the final streamed tick is the last one
        at or before the end, so a streamed run and run_simulation() produce
        the same sequence.
        """
        nxt = (session.progress + session.multiplier) * session.scenario.speed
        return nxt > session.run.trajectory.total_length

    def _advance(session: _Session, manual: bool):
        """One tick: returns the report, or None when the run is finished."""
        run = session.run
        if run.state is None:
            report = run.advance(position_at_distance(run.trajectory, 0.0))
        elif _at_end(session) and not manual:
            return None
        else:
            session.progress += session.multiplier
            dist = session.progress * session.scenario.speed
            report = run.advance(position_at_distance(run.trajectory, dist))
        session.last_access = clock()
        _broadcast_tick(session, report)
        return report

    async def _run_loop(session: _Session):
        interval = 1.0 / tick_hz
        try:
            while True:
                await asyncio.sleep(interval)
                async with session.lock:
                    if session.status != "running":
                        return
                    report = _advance(session, manual=False)
                    if report is None or _at_end(session):
                        session.status = "idle"
                        _broadcast_complete(session)
                        return
        except asyncio.CancelledError:
            return

    def _stop_task(session: _Session):
        if session.task is not None and not session.task.done():
            session.task.cancel()
        session.task = None

    def _reset(session: _Session, scenario: Scenario):
        session.scenario = scenario
        session.run = SimulationRun(scenario)
        session.status = "idle"
        session.progress = 0.0

    def _reseat(session: _Session, scenario: Scenario):
        """Swap in an edited scenario; a started run resumes where it is."""
        started = session.run.state is not None
        t = session.run.t
        session.scenario = scenario
        session.run = SimulationRun(scenario)
        if started:
            dist = session.progress * scenario.speed
            session.run.advance(position_at_distance(session.run.trajectory, dist))
            session.run.t = t

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request):
        _sweep()
        body = {}
        raw = await request.body()
        if raw:
            try:
                body = await request.json()
            except Exception:
                raise HTTPException(400, detail={"field": "document", "message": "not valid JSON"})
        mode = body.get("mode", "plane") if isinstance(body, dict) else "plane"
        if mode == "plane":
            scenario = generate_random("plane", **_DEFAULT_PLANE)
        elif mode == "network":
            scenario = generate_random("network", **_DEFAULT_NETWORK)
        else:
            raise HTTPException(400, detail={"field": "mode", "message": f"must be 'plane' or 'network', got {mode!r}"})
        sid = uuid.uuid4().hex
        sessions[sid] = _Session(sid, scenario, clock())
        return {"id": sid, "mode": mode}

    @app.get("/api/sessions/{sid}/scenario")
    async def get_scenario(sid: str):
        session = _session(sid)
        return Response(content=save_scenario(session.scenario), media_type="application/json")

    @app.put("/api/sessions/{sid}/scenario")
    async def put_scenario(sid: str, request: Request):
        session = _session(sid)
        data = await request.body()
        try:
            scenario = load_scenario(data)
            _check_feasible(scenario)
        except SchemaError as exc:
            raise HTTPException(400, detail={"field": exc.field, "message": exc.message})
        async with session.lock:
            _stop_task(session)
            _reset(session, scenario)
            return _info(session)

    @app.post("/api/sessions/{sid}/edit")
    async def edit(sid: str, request: Request):
        session = _session(sid)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, detail={"field": "document", "message": "not valid JSON"})
        if not isinstance(body, dict):
            raise HTTPException(400, detail={"field": "document", "message": "expected an object"})
        async with session.lock:
            try:
                scenario = _edited(session.scenario, body)
                _check_feasible(scenario)
            except SchemaError as exc:
                raise HTTPException(400, detail={"field": exc.field, "message": exc.message})
            _reseat(session, scenario)
            return _info(session)

    @app.post("/api/sessions/{sid}/control")
    async def control(sid: str, request: Request):
        session = _session(sid)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, detail={"field": "document", "message": "not valid JSON"})
        cmd = body.get("cmd") if isinstance(body, dict) else None
        async with session.lock:
            if cmd == "start":
                if session.status != "running":
                    _stop_task(session)
                    session.status = "running"
                    session.task = asyncio.create_task(_run_loop(session))
            elif cmd == "pause":
                if session.status == "running":
                    session.status = "paused"
            elif cmd == "step":
                if session.status == "running":
                    raise HTTPException(409, detail={"field": "cmd", "message": "cannot step while running"})
                _advance(session, manual=True)
            elif cmd == "set_speed":
                value = body.get("value")
                if not isinstance(value, (int, float)) or isinstance(value, bool) or not (value > 0) or not math.isfinite(value):
                    raise HTTPException(400, detail={"field": "value", "message": f"expected a positive number, got {value!r}"})
                session.multiplier = float(value)
            else:
                raise HTTPException(400, detail={"field": "cmd", "message": f"unknown command {cmd!r}"})
            return _info(session)

    @app.websocket("/ws/sessions/{sid}")
    async def stream(websocket: WebSocket, sid: str, cell: bool = False):
        _sweep()
        session = sessions.get(sid)
        if session is None:
            await websocket.accept()
            await websocket.close(code=1008, reason="unknown session")
            return
        session.last_access = clock()
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        entry = (queue, bool(cell))
        session.subscribers.append(entry)

        async def pump():
            while True:
                await websocket.send_json(await queue.get())

        async def watch_disconnect():
            try:
                while True:
                    await websocket.receive_text()
            except WebSocketDisconnect:
                return

        try:
            done, pending = await asyncio.wait(
                {asyncio.create_task(pump()), asyncio.create_task(watch_disconnect())},
                return_when=asyncio.FIRST_COMPLETED,
            )
            for task in pending:
                task.cancel()
            for task in done:
                task.exception()  # a send racing the disconnect is not an error
        finally:
            if entry in session.subscribers:
                session.subscribers.remove(entry)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="static")
    return app
