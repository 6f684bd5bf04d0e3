"""Planar Voronoi index: sites, neighbor adjacency, kNN search, cell polygons.

Adjacency follows the shared-edge rule: two sites are neighbors only when
their order-1 cells share a boundary segment of positive length.  Cells that
touch at a single point (cocircular degeneracies, e.g. grid datasets) are not
neighbors.  Candidate pairs come from a Delaunay triangulation; each candidate
is then accepted or rejected by an adaptive filter that falls back to exact
rational arithmetic whenever floating point cannot decide safely.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CoincidentSiteError,
    DuplicateIdError,
    InvalidArgumentError,
    NotFoundError,
)

# Instrumentation: bumped on every full Voronoi construction.  The engines
# must never trigger a rebuild during validation/update tiers 1-2; tests
# snapshot this counter to prove it.
BUILD_COUNT = 0


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgumentError(f"non-finite coordinates: ({self.x}, {self.y})")


@dataclass(frozen=True)
class Site:
    id: int
    pos: Point

    def __post_init__(self):
        if self.id < 0:
            raise InvalidArgumentError(f"site id must be non-negative, got {self.id}")


def distance_key(q: Point, site: Site) -> tuple[float, int]:
    """Canonical comparison key: (squared distance to q, site id).

    Every distance comparison in the planar engine and its oracles goes
    through this exact arithmetic (dx*dx + dy*dy) so orderings are
    bit-for-bit reproducible.
    """
    dx = site.pos.x - q.x
    dy = site.pos.y - q.y
    return (dx * dx + dy * dy, site.id)


# ---------------------------------------------------------------------------
# kd-tree with best-first traversal
# ---------------------------------------------------------------------------

_LEAF_SIZE = 8


class _KdNode:
    __slots__ = ("xlo", "ylo", "xhi", "yhi", "sites", "left", "right")

    def __init__(self, sites, xlo, ylo, xhi, yhi):
        self.xlo, self.ylo, self.xhi, self.yhi = xlo, ylo, xhi, yhi
        self.sites = sites  # leaf only
        self.left = None
        self.right = None

    def min_d2(self, q: Point) -> float:
        dx = max(0.0, self.xlo - q.x, q.x - self.xhi)
        dy = max(0.0, self.ylo - q.y, q.y - self.yhi)
        return dx * dx + dy * dy


def _build_kd(sites: list[Site], depth: int = 0) -> _KdNode:
    xs = [s.pos.x for s in sites]
    ys = [s.pos.y for s in sites]
    node = _KdNode(None, min(xs), min(ys), max(xs), max(ys))
    if len(sites) <= _LEAF_SIZE:
        node.sites = sites
        return node
    axis = depth % 2
    key = (lambda s: (s.pos.x, s.id)) if axis == 0 else (lambda s: (s.pos.y, s.id))
    ordered = sorted(sites, key=key)
    mid = len(ordered) // 2
    node.left = _build_kd(ordered[:mid], depth + 1)
    node.right = _build_kd(ordered[mid:], depth + 1)
    return node


def _kd_knn(root: _KdNode, q: Point, m: int) -> list[int]:
    """Best-first kNN: exact under the (d2, id) key.

    The heap holds both boxes and sites keyed by a d2 lower bound; boxes sort
    ahead of equal-d2 sites so a box that could still contain a smaller key is
    always expanded before a site is emitted.
    """
    counter = itertools.count()
    heap: list[tuple[float, int, int, _KdNode | None]] = [
        (root.min_d2(q), 0, next(counter), root)
    ]
    out: list[int] = []
    while heap and len(out) < m:
        d2, kind, tie, node = heapq.heappop(heap)
        if kind == 1:
            out.append(tie)
            continue
        if node.sites is not None:
            for s in node.sites:
                sd2, sid = distance_key(q, s)
                heapq.heappush(heap, (sd2, 1, sid, None))
        else:
            for child in (node.left, node.right):
                heapq.heappush(heap, (child.min_d2(q), 0, next(counter), child))
    return out


# ---------------------------------------------------------------------------
# Adjacency: candidate generation + positive-length shared-edge filter
# ---------------------------------------------------------------------------

_REL_EPS = 1e-9


def _orient_exact(a: Point, b: Point, c: Point) -> int:
    """Sign of the (exact) orientation determinant of a, b, c."""
    d = (Fraction(b.x) - Fraction(a.x)) * (Fraction(c.y) - Fraction(a.y)) - (
        Fraction(b.y) - Fraction(a.y)
    ) * (Fraction(c.x) - Fraction(a.x))
    return (d > 0) - (d < 0)


def _all_collinear(sites: Sequence[Site]) -> bool:
    if len(sites) <= 2:
        return True
    a = sites[0]
    b = next((s for s in sites[1:] if s.pos != a.pos), None)
    if b is None:
        return True
    return all(_orient_exact(a.pos, b.pos, s.pos) == 0 for s in sites)


def _collinear_adjacency(sites: Sequence[Site]) -> dict[int, frozenset[int]]:
    # Cells of collinear sites are parallel slabs; neighbors are consecutive
    # sites along the common line.
    ordered = sorted(sites, key=lambda s: (s.pos.x, s.pos.y))
    adj: dict[int, set[int]] = {s.id: set() for s in sites}
    for a, b in zip(ordered, ordered[1:]):
        adj[a.id].add(b.id)
        adj[b.id].add(a.id)
    return {i: frozenset(v) for i, v in adj.items()}


def _shared_edge_interval_float(xs, ys, i, j):
    """Float feasibility interval of the (i, j) bisector against all others.

    Returns (t_lo, t_hi, certain).  The shared cell edge has positive length
    iff t_lo < t_hi; `certain` is False when the decision margin is too small
    to trust floating point.
    """
    ax, ay, bx, by = xs[i], ys[i], xs[j], ys[j]
    mx, my = (ax + bx) * 0.5, (ay + by) * 0.5
    ux, uy = -(by - ay), bx - ax

    cx = np.delete(xs, [i, j])
    cy = np.delete(ys, [i, j])
    dxa = cx - ax
    dya = cy - ay
    A = 2.0 * (dxa * ux + dya * uy)
    B = (cx * cx + cy * cy) - (ax * ax + ay * ay) - 2.0 * (dxa * mx + dya * my)

    scale = np.abs(dxa * ux) + np.abs(dya * uy) + 1e-300
    near_parallel = np.abs(A) <= 2.0 * _REL_EPS * scale
    certain = not bool(near_parallel.any())

    pos = A > 0
    neg = A < 0
    t_hi = float(np.min(B[pos] / A[pos])) if pos.any() else math.inf
    t_lo = float(np.max(B[neg] / A[neg])) if neg.any() else -math.inf
    if bool((B[near_parallel] <= 0).any()):
        return (math.inf, -math.inf, certain)
    return (t_lo, t_hi, certain)


def _shared_edge_exact(sites: Sequence[Site], i: int, j: int) -> bool:
    """Exact rational version of the positive-length shared-edge test."""
    a, b = sites[i].pos, sites[j].pos
    ax, ay = Fraction(a.x), Fraction(a.y)
    bx, by = Fraction(b.x), Fraction(b.y)
    mx, my = (ax + bx) / 2, (ay + by) / 2
    ux, uy = -(by - ay), bx - ax
    t_lo: Fraction | None = None
    t_hi: Fraction | None = None
    for k, s in enumerate(sites):
        if k == i or k == j:
            continue
        cx, cy = Fraction(s.pos.x), Fraction(s.pos.y)
        A = 2 * ((cx - ax) * ux + (cy - ay) * uy)
        B = (cx * cx + cy * cy) - (ax * ax + ay * ay) - 2 * ((cx - ax) * mx + (cy - ay) * my)
        if A == 0:
            if B <= 0:
                return False
            continue
        t = B / A
        if A > 0:
            if t_hi is None or t < t_hi:
                t_hi = t
        else:
            if t_lo is None or t > t_lo:
                t_lo = t
        if t_lo is not None and t_hi is not None and t_lo >= t_hi:
            return False
    return True


def _compute_adjacency(sites: Sequence[Site]) -> dict[int, frozenset[int]]:
    if len(sites) == 1:
        return {sites[0].id: frozenset()}
    if _all_collinear(sites):
        return _collinear_adjacency(sites)

    from scipy.spatial import Delaunay

    pts = np.array([[s.pos.x, s.pos.y] for s in sites], dtype=np.float64)
    tri = Delaunay(pts)
    candidates: set[tuple[int, int]] = set()
    for simplex in tri.simplices:
        for u in range(3):
            a, b = int(simplex[u]), int(simplex[(u + 1) % 3])
            candidates.add((min(a, b), max(a, b)))

    xs = pts[:, 0].copy()
    ys = pts[:, 1].copy()
    adj: dict[int, set[int]] = {s.id: set() for s in sites}
    for i, j in candidates:
        t_lo, t_hi, certain = _shared_edge_interval_float(xs, ys, i, j)
        gap = t_hi - t_lo
        margin = _REL_EPS * max(1.0, abs(t_lo), abs(t_hi))
        if not certain or (math.isfinite(gap) and abs(gap) <= margin):
            ok = _shared_edge_exact(sites, i, j)
        else:
            ok = gap > 0
        if ok:
            adj[sites[i].id].add(sites[j].id)
            adj[sites[j].id].add(sites[i].id)
    return {i: frozenset(v) for i, v in adj.items()}


# ---------------------------------------------------------------------------
# VoronoiIndex
# ---------------------------------------------------------------------------


class VoronoiIndex:
    """Immutable order-1 Voronoi structure: adjacency plus a kNN search tree."""

    def __init__(self, sites: Sequence[Site], adjacency: dict[int, frozenset[int]], kd: _KdNode):
        self.sites: tuple[Site, ...] = tuple(sites)
        self.adjacency = adjacency
        self._kd = kd
        self.by_id: dict[int, Site] = {s.id: s for s in self.sites}

    def __len__(self) -> int:
        return len(self.sites)

    def site(self, site_id: int) -> Site:
        try:
            return self.by_id[site_id]
        except KeyError:
            raise NotFoundError(f"unknown site id {site_id}") from None


def build_voronoi(sites: Iterable[Site]) -> VoronoiIndex:
    global BUILD_COUNT
    site_list = list(sites)
    if not site_list:
        raise InvalidArgumentError("need at least one site")
    seen_ids: set[int] = set()
    seen_pos: dict[tuple[float, float], int] = {}
    for s in site_list:
        if s.id in seen_ids:
            raise DuplicateIdError(f"duplicate site id {s.id}")
        seen_ids.add(s.id)
        key = (s.pos.x, s.pos.y)
        if key in seen_pos:
            raise CoincidentSiteError(
                f"sites {seen_pos[key]} and {s.id} share coordinates {key}"
            )
        seen_pos[key] = s.id
    adjacency = _compute_adjacency(site_list)
    kd = _build_kd(site_list)
    BUILD_COUNT += 1
    return VoronoiIndex(site_list, adjacency, kd)


def voronoi_neighbors(index: VoronoiIndex, site_id: int) -> frozenset[int]:
    if site_id not in index.adjacency:
        raise NotFoundError(f"unknown site id {site_id}")
    return index.adjacency[site_id]


def knn_search(index: VoronoiIndex, q: Point, m: int) -> list[int]:
    if not 1 <= m <= len(index.sites):
        raise InvalidArgumentError(
            f"m={m} out of range for {len(index.sites)} sites"
        )
    return _kd_knn(index._kd, q, m)


# ---------------------------------------------------------------------------
# Cell polygons (display / oracle use only; never on the per-tick path)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polygon:
    """Closed convex ring, counterclockwise, possibly empty."""

    vertices: tuple[Point, ...]

    def is_empty(self) -> bool:
        return len(self.vertices) < 3

    def contains(self, p: Point) -> bool:
        if self.is_empty():
            return False
        vs = self.vertices
        n = len(vs)
        for i in range(n):
            a, b = vs[i], vs[(i + 1) % n]
            cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
            if cross < 0:
                return False
        return True

    def area(self) -> float:
        if self.is_empty():
            return 0.0
        vs = self.vertices
        acc = 0.0
        for i in range(len(vs)):
            a, b = vs[i], vs[(i + 1) % len(vs)]
            acc += a.x * b.y - b.x * a.y
        return 0.5 * acc


def _bbox_ring(bbox: tuple[float, float, float, float]) -> list[tuple[float, float]]:
    x0, y0, x1, y1 = bbox
    if not (x0 < x1 and y0 < y1):
        raise InvalidArgumentError(f"degenerate bbox {bbox}")
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _clip_halfplane(ring, a, b, c):
    """Sutherland-Hodgman clip of a convex CCW ring to {x: a*x + b*y <= c}."""
    out = []
    n = len(ring)
    for i in range(n):
        px, py = ring[i]
        qx, qy = ring[(i + 1) % n]
        pin = a * px + b * py <= c
        qin = a * qx + b * qy <= c
        if pin:
            out.append((px, py))
        if pin != qin:
            fp = a * px + b * py - c
            fq = a * qx + b * qy - c
            t = fp / (fp - fq)
            out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def _dedupe_ring(ring, eps):
    out = []
    for v in ring:
        if not out or abs(v[0] - out[-1][0]) > eps or abs(v[1] - out[-1][1]) > eps:
            out.append(v)
    if len(out) > 1 and abs(out[0][0] - out[-1][0]) <= eps and abs(out[0][1] - out[-1][1]) <= eps:
        out.pop()
    return out


def _halfplane_of_pair(inner: Point, outer: Point):
    # Points closer to `inner` than to `outer`: 2*(outer-inner)·x <= |outer|^2 - |inner|^2
    a = 2.0 * (outer.x - inner.x)
    b = 2.0 * (outer.y - inner.y)
    c = (outer.x * outer.x + outer.y * outer.y) - (inner.x * inner.x + inner.y * inner.y)
    return a, b, c


def _clip_cell(ring, pairs, eps):
    for inner, outer in pairs:
        a, b, c = _halfplane_of_pair(inner, outer)
        ring = _clip_halfplane(ring, a, b, c)
        if len(ring) < 3:
            return Polygon(())
    ring = _dedupe_ring(ring, eps)
    if len(ring) < 3:
        return Polygon(())
    return Polygon(tuple(Point(x, y) for x, y in ring))


def _check_bbox_contains(bbox, sites):
    x0, y0, x1, y1 = bbox
    for s in sites:
        if not (x0 <= s.pos.x <= x1 and y0 <= s.pos.y <= y1):
            raise InvalidArgumentError(f"bbox {bbox} does not contain site {s.id}")


def voronoi_cell_polygon(
    index: VoronoiIndex, site_id: int, bbox: tuple[float, float, float, float]
) -> Polygon:
    center = index.site(site_id)
    ring = _bbox_ring(bbox)
    _check_bbox_contains(bbox, index.sites)
    eps = 1e-12 * max(bbox[2] - bbox[0], bbox[3] - bbox[1])
    pairs = [(center.pos, s.pos) for s in index.sites if s.id != site_id]
    return _clip_cell(ring, pairs, eps)


def order_k_cell_polygon(
    sites: Sequence[Site],
    subset: set[int],
    bbox: tuple[float, float, float, float],
) -> Polygon:
    """Locus of points whose kNN set equals `subset`, clipped to bbox.

    Intersection of one half-plane per (inside, outside) site pair; may be
    empty.  Oracle/display helper: the engines never call this while ticking.
    """
    ids = {s.id for s in sites}
    if not subset:
        raise InvalidArgumentError("subset must be nonempty")
    unknown = subset - ids
    if unknown:
        raise NotFoundError(f"unknown site ids {sorted(unknown)}")
    ring = _bbox_ring(bbox)
    _check_bbox_contains(bbox, sites)
    eps = 1e-12 * max(bbox[2] - bbox[0], bbox[3] - bbox[1])
    inside = [s for s in sites if s.id in subset]
    outside = [s for s in sites if s.id not in subset]
    pairs = [(i.pos, o.pos) for i in inside for o in outside]
    return _clip_cell(ring, pairs, eps)


# ---------------------------------------------------------------------------
# Site edits (full rebuild semantics)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddSite:
    site: Site


@dataclass(frozen=True)
class MoveSite:
    id: int
    pos: Point


@dataclass(frozen=True)
class RemoveSite:
    id: int


SiteEdit = AddSite | MoveSite | RemoveSite


def update_sites(index: VoronoiIndex, ops: Iterable[SiteEdit]) -> VoronoiIndex:
    by_id = dict(index.by_id)
    for op in ops:
        if isinstance(op, AddSite):
            if op.site.id in by_id:
                raise DuplicateIdError(f"duplicate site id {op.site.id}")
            by_id[op.site.id] = op.site
        elif isinstance(op, MoveSite):
            if op.id not in by_id:
                raise NotFoundError(f"unknown site id {op.id}")
            by_id[op.id] = Site(op.id, op.pos)
        elif isinstance(op, RemoveSite):
            if op.id not in by_id:
                raise NotFoundError(f"unknown site id {op.id}")
            del by_id[op.id]
        else:
            raise InvalidArgumentError(f"unknown edit op {op!r}")
    return build_voronoi([by_id[i] for i in sorted(by_id)])
