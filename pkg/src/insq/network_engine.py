"""Moving-kNN maintenance on road networks.

Mirrors the planar engine with shortest-path distances.  The per-tick
validation never searches the full graph: the state caches the restricted
subnetwork carved from the cells of R and its influential neighbors, and a
verdict computed there transfers to the full graph.  Distances measured on
the subnetwork can only overestimate, and as long as the reported set is
exact, every shortest path from the query to a kNN member stays inside the
kept cells, so a genuine ordering break is never masked.  Update tiers do use
full-graph distances: one search from the query prices every repair exactly,
and the subnetwork cache is rebuilt only when R or its neighbors change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .engine import Metrics, QueryConfig, TickEvent, ValidationResult, _accept
from .errors import TooFewSitesError
from .network import (
    Graph,
    NetworkPosition,
    NetworkVoronoi,
    SubnetworkMap,
    _dijkstra,
    check_position,
    restricted_subnetwork_map,
)


@dataclass(frozen=True)
class NetValidationResult(ValidationResult):
    """Adds the set of vertices touched by the validation search."""

    visited: frozenset[int] = frozenset()


@dataclass(frozen=True)
class NetQueryState:
    config: QueryConfig
    graph: Graph
    nv: NetworkVoronoi
    R: tuple[int, ...]
    knn: tuple[int, ...]
    is_set: frozenset[int]
    ins_of_R: frozenset[int]
    subnet: SubnetworkMap
    metrics: Metrics


def _ins_net(nv: NetworkVoronoi, subset: Iterable[int]) -> frozenset[int]:
    """Influential neighbors from the network diagram's cell adjacency."""
    members = frozenset(subset)
    out: set[int] = set()
    for sid in members:
        out.update(nv.adjacency[sid])
    return frozenset(out - members)


def _seeds(graph: Graph, pos: NetworkPosition) -> dict[int, float]:
    e = check_position(graph, pos)
    return {e.u: pos.offset, e.v: e.length - pos.offset}


def _fresh_net_state(
    graph: Graph,
    nv: NetworkVoronoi,
    q: NetworkPosition,
    config: QueryConfig,
    metrics: Metrics,
    dist: dict[int, float] | None = None,
) -> NetQueryState:
    sites = sorted(nv.site_vertices)
    m = config.prefetch_size
    if m > len(sites):
        raise TooFewSitesError(
            f"prefetch set needs {m} sites (k={config.k}, rho={config.rho}), have {len(sites)}"
        )
    if dist is None:
        dist = _dijkstra(graph, _seeds(graph, q))
    keyed = sorted((dist[sid], sid) for sid in sites)
    r = tuple(sid for _, sid in keyed[:m])
    knn = r[: config.k]
    ins = _ins_net(nv, r)
    subnet = restricted_subnetwork_map(graph, nv, frozenset(r) | ins)
    return NetQueryState(
        config, graph, nv, r, knn, ins | frozenset(r[config.k :]), ins, subnet, metrics
    )


def init_query_net(
    graph: Graph, nv: NetworkVoronoi, q: NetworkPosition, config: QueryConfig
) -> NetQueryState:
    return _fresh_net_state(graph, nv, q, config, Metrics())


def validate_net(state: NetQueryState, q: NetworkPosition) -> NetValidationResult:
    """Verdict from one search on the cached subnetwork.

    A query position outside the subnetwork means the nearest site is no
    longer among the prefetched cells, so the verdict is invalid with no
    candidate.  Otherwise the scan rule matches the planar validate, with
    subnetwork distances standing in for true ones.
    """
    pos = state.subnet.map_position(q)
    if pos is None:
        return NetValidationResult(False, None, None, 0, frozenset())
    sub = state.subnet.graph
    dist = _dijkstra(sub, _seeds(sub, pos))
    worst_key, worst_id = None, None
    for sid in state.knn:
        key = (dist.get(sid, math.inf), sid)
        if worst_key is None or key > worst_key:
            worst_key, worst_id = key, sid
    best_key, best_id = None, None
    for sid in state.is_set:
        key = (dist.get(sid, math.inf), sid)
        if best_key is None or key < best_key:
            best_key, best_id = key, sid
    comparisons = len(state.knn) + len(state.is_set)
    valid = math.isfinite(worst_key[0]) and (best_key is None or worst_key < best_key)
    return NetValidationResult(valid, best_id, worst_id, comparisons, frozenset(dist))


def apply_update_net(
    graph: Graph,
    nv: NetworkVoronoi,
    state: NetQueryState,
    q: NetworkPosition,
    result: ValidationResult,
) -> NetQueryState:
    """Same three tiers as the planar update, priced with one full search.

    The validation result's candidate may be subnetwork-biased or missing
    (query off the cache), so the intruder is re-derived from exact keys.
    """
    cfg = state.config
    metrics = state.metrics
    old_knn = frozenset(state.knn)

    dist = _dijkstra(graph, _seeds(graph, q))
    keyed = sorted((dist[sid], sid) for sid in state.R)
    r = tuple(sid for _, sid in keyed)
    knn = r[: cfg.k]
    ins_keyed = sorted((dist[sid], sid) for sid in state.ins_of_R)

    rest = keyed[cfg.k :]
    intruder_in_prefetch = bool(rest) and (not ins_keyed or rest[0] < ins_keyed[0])
    if intruder_in_prefetch:
        # Tier 1: R and its neighbors are unchanged as sets, so the cached
        # subnetwork stays.
        if not ins_keyed or keyed[cfg.k - 1] < ins_keyed[0]:
            metrics.reranks += 1
            _accept(metrics, old_knn, knn)
            return replace(
                state,
                R=r,
                knn=knn,
                is_set=state.ins_of_R | frozenset(r[cfg.k :]),
            )

    if ins_keyed:
        # Tier 2: single swap, verified against the swapped set's own
        # influential neighbors with exact keys.
        cand_key, cand = ins_keyed[0]
        keyed2 = sorted(keyed[:-1] + [(cand_key, cand)])
        r2 = tuple(sid for _, sid in keyed2)
        ins2 = _ins_net(nv, r2)
        if not ins2 or keyed2[-1] < min((dist[sid], sid) for sid in ins2):
            metrics.swaps += 1
            knn2 = r2[: cfg.k]
            _accept(metrics, old_knn, knn2)
            subnet = restricted_subnetwork_map(graph, nv, frozenset(r2) | ins2)
            return replace(
                state,
                R=r2,
                knn=knn2,
                is_set=ins2 | frozenset(r2[cfg.k :]),
                ins_of_R=ins2,
                subnet=subnet,
            )

    new_state = _fresh_net_state(graph, nv, q, cfg, metrics, dist)
    metrics.full_recomputes += 1
    _accept(metrics, old_knn, new_state.knn)
    return new_state


def tick_net(
    graph: Graph, nv: NetworkVoronoi, state: NetQueryState, q: NetworkPosition
) -> tuple[NetQueryState, TickEvent]:
    """Advance one timestamp on the network."""
    metrics = state.metrics
    metrics.ticks += 1
    result = validate_net(state, q)
    metrics.validations += 1
    metrics.comparisons += result.comparisons
    if result.valid:
        return state, "none"
    before = (metrics.reranks, metrics.swaps)
    new_state = apply_update_net(graph, nv, state, q, result)
    if metrics.reranks > before[0]:
        return new_state, "rerank"
    if metrics.swaps > before[1]:
        return new_state, "swap"
    return new_state, "recompute"
