"""Moving-kNN maintenance on the plane.

The engine prefetches the floor(rho*k) nearest sites (the set R), reports the
top k of R as the kNN set, and guards it with the influential set
I(R) | (R \\ knn), where I(S) collects the Voronoi neighbors of S's members
that are outside S.  As long as every kNN member is closer to the query than
every influential-set member, the reported set is provably the exact kNN; when
that order breaks, the update escalates through three tiers, cheapest first:

  1. re-rank R in place (the intruder was already prefetched),
  2. swap a single influential neighbor into R,
  3. recompute R and its influential set from scratch.

Tiers 1 and 2 verify the repaired state before accepting it and fall through
on failure, so every accepted state carries the same exactness guarantee as a
fresh computation.  No Voronoi construction happens outside build_voronoi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Literal

from .errors import InvalidArgumentError, NotFoundError, TooFewSitesError
from .geometry import Point, VoronoiIndex, distance_key, knn_search

TickEvent = Literal["none", "rerank", "swap", "recompute"]


@dataclass(frozen=True)
class QueryConfig:
    """k is the reported set size; rho >= 1 scales the prefetch set."""

    k: int
    rho: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidArgumentError(f"k must be >= 1, got {self.k}")
        if not (self.rho >= 1.0) or not math.isfinite(self.rho):
            raise InvalidArgumentError(f"rho must be a finite real >= 1, got {self.rho}")

    @property
    def prefetch_size(self) -> int:
        return math.floor(self.rho * self.k)


@dataclass
class Metrics:
    """Cumulative counters for one query's lifetime.  Mutated in place by tick."""

    ticks: int = 0
    validations: int = 0
    comparisons: int = 0
    false_alarms: int = 0
    swaps: int = 0
    reranks: int = 0
    full_recomputes: int = 0
    knn_changes: int = 0


@dataclass(frozen=True)
class ValidationResult:
    """Verdict of one validation pass.

    candidate is the influential-set member nearest to q, delete the kNN
    member farthest from q; on failure the candidate is strictly closer.
    comparisons counts the keys examined, always |knn| + |is_set|.
    """

    valid: bool
    candidate: int | None
    delete: int | None
    comparisons: int = 0


@dataclass(frozen=True)
class QueryState:
    """Single-writer engine state; metrics is shared across successor states."""

    config: QueryConfig
    index: VoronoiIndex
    R: tuple[int, ...]
    knn: tuple[int, ...]
    is_set: frozenset[int]
    ins_of_R: frozenset[int]
    metrics: Metrics


def influential_neighbor_set(index: VoronoiIndex, subset: Iterable[int]) -> frozenset[int]:
    """All Voronoi neighbors of subset members that are not themselves in subset."""
    members = frozenset(subset)
    if not members:
        raise InvalidArgumentError("subset must be nonempty")
    out: set[int] = set()
    for sid in members:
        neighbors = index.adjacency.get(sid)
        if neighbors is None:
            raise NotFoundError(f"unknown site id {sid}")
        out.update(neighbors)
    return frozenset(out - members)


def _fresh_state(index: VoronoiIndex, q: Point, config: QueryConfig, metrics: Metrics) -> QueryState:
    m = config.prefetch_size
    if m > len(index.sites):
        raise TooFewSitesError(
            f"prefetch set needs {m} sites (k={config.k}, rho={config.rho}), have {len(index.sites)}"
        )
    r = tuple(knn_search(index, q, m))
    knn = r[: config.k]
    ins = influential_neighbor_set(index, r)
    return QueryState(config, index, r, knn, ins | frozenset(r[config.k :]), ins, metrics)


def init_query(index: VoronoiIndex, q: Point, config: QueryConfig) -> QueryState:
    """Compute R, knn, and the influential set from scratch at q."""
    return _fresh_state(index, q, config, Metrics())


def validate(state: QueryState, q: Point) -> ValidationResult:
    """One ordering pass over knn and is_set.

    Valid iff the farthest kNN member is strictly closer to q (by DistanceKey)
    than the nearest influential-set member.  A true verdict certifies that
    knn is the exact kNN of q: every Voronoi neighbor of a kNN member lies in
    R | I(R), so is_set contains I(knn) and the safe-region test applies.
    Pure; does not touch metrics.
    """
    index = state.index
    worst_key, worst_id = None, None
    for sid in state.knn:
        key = distance_key(q, index.site(sid))
        if worst_key is None or key > worst_key:
            worst_key, worst_id = key, sid
    best_key, best_id = None, None
    for sid in state.is_set:
        key = distance_key(q, index.site(sid))
        if best_key is None or key < best_key:
            best_key, best_id = key, sid
    comparisons = len(state.knn) + len(state.is_set)
    valid = best_key is None or worst_key < best_key
    return ValidationResult(valid, best_id, worst_id, comparisons)


def _accept(metrics: Metrics, old_knn: frozenset[int], new_knn: tuple[int, ...]) -> None:
    if frozenset(new_knn) != old_knn:
        metrics.knn_changes += 1
    else:
        metrics.false_alarms += 1


def apply_update(
    index: VoronoiIndex, state: QueryState, q: Point, result: ValidationResult
) -> QueryState:
    """Repair a failed validation; tiers attempted cheapest first.

    Every accepted tier leaves knn equal to the exact kNN of q and the
    ordering invariant knn < is_set re-established at q.
    """
    cfg = state.config
    metrics = state.metrics
    old_knn = frozenset(state.knn)

    keyed = sorted((distance_key(q, index.site(sid)), sid) for sid in state.R)
    r = tuple(sid for _, sid in keyed)
    knn = r[: cfg.k]
    ins_keyed = sorted(
        (distance_key(q, index.site(sid)), sid) for sid in state.ins_of_R
    )

    if result.candidate is not None and result.candidate not in state.ins_of_R:
        # Tier 1: the intruder was already prefetched; re-ranking R suffices
        # if the new top k beats every influential neighbor of R.
        if not ins_keyed or keyed[cfg.k - 1][0] < ins_keyed[0][0]:
            metrics.reranks += 1
            _accept(metrics, old_knn, knn)
            return replace(
                state,
                index=index,
                R=r,
                knn=knn,
                is_set=state.ins_of_R | frozenset(r[cfg.k :]),
            )
        # Still invalid after the re-rank; since R is now in key order the
        # offending candidate must be an influential neighbor.

    if ins_keyed:
        # Tier 2: drop the farthest prefetched member for the nearest
        # influential neighbor, then verify the swapped R against its own
        # influential set.  Acceptance proves R is the exact prefetch set.
        cand_key, cand = ins_keyed[0]
        keyed2 = sorted(keyed[:-1] + [(cand_key, cand)])
        r2 = tuple(sid for _, sid in keyed2)
        ins2 = influential_neighbor_set(index, r2)
        ins2_keys = [distance_key(q, index.site(sid)) for sid in ins2]
        if not ins2_keys or keyed2[-1][0] < min(ins2_keys):
            metrics.swaps += 1
            knn2 = r2[: cfg.k]
            _accept(metrics, old_knn, knn2)
            return replace(
                state,
                index=index,
                R=r2,
                knn=knn2,
                is_set=ins2 | frozenset(r2[cfg.k :]),
                ins_of_R=ins2,
            )

    # Tier 3: recompute from scratch.
    new_state = _fresh_state(index, q, cfg, metrics)
    metrics.full_recomputes += 1
    _accept(metrics, old_knn, new_state.knn)
    return new_state


def tick(index: VoronoiIndex, state: QueryState, q: Point) -> tuple[QueryState, TickEvent]:
    """Advance one timestamp: validate at q, repair if needed."""
    metrics = state.metrics
    metrics.ticks += 1
    result = validate(state, q)
    metrics.validations += 1
    metrics.comparisons += result.comparisons
    if result.valid:
        return state, "none"
    before = (metrics.reranks, metrics.swaps)
    new_state = apply_update(index, state, q, result)
    if metrics.reranks > before[0]:
        return new_state, "rerank"
    if metrics.swaps > before[1]:
        return new_state, "swap"
    return new_state, "recompute"
