"""Node selection: proximity + proof-of-work for workers, arbitration for auditors."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InsufficientNodes
from .registry import ARBITER_POOLS, Registry, Role


@dataclass(frozen=True)
class SelectionRequest:
    task_id: str
    requester: str
    role_needed: Role
    count: int
    exclusions: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        object.__setattr__(self, "role_needed", Role(self.role_needed))
        object.__setattr__(self, "exclusions", frozenset(self.exclusions))


@dataclass(frozen=True)
class CompositeScore:
    node_id: str
    pow_rank_component: float
    proximity_component: float
    total: float


def composite_scores(registry: Registry, request: SelectionRequest, w_pow: float = 0.5) -> list[CompositeScore]:
    """Score every eligible node, normalizing both components over the eligible set."""
    w_dist = 1.0 - w_pow
    pool = registry.eligible(request.role_needed, request.exclusions)
    if not pool:
        return []
    max_pow = max(n.pow_score for n in pool)
    dists = {n.node_id: registry.distance(n.node_id, request.requester) for n in pool}
    max_dist = max(dists.values())
    scores = []
    for n in pool:
        p = n.pow_score / max_pow if max_pow > 0 else 0.0
        q = 1.0 - dists[n.node_id] / max_dist if max_dist > 0 else 1.0
        scores.append(CompositeScore(n.node_id, p, q, w_pow * p + w_dist * q))
    return scores


def select_by_proximity_pow(registry: Registry, request: SelectionRequest, w_pow: float = 0.5) -> list[str]:
    scores = composite_scores(registry, request, w_pow)
    if len(scores) < request.count:
        raise InsufficientNodes(
            f"{request.task_id}: need {request.count} {request.role_needed.value}, have {len(scores)}"
        )
    scores.sort(key=lambda s: (-s.total, s.node_id))
    return [s.node_id for s in scores[: request.count]]


def select_arbiters(registry: Registry, pool_role: Role, count: int, exclusions=()) -> list[str]:
    """Pick auditors by (active_level, completion_degree, ranking), highest first.

    ``pool_role`` is POCD (yielding POCAs) or WHH (yielding WHAs); only pool
    members that also hold the matching arbiter role are eligible.
    """
    pool_role = Role(pool_role)
    arbiters = {pool: arb for arb, pool in ARBITER_POOLS.items()}
    if pool_role not in arbiters:
        raise ValueError(f"{pool_role.value} is not an arbitration pool")
    arbiter = arbiters[pool_role]
    pool = [n for n in registry.eligible(pool_role, exclusions) if n.has(arbiter)]
    if len(pool) < count:
        raise InsufficientNodes(f"need {count} {arbiter.value}, have {len(pool)}")
    pool.sort(key=lambda n: (-n.active_level, -n.completion_degree, -n.ranking, n.node_id))
    return [n.node_id for n in pool[:count]]
