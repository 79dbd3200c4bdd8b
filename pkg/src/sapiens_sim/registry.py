"""Node identities, roles, positions, work proofs, rankings and capacities."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable

from .errors import AbandonedNode, DuplicateId, InvalidProof, RoleViolation, UnknownNode
from .ledger import Ledger, TxKind


class NodeKind(str, Enum):
    ORDINARY = "Ordinary"
    FOG = "Fog"


class Role(str, Enum):
    USER = "User"
    POCD = "POCD"
    POCA = "POCA"
    WHH = "WHH"
    WHA = "WHA"
    CRO = "CRO"


class Outcome(str, Enum):
    COMPLETED = "Completed"
    FAILED = "Failed"
    REJECTED = "Rejected"
    CLAIM_FAILED = "ClaimFailed"


# arbiter role -> the pool it is drawn from
ARBITER_POOLS = {Role.POCA: Role.POCD, Role.WHA: Role.WHH}


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, or decimal-looking float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass
class NodeProfile:
    node_id: str
    kind: NodeKind = NodeKind.ORDINARY
    roles: frozenset = frozenset()
    position: tuple[float, float] = (0.0, 0.0)
    pow_score: int = 0
    ranking: int = 0
    capacity: Fraction = Fraction(1)
    active_level: int = 0
    assigned: int = 0
    completed: int = 0
    abandoned: bool = False
    key_id: str | None = None
    # simulation knobs, not protocol state
    skill: float = 1.0
    failure_prob: float = 0.0

    def __post_init__(self):
        self.kind = NodeKind(self.kind)
        self.roles = frozenset(Role(r) for r in self.roles)
        self.position = (float(self.position[0]), float(self.position[1]))
        self.capacity = as_fraction(self.capacity)

    @property
    def completion_degree(self) -> Fraction:
        if self.assigned == 0:
            return Fraction(1)
        return Fraction(self.completed, self.assigned)

    def has(self, role: Role) -> bool:
        return role in self.roles

    def to_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "kind": self.kind.value,
            "roles": sorted(r.value for r in self.roles),
            "position": list(self.position),
            "pow_score": self.pow_score,
            "ranking": self.ranking,
            "capacity": str(self.capacity),
            "active_level": self.active_level,
            "assigned": self.assigned,
            "completed": self.completed,
            "completion_degree": str(self.completion_degree),
            "abandoned": self.abandoned,
            "key_id": self.key_id,
        }


@dataclass(frozen=True)
class WorkProof:
    node_id: str
    puzzle_seed: str
    nonce: int
    difficulty: int


def work_digest(puzzle_seed: str, nonce: int) -> bytes:
    return hashlib.sha256(bytes.fromhex(puzzle_seed) + nonce.to_bytes(8, "big")).digest()


def leading_zero_bits(digest: bytes) -> int:
    value = int.from_bytes(digest, "big")
    return len(digest) * 8 - value.bit_length()


def check_work(puzzle_seed: str, nonce: int, difficulty: int) -> bool:
    return leading_zero_bits(work_digest(puzzle_seed, nonce)) >= difficulty


def solve_work(puzzle_seed: str, difficulty: int, start: int = 0) -> int:
    """Smallest nonce >= start meeting the difficulty."""
    nonce = start
    while not check_work(puzzle_seed, nonce, difficulty):
        nonce += 1
    return nonce


def puzzle_seed_for(node_id: str, salt: str) -> str:
    return hashlib.sha256(f"{salt}:{node_id}".encode()).hexdigest()


class Registry:
    """Sole authority on which nodes exist, are alive, and hold which roles."""

    def __init__(self, ledger: Ledger | None = None, capacity_step=Fraction(1), ranking_step: int = 1):
        self.ledger = ledger
        self.capacity_step = as_fraction(capacity_step)
        self.ranking_step = ranking_step
        self.nodes: dict[str, NodeProfile] = {}
        self._proofs: set[tuple[str, str, int]] = set()

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __iter__(self):
        return iter(self.nodes.values())

    def _record(self, kind, actor, subject, payload=None, memo=None):
        if self.ledger is not None:
            self.ledger.record(kind, actor, subject, payload=payload, memo=memo)

    def get(self, node_id: str) -> NodeProfile:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def live(self, node_id: str) -> NodeProfile:
        node = self.get(node_id)
        if node.abandoned:
            raise AbandonedNode(node_id)
        return node

    def register_node(self, profile: NodeProfile) -> str:
        if profile.node_id in self.nodes:
            raise DuplicateId(profile.node_id)
        if profile.kind is NodeKind.FOG and profile.roles:
            raise RoleViolation(f"fog node {profile.node_id} cannot hold roles")
        for arbiter, pool in ARBITER_POOLS.items():
            if arbiter in profile.roles and pool not in profile.roles:
                raise RoleViolation(f"{profile.node_id}: {arbiter.value} requires {pool.value}")
        if Role.CRO in profile.roles and profile.capacity <= 0:
            raise RoleViolation(f"{profile.node_id}: CRO needs positive capacity")
        if profile.kind is NodeKind.ORDINARY and profile.key_id is None:
            profile.key_id = "key-" + hashlib.sha256(profile.node_id.encode()).hexdigest()[:16]
        self.nodes[profile.node_id] = profile
        self._record(TxKind.NODE_REGISTERED, profile.node_id, profile.node_id, payload=profile.to_dict())
        return profile.node_id

    def submit_work_proof(self, proof: WorkProof) -> int:
        node = self.live(proof.node_id)
        key = (proof.node_id, proof.puzzle_seed, proof.nonce)
        if key in self._proofs:
            raise InvalidProof(f"proof already counted for {proof.node_id}")
        if proof.difficulty < 0 or not check_work(proof.puzzle_seed, proof.nonce, proof.difficulty):
            raise InvalidProof(f"nonce {proof.nonce} misses difficulty {proof.difficulty}")
        self._proofs.add(key)
        node.pow_score += 1
        self._record(
            TxKind.WORK_PROOF,
            proof.node_id,
            proof.puzzle_seed,
            memo={"nonce": proof.nonce, "difficulty": proof.difficulty},
        )
        return node.pow_score

    def distance(self, a: str, b: str) -> float:
        pa, pb = self.get(a).position, self.get(b).position
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1])

    def note_assignment(self, node_id: str) -> None:
        self.live(node_id).assigned += 1

    def record_outcome(self, node_id: str, outcome: Outcome) -> NodeProfile:
        node = self.live(node_id)
        outcome = Outcome(outcome)
        if outcome is Outcome.COMPLETED:
            node.completed += 1
            node.assigned = max(node.assigned, node.completed)
            node.active_level += 1
        elif outcome is Outcome.FAILED:
            if node.has(Role.CRO):
                node.capacity = max(Fraction(0), node.capacity - self.capacity_step)
                if node.capacity == 0:
                    node.abandoned = True
                    self._record(TxKind.NODE_ABANDONED, node_id, node_id, memo={"reason": "capacity exhausted"})
        else:
            node.ranking = max(0, node.ranking - self.ranking_step)
        return node

    def eligible(self, role: Role, exclusions: Iterable[str] = ()) -> list[NodeProfile]:
        excluded = set(exclusions)
        return [
            n
            for n in self.nodes.values()
            if n.kind is NodeKind.ORDINARY and role in n.roles and not n.abandoned and n.node_id not in excluded
        ]

    def fog_nodes(self) -> list[NodeProfile]:
        return sorted((n for n in self.nodes.values() if n.kind is NodeKind.FOG), key=lambda n: n.node_id)

    def dump(self) -> list[dict]:
        return [self.nodes[k].to_dict() for k in sorted(self.nodes)]
